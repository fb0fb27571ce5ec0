#include "amar/ingestion.hpp"

#include "amar/error.hpp"
#include "amar/parallel.hpp"
#include "amar/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace amar {

std::vector<std::string> tokenize(std::string_view input) { return text::split_whitespace(input); }

void ChunkParams::validate() const {
    if (window == 0) fail(ErrorKind::Config, "chunk window must be positive");
    if (overlap >= window) {
        fail(ErrorKind::Config, "chunk overlap (" + std::to_string(overlap) + ") must be smaller than window (" +
                                    std::to_string(window) + ")");
    }
}

std::vector<DocumentChunk> chunk_document(const std::string& doc_id, std::string_view input,
                                          const ChunkParams& params) {
    params.validate();
    auto tokens = tokenize(input);
    std::vector<DocumentChunk> chunks;
    const std::size_t n = tokens.size();
    for (std::size_t start = 0; start < n; start += params.step()) {
        std::size_t end = std::min(n, start + params.window);
        std::vector<std::string> slice(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                                       tokens.begin() + static_cast<std::ptrdiff_t>(end));
        chunks.push_back({doc_id, chunks.size(), text::join(slice, " "), start, end - start});
        if (end == n) break;
    }
    return chunks;
}

ExtractionResult parse_extraction(std::string_view raw) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text::strip_code_fence(raw));
    } catch (const nlohmann::json::exception&) {
        fail(ErrorKind::Validation, "extraction output is not JSON");
    }
    if (!j.is_object() || !j.contains("entities") || !j.at("entities").is_array()) {
        fail(ErrorKind::Validation, "extraction output must be an object with an 'entities' array");
    }
    const nlohmann::json empty = nlohmann::json::array();
    const auto& rels = j.contains("relationships") ? j.at("relationships") : empty;
    if (!rels.is_array()) fail(ErrorKind::Validation, "'relationships' must be an array");

    auto string_field = [](const nlohmann::json& obj, const char* key, bool required, std::size_t idx,
                           const char* what) -> std::string {
        if (!obj.contains(key)) {
            if (required) {
                fail(ErrorKind::Validation,
                     std::string(what) + " " + std::to_string(idx) + " lacks '" + key + "'");
            }
            return {};
        }
        if (!obj.at(key).is_string()) {
            fail(ErrorKind::Validation, std::string(what) + " " + std::to_string(idx) + ": '" + key + "' is not a string");
        }
        return obj.at(key).get<std::string>();
    };

    ExtractionResult result;
    std::map<std::u32string, std::string> names;  // normalized -> name as extracted
    std::size_t idx = 0;
    for (const auto& e : j.at("entities")) {
        if (!e.is_object()) fail(ErrorKind::Validation, "entity " + std::to_string(idx) + " is not an object");
        std::string name = text::trim(string_field(e, "entity_name", true, idx, "entity"));
        std::string type_label = string_field(e, "entity_type", true, idx, "entity");
        std::string description = string_field(e, "entity_description", false, idx, "entity");
        ++idx;
        auto type = try_parse_node_type(type_label);
        if (name.empty() || !type) {
            ++result.dropped_entities;
            result.warnings.push_back(name.empty() ? "entity with empty name dropped"
                                                   : "entity '" + name + "' has unknown type '" + type_label + "'");
            continue;
        }
        names.emplace(text::normalize_name(name), name);
        result.entities.push_back({std::move(name), *type, std::move(description)});
    }
    idx = 0;
    for (const auto& r : rels) {
        if (!r.is_object()) fail(ErrorKind::Validation, "relationship " + std::to_string(idx) + " is not an object");
        std::string src = string_field(r, "source_entity", true, idx, "relationship");
        std::string dst = string_field(r, "target_entity", true, idx, "relationship");
        std::string description = string_field(r, "relationship_description", false, idx, "relationship");
        ++idx;
        auto s = names.find(text::normalize_name(src));
        auto t = names.find(text::normalize_name(dst));
        if (s == names.end() || t == names.end() || s == t) {
            ++result.dropped_relations;
            result.warnings.push_back("relationship '" + src + "' -> '" + dst + "' has an unhoused endpoint");
            continue;
        }
        result.relations.push_back({s->second, t->second, std::move(description)});
    }
    return result;
}

ModelRequest build_extraction_request(const DocumentChunk& chunk) {
    std::string types;
    for (NodeType t : kAllNodeTypes) {
        if (!types.empty()) types += ", ";
        types += to_label(t);
    }
    std::string instructions =
        "Given a visual art related text document and a list of entity types, identify all entities of "
        "those types from the text and all relationships among the identified entities.\n"
        "Steps:\n"
        "1. Identify all entities. For each identified entity, extract:\n"
        "- entity_name: Name of the entity, capitalized\n"
        "- entity_type: One of the following types: [" + types + "]\n"
        "- entity_description: Comprehensive description of the entity's attributes and activities\n"
        "2. From the entities identified in step 1, identify all pairs of (source_entity, target_entity) "
        "that are clearly related to each other. For each pair, extract:\n"
        "- source_entity: name of the source entity, as identified in step 1\n"
        "- target_entity: name of the target entity, as identified in step 1\n"
        "- relationship_description: why the two entities are related\n"
        "Output format: a single JSON object {\"entities\": [{\"entity_name\", \"entity_type\", "
        "\"entity_description\"}], \"relationships\": [{\"source_entity\", \"target_entity\", "
        "\"relationship_description\"}]} and nothing else.\n"
        "Document:";
    return {Purpose::Extract, {RequestPart::text(std::move(instructions)), RequestPart::text(chunk.text)}};
}

ExtractionResult extract(const DocumentChunk& chunk, ModelBackend& backend) {
    if (text::trim(chunk.text).empty()) fail(ErrorKind::Validation, "cannot extract from an empty chunk");
    ModelRequest request = build_extraction_request(chunk);
    std::string last_error;
    for (int attempt = 0; attempt <= kMaxParseRetries; ++attempt) {
        ModelRequest r = request;
        if (attempt > 0) {
            r.parts.insert(r.parts.end() - 1,
                           RequestPart::text("Your previous answer could not be parsed (" + last_error +
                                             "). Reply again with only the JSON object."));
        }
        std::string raw = backend.complete(r);
        try {
            return parse_extraction(raw);
        } catch (const Error& e) {
            last_error = e.what();
        }
    }
    fail(ErrorKind::Validation, "extraction output for " + chunk.doc_id + "#" + std::to_string(chunk.chunk_index) +
                                    " unparseable after " + std::to_string(kMaxParseRetries + 1) +
                                    " attempts: " + last_error);
}

std::vector<CorpusDocument> load_corpus(const std::filesystem::path& source) {
    namespace fs = std::filesystem;
    std::vector<CorpusDocument> docs;
    std::error_code ec;
    if (fs::is_directory(source, ec)) {
        for (const auto& entry : fs::directory_iterator(source)) {
            if (entry.path().extension() == ".txt") {
                docs.push_back({entry.path().stem().string(), std::nullopt, entry.path()});
            }
        }
    } else {
        std::ifstream in(source, std::ios::binary);
        if (!in) fail(ErrorKind::Io, "cannot open corpus: " + source.string());
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (text::trim(line).empty()) continue;
            try {
                auto j = nlohmann::json::parse(line);
                docs.push_back({j.at("doc_id").get<std::string>(), j.at("text").get<std::string>(), std::nullopt});
            } catch (const nlohmann::json::exception& e) {
                fail(ErrorKind::Io, "corpus manifest line " + std::to_string(line_no) + ": " + e.what());
            }
        }
    }
    std::sort(docs.begin(), docs.end(), [](const auto& a, const auto& b) { return a.doc_id < b.doc_id; });
    return docs;
}

nlohmann::ordered_json IngestStats::to_json() const {
    nlohmann::ordered_json j;
    j["docs"] = docs;
    j["chunks"] = chunks;
    j["entities"] = entities;
    j["relations"] = relations;
    j["dropped"] = dropped;
    j["failed_docs"] = failed_docs;
    auto f = nlohmann::ordered_json::array();
    for (const auto& x : failures) f.push_back({{"doc_id", x.doc_id}, {"error", x.message}});
    j["failures"] = std::move(f);
    j["merged_duplicates"] = merged_duplicates;
    j["nodes"] = nodes;
    j["edges"] = edges;
    return j;
}

namespace {

std::string read_document(const CorpusDocument& doc) {
    if (doc.text) return *doc.text;
    if (!doc.path) fail(ErrorKind::Io, "document " + doc.doc_id + " has neither text nor path");
    std::ifstream in(*doc.path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot read " + doc.path->string());
    std::stringstream buf;
    buf << in.rdbuf();
    if (in.bad()) fail(ErrorKind::Io, "failed reading " + doc.path->string());
    return buf.str();
}

}  // namespace

IngestStats ingest_corpus(const std::vector<CorpusDocument>& docs, KnowledgeGraph& graph, ModelBackend& backend,
                          const IngestOptions& options) {
    options.chunking.validate();
    IngestStats stats;
    for (const auto& doc : docs) {
        ++stats.docs;
        std::vector<DocumentChunk> chunks;
        std::vector<ExtractionResult> results;
        try {
            chunks = chunk_document(doc.doc_id, read_document(doc), options.chunking);
            results = parallel_map(chunks.size(), options.parallelism,
                                   [&](std::size_t i) { return extract(chunks[i], backend); });
        } catch (const Error& e) {
            spdlog::warn("ingestion of {} failed: {}", doc.doc_id, e.what());
            ++stats.failed_docs;
            stats.failures.push_back({doc.doc_id, e.what()});
            continue;
        }

        stats.chunks += chunks.size();
        for (std::size_t c = 0; c < chunks.size(); ++c) {
            const auto& res = results[c];
            std::map<std::u32string, std::string> ids;
            for (const auto& ent : res.entities) {
                KnowledgeNode node{"", ent.name, ent.type, ent.description, {{doc.doc_id, chunks[c].chunk_index}}};
                ids.emplace(text::normalize_name(ent.name), graph.add_node(std::move(node)));
                ++stats.entities;
            }
            for (const auto& rel : res.relations) {
                const auto& s = ids.at(text::normalize_name(rel.source_name));
                const auto& t = ids.at(text::normalize_name(rel.target_name));
                if (s == t) {
                    ++stats.dropped;
                    continue;
                }
                graph.add_edge({s, t, rel.description});
                ++stats.relations;
            }
            stats.dropped += res.dropped_entities + res.dropped_relations;
        }
    }
    stats.nodes = graph.node_count();
    stats.edges = graph.edge_count();
    return stats;
}

}  // namespace amar
