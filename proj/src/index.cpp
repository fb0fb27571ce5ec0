#include "amar/index.hpp"

#include "amar/error.hpp"
#include "amar/parallel.hpp"
#include "amar/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace amar {

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        fail(ErrorKind::Validation, "cosine dimension mismatch: " + std::to_string(a.size()) + " vs " +
                                        std::to_string(b.size()));
    }
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) fail(ErrorKind::Validation, "cosine of a zero vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::string render_node_text(const KnowledgeNode& node) {
    return node.name + " (" + std::string(to_label(node.type)) + "): " + node.description;
}

VectorIndex::VectorIndex(std::size_t dimension, std::vector<IndexEntry> entries)
    : dimension_(dimension), entries_(std::move(entries)) {
    if (dimension_ == 0) fail(ErrorKind::Validation, "index dimension must be positive");
    std::sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) { return a.unit_id < b.unit_id; });
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (e.vector.size() != dimension_) {
            fail(ErrorKind::Validation, "entry '" + e.unit_id + "' has dimension " + std::to_string(e.vector.size()) +
                                            ", index dimension is " + std::to_string(dimension_));
        }
        for (double x : e.vector) {
            if (!std::isfinite(x)) fail(ErrorKind::Validation, "entry '" + e.unit_id + "' has a non-finite value");
        }
        if (i > 0 && entries_[i - 1].unit_id == e.unit_id) {
            fail(ErrorKind::Validation, "duplicate unit_id '" + e.unit_id + "'");
        }
    }
}

const IndexEntry* VectorIndex::find(std::string_view unit_id) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), unit_id,
                               [](const IndexEntry& e, std::string_view id) { return e.unit_id < id; });
    return it != entries_.end() && it->unit_id == unit_id ? &*it : nullptr;
}

std::vector<RankedUnit> VectorIndex::top_k(std::span<const double> query, std::size_t k) const {
    if (k == 0) fail(ErrorKind::Validation, "top_k requires k >= 1");
    if (query.size() != dimension_) {
        fail(ErrorKind::Validation, "query dimension " + std::to_string(query.size()) + " does not match index dimension " +
                                        std::to_string(dimension_));
    }
    std::vector<RankedUnit> scored;
    scored.reserve(entries_.size());
    for (const auto& e : entries_) scored.push_back({e.unit_id, cosine(query, e.vector)});
    auto better = [](const RankedUnit& a, const RankedUnit& b) {
        return a.score != b.score ? a.score > b.score : a.unit_id < b.unit_id;
    };
    std::size_t keep = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), better);
    scored.resize(keep);
    return scored;
}

VectorIndex build_index(const KnowledgeGraph& graph, ModelBackend& embedder, std::size_t parallelism) {
    if (graph.empty()) fail(ErrorKind::Validation, "cannot index an empty graph");
    std::vector<const KnowledgeNode*> nodes;
    for (const auto& [id, n] : graph.nodes()) nodes.push_back(&n);
    auto entries = parallel_map(nodes.size(), parallelism, [&](std::size_t i) {
        std::string rendered = render_node_text(*nodes[i]);
        Embedding v = embedder.embed(rendered);
        return IndexEntry{nodes[i]->id, std::move(rendered), std::move(v)};
    });
    std::size_t dim = entries.front().vector.size();
    return VectorIndex(dim, std::move(entries));
}

std::string serialize_index(const VectorIndex& index) {
    std::string out = nlohmann::ordered_json{{"dimension", index.dimension()}}.dump() + "\n";
    for (const auto& e : index.entries()) {
        out += "{\"unit_id\":" + nlohmann::json(e.unit_id).dump() + ",\"text\":" + nlohmann::json(e.text).dump() +
               ",\"vector\":[";
        for (std::size_t i = 0; i < e.vector.size(); ++i) {
            if (i) out += ',';
            out += text::format_double17(e.vector[i]);
        }
        out += "]}\n";
    }
    return out;
}

void save_index(const VectorIndex& index, const std::filesystem::path& path) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open index file for writing: " + path.string());
    out << serialize_index(index);
    if (!out) fail(ErrorKind::Io, "failed writing index file: " + path.string());
}

VectorIndex parse_index(std::string_view contents) {
    std::istringstream in{std::string(contents)};
    std::string line;
    std::size_t line_no = 0;
    std::optional<std::size_t> dimension;
    std::vector<IndexEntry> entries;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            if (!dimension) {
                dimension = j.at("dimension").get<std::size_t>();
                continue;
            }
            IndexEntry e{j.at("unit_id").get<std::string>(), j.at("text").get<std::string>(),
                         j.at("vector").get<std::vector<double>>()};
            if (e.vector.size() != *dimension) {
                fail(ErrorKind::Io, "index file line " + std::to_string(line_no) + ": vector dimension " +
                                        std::to_string(e.vector.size()) + " differs from header dimension " +
                                        std::to_string(*dimension));
            }
            entries.push_back(std::move(e));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Io, "index file line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!dimension) fail(ErrorKind::Io, "index file has no header line");
    try {
        return VectorIndex(*dimension, std::move(entries));
    } catch (const Error& e) {
        fail(ErrorKind::Io, std::string("index file: ") + e.what());
    }
}

VectorIndex load_index(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open index file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_index(buf.str());
}

}  // namespace amar
