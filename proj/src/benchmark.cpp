#include "amar/benchmark.hpp"

#include "amar/ingestion.hpp"
#include "amar/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace amar {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string read_file(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, std::string("cannot read ") + what + " " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string string_field(const nlohmann::json& j, const char* key, bool required) {
    if (!j.contains(key) || j.at(key).is_null()) {
        if (required) fail(ErrorKind::Validation, std::string("missing '") + key + "'");
        return {};
    }
    if (!j.at(key).is_string()) fail(ErrorKind::Validation, std::string("'") + key + "' must be a string");
    return j.at(key).get<std::string>();
}

LengthSummary summarize(const std::vector<std::size_t>& values) {
    LengthSummary s;
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    double sum = 0.0;
    for (auto v : values) sum += static_cast<double>(v);
    s.mean = std::round(sum / static_cast<double>(values.size()) * 10.0) / 10.0;
    return s;
}

ordered_json to_json(const LengthSummary& s) { return {{"min", s.min}, {"max", s.max}, {"mean", s.mean}}; }

bool contains_ci(const std::string& haystack, const std::string& needle) {
    return text::to_lower_ascii(haystack).find(text::to_lower_ascii(needle)) != std::string::npos;
}

std::string tag_list(const std::vector<EvidenceType>& tags) {
    std::vector<std::string> labels;
    for (auto t : tags) labels.emplace_back(to_label(t));
    return text::join(labels, ", ");
}

}  // namespace

ordered_json to_json(const BenchmarkItem& item) {
    ordered_json steps = ordered_json::array();
    for (const auto& s : item.cot_steps) {
        steps.push_back({{"text", s.text}, {"grounding", s.grounding ? ordered_json(*s.grounding) : ordered_json(nullptr)}});
    }
    ordered_json j;
    j["question"] = item.question;
    j["reference_answer"] = item.reference_answer;
    j["cot_steps"] = std::move(steps);
    j["evidence_types"] = item.evidence_types;
    j["difficulty"] = item.difficulty;
    j["planning_complexity"] = item.planning_complexity;
    j["painting_id"] = item.painting_id;
    j["image_path"] = item.image_path;
    j["metadata"] = to_json(item.metadata);
    j["description"] = item.description;
    return j;
}

BenchmarkItem benchmark_item_from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail(ErrorKind::Validation, "item must be a JSON object");
    BenchmarkItem item;
    item.question = string_field(j, "question", true);
    item.reference_answer = string_field(j, "reference_answer", true);
    if (!j.contains("cot_steps") || !j.at("cot_steps").is_array()) {
        fail(ErrorKind::Validation, "'cot_steps' must be an array");
    }
    for (const auto& s : j.at("cot_steps")) {
        if (!s.is_object()) fail(ErrorKind::Validation, "cot step must be an object");
        CotStep step;
        step.text = string_field(s, "text", true);
        if (s.contains("grounding") && !s.at("grounding").is_null()) step.grounding = string_field(s, "grounding", false);
        item.cot_steps.push_back(std::move(step));
    }
    if (j.contains("evidence_types") && !j.at("evidence_types").is_null()) {
        if (!j.at("evidence_types").is_array()) fail(ErrorKind::Validation, "'evidence_types' must be an array");
        for (const auto& e : j.at("evidence_types")) {
            if (!e.is_string()) fail(ErrorKind::Validation, "evidence type must be a string");
            item.evidence_types.push_back(e.get<std::string>());
        }
    }
    item.difficulty = string_field(j, "difficulty", false);
    item.planning_complexity = string_field(j, "planning_complexity", false);
    item.painting_id = string_field(j, "painting_id", false);
    item.image_path = string_field(j, "image_path", false);
    item.metadata = metadata_from_json(j.contains("metadata") ? j.at("metadata") : nlohmann::json());
    item.description = string_field(j, "description", false);
    return item;
}

std::vector<BenchmarkItem> parse_dataset(std::string_view contents) {
    std::vector<BenchmarkItem> items;
    std::istringstream in{std::string(contents)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            items.push_back(benchmark_item_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Validation, "dataset line " + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            fail(ErrorKind::Validation, "dataset line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return items;
}

std::vector<BenchmarkItem> load_dataset(const std::filesystem::path& path) {
    return parse_dataset(read_file(path, "dataset"));
}

void save_dataset(const std::vector<BenchmarkItem>& items, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write dataset " + path.string());
    for (const auto& item : items) out << to_json(item).dump() << '\n';
    if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

std::vector<std::string> item_ids(const std::vector<BenchmarkItem>& items) {
    std::map<std::string, std::size_t> seen;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < items.size(); ++i) {
        std::string base = items[i].painting_id.empty() ? "item" + std::to_string(i + 1) : items[i].painting_id;
        std::size_t n = ++seen[base];
        ids.push_back(n == 1 ? base : base + "#" + std::to_string(n));
    }
    return ids;
}

ArtworkRecord artwork_of(const BenchmarkItem& item) {
    ArtworkRecord a;
    a.painting_id = item.painting_id;
    a.image_ref = item.image_path;
    a.metadata = item.metadata;
    if (!item.description.empty()) a.description = item.description;
    return a;
}

std::vector<EvidenceType> default_allowed_tags() { return {std::begin(kAllEvidenceTypes), std::end(kAllEvidenceTypes)}; }

std::vector<EvidenceType> construction_allowed_tags() {
    return {EvidenceType::Visual, EvidenceType::Metadata, EvidenceType::KGBackground, EvidenceType::CommonKnowledge};
}

ValidationReport validate_item(const BenchmarkItem& item, const std::vector<EvidenceType>& allowed_tags,
                               const StepBounds& bounds) {
    ValidationReport report;
    auto allowed = [&](EvidenceType t) { return std::find(allowed_tags.begin(), allowed_tags.end(), t) != allowed_tags.end(); };

    if (text::trim(item.question).empty()) report.add("question is empty");
    if (text::trim(item.reference_answer).empty()) report.add("reference_answer is empty");
    if (text::trim(item.painting_id).empty()) report.add("painting_id is empty");
    if (text::trim(item.planning_complexity).empty()) report.add("planning_complexity is empty");
    if (item.difficulty != "High" && item.difficulty != "Medium") {
        report.add("difficulty '" + item.difficulty + "' is not High or Medium");
    }

    const std::size_t n = item.cot_steps.size();
    if (n == 0) report.add("cot_steps is empty");
    if (n < bounds.min_steps || n > bounds.max_steps) {
        report.add(std::to_string(n) + " steps outside [" + std::to_string(bounds.min_steps) + ", " +
                   std::to_string(bounds.max_steps) + "]");
    }

    std::set<EvidenceType> used;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = item.cot_steps[i];
        std::string where = "step " + std::to_string(i + 1);
        if (text::trim(s.text).empty()) report.add(where + " has empty text");
        if (!s.grounding || text::trim(*s.grounding).empty()) {
            report.add(where + " has no grounding tag");
            continue;
        }
        auto tag = try_parse_evidence_type(*s.grounding);
        if (!tag) {
            report.add(where + " has unknown grounding tag '" + *s.grounding + "'");
        } else if (!allowed(*tag)) {
            report.add(where + " grounding tag '" + *s.grounding + "' is not allowed");
        } else {
            used.insert(*tag);
        }
    }

    std::set<EvidenceType> declared;
    for (const auto& label : item.evidence_types) {
        auto tag = try_parse_evidence_type(label);
        if (!tag) {
            report.add("unknown evidence type '" + label + "'");
        } else {
            declared.insert(*tag);
        }
    }
    for (auto t : used) {
        if (!declared.count(t)) report.add("evidence_types omits used tag " + std::string(to_label(t)));
    }
    for (auto t : declared) {
        if (!used.count(t)) report.add("evidence_types lists unused tag " + std::string(to_label(t)));
    }
    return report;
}

ordered_json to_json(const DatasetStats& s) {
    ordered_json j;
    j["n_questions"] = s.n_questions;
    j["n_paintings"] = s.n_paintings;
    ordered_json diff = ordered_json::object();
    for (const auto& [k, v] : s.difficulty_counts) diff[k] = v;
    j["difficulty_counts"] = std::move(diff);
    j["steps"] = to_json(s.steps);
    j["question_words"] = to_json(s.question_words);
    j["answer_words"] = to_json(s.answer_words);
    j["multi_hop"] = s.multi_hop;
    return j;
}

std::string render_stats(const DatasetStats& s) {
    auto triple = [](const LengthSummary& l) {
        return std::to_string(l.min) + " / " + std::to_string(l.max) + " / " + text::format_fixed(l.mean, 1);
    };
    std::vector<std::string> diff;
    for (const auto& [k, v] : s.difficulty_counts) diff.push_back(k + " " + std::to_string(v));
    std::string out;
    out += "Questions / Paintings      " + std::to_string(s.n_questions) + " / " + std::to_string(s.n_paintings) + "\n";
    out += "Difficulty                 " + text::join(diff, ", ") + "\n";
    out += "Multi-hop                  " + std::to_string(s.multi_hop) + "\n";
    out += "Steps (min/max/mean)       " + triple(s.steps) + "\n";
    out += "Question words             " + triple(s.question_words) + "\n";
    out += "Answer words               " + triple(s.answer_words) + "\n";
    return out;
}

DatasetStats compute_stats(const std::vector<BenchmarkItem>& items) {
    if (items.empty()) fail(ErrorKind::Validation, "cannot compute statistics of an empty dataset");
    DatasetStats s;
    s.n_questions = items.size();
    std::set<std::string> paintings;
    std::vector<std::size_t> steps, qlen, alen;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& item = items[i];
        if (item.cot_steps.empty()) {
            fail(ErrorKind::Validation, "item " + std::to_string(i + 1) + " has no cot_steps");
        }
        paintings.insert(item.painting_id);
        if (!item.difficulty.empty()) ++s.difficulty_counts[item.difficulty];
        if (text::to_lower_ascii(item.planning_complexity) == "multi-hop") ++s.multi_hop;
        steps.push_back(item.cot_steps.size());
        qlen.push_back(tokenize(item.question).size());
        alen.push_back(tokenize(item.reference_answer).size());
    }
    s.n_paintings = paintings.size();
    s.steps = summarize(steps);
    s.question_words = summarize(qlen);
    s.answer_words = summarize(alen);
    return s;
}

std::string PaintingRecord::description() const {
    std::vector<std::string> texts;
    for (const auto& [_, body] : sections) texts.push_back(body);
    return text::join(texts, "\n\n");
}

std::string PaintingRecord::formatted_description() const {
    std::vector<std::string> texts;
    for (const auto& [label, body] : sections) texts.push_back("[" + label + "] " + body);
    return text::join(texts, "\n");
}

PaintingRecord painting_record_from_json(const nlohmann::ordered_json& record) {
    if (!record.is_object()) fail(ErrorKind::Validation, "painting record must be an object");
    const auto j = nlohmann::json::parse(record.dump());
    PaintingRecord r;
    r.painting_id = string_field(j, "painting_id", true);
    r.image_path = string_field(j, "image_path", false);
    r.metadata = metadata_from_json(j.contains("metadata") ? j.at("metadata") : nlohmann::json());
    if (!j.contains("description")) fail(ErrorKind::Validation, "painting record lacks 'description'");
    const auto& d = record.at("description");
    if (d.is_object()) {
        for (const auto& [label, body] : d.items()) {
            if (!body.is_string()) fail(ErrorKind::Validation, "description section '" + label + "' must be a string");
            r.sections.emplace_back(label, body.get<std::string>());
        }
    } else if (d.is_string()) {
        std::vector<std::string> labels;
        if (j.contains("perspectives")) labels = j.at("perspectives").get<std::vector<std::string>>();
        std::string label = labels.empty() ? "description" : text::join(labels, "+");
        r.sections.emplace_back(label, d.get<std::string>());
    } else {
        fail(ErrorKind::Validation, "'description' must be an object or a string");
    }
    return r;
}

std::vector<PaintingRecord> load_painting_records(const std::filesystem::path& path) {
    std::string contents = read_file(path, "painting records");
    std::vector<PaintingRecord> out;
    std::istringstream in(contents);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(painting_record_from_json(nlohmann::ordered_json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Validation, "records line " + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            fail(ErrorKind::Validation, "records line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::optional<std::string> filter_rejection(const PaintingRecord& r, const FilterThresholds& t) {
    const std::pair<const char*, const std::optional<std::string>*> fields[] = {
        {"title", &r.metadata.title},         {"author", &r.metadata.author}, {"technique", &r.metadata.technique},
        {"timeframe", &r.metadata.timeframe}, {"tags", &r.metadata.tags},
    };
    for (const auto& [name, value] : fields) {
        if (!*value || text::trim(**value).empty()) return std::string("metadata field '") + name + "' is empty";
    }
    std::string desc = r.description();
    std::size_t words = tokenize(desc).size();
    if (words < t.min_desc_words) {
        return "description has " + std::to_string(words) + " words, below " + std::to_string(t.min_desc_words);
    }
    if (!t.required_keywords.empty()) {
        bool any = std::any_of(t.required_keywords.begin(), t.required_keywords.end(),
                               [&](const std::string& k) { return contains_ci(desc, k); });
        if (!any) return "description contains none of the required keywords";
    }
    for (const auto& p : t.required_perspectives) {
        bool found = std::any_of(r.sections.begin(), r.sections.end(), [&](const auto& section) {
            for (const auto& part : text::split_whitespace(text::to_lower_ascii(section.first))) {
                std::string lowered = text::to_lower_ascii(p);
                std::size_t pos = 0;
                // "content+context" style labels name several perspectives
                while (pos <= part.size()) {
                    auto end = part.find('+', pos);
                    if (part.substr(pos, end == std::string::npos ? std::string::npos : end - pos) == lowered) return true;
                    if (end == std::string::npos) break;
                    pos = end + 1;
                }
            }
            return false;
        });
        if (!found) return "missing the '" + p + "' perspective";
    }
    return std::nullopt;
}

std::vector<PaintingRecord> filter_paintings(const std::vector<PaintingRecord>& records,
                                             const FilterThresholds& thresholds) {
    std::vector<PaintingRecord> out;
    for (const auto& r : records) {
        if (!filter_rejection(r, thresholds)) out.push_back(r);
    }
    return out;
}

bool looks_like_direct_factual(std::string_view question) {
    static const std::vector<std::string> kPrefixes = {
        "who painted",       "who created",     "who is the artist", "who is the author", "what is the title",
        "what year",         "when was",        "in what year",      "what is the date",  "what technique",
        "what medium",       "what is the medium", "what material",  "where is",          "how old",
        "what size",         "what are the dimensions",
    };
    std::string q = text::to_lower_ascii(text::trim(question));
    if (tokenize(q).size() < 6) return true;
    return std::any_of(kPrefixes.begin(), kPrefixes.end(), [&](const std::string& p) { return q.rfind(p, 0) == 0; });
}

ModelRequest build_construction_request(const PaintingRecord& record, const ConstructionConstraints& c) {
    std::string prompt =
        "You annotate artworks for a multi-step reasoning benchmark. Using the painting image, its metadata and "
        "its description, write a single question-answer pair with an explicit chain of thought.\n\n";
    prompt += "Metadata:\n" + render_metadata_block(record.metadata);
    prompt += "\nDescription:\n" + record.formatted_description() + "\n\n";
    prompt += "Constraints:\n";
    prompt +=
        "1. The question must require multi-step reasoning. Do not ask direct factual questions answerable from "
        "the metadata alone.\n";
    prompt += "2. The answer must be fully supported by the metadata, the description and the visible content.\n";
    prompt += "3. Give between " + std::to_string(c.step_bounds.min_steps) + " and " +
              std::to_string(c.step_bounds.max_steps) +
              " chain-of-thought steps with exactly one grounding tag per step.\n";
    prompt += std::string(prompt_marker::kAllowedTags) + " " + tag_list(c.allowed_tags) + "\n";
    prompt +=
        "4. Difficulty (High or Medium) and planning complexity must be consistent with the number of steps and "
        "evidence types used.\n";
    prompt +=
        "5. Vary the question phrasing (for example \"What visual elements...\", \"In what way...\", \"What "
        "evidence...\").\n\n";
    prompt +=
        "Output format: reply with only a JSON object with keys question, reference_answer, cot_steps (a list of "
        "{\"text\", \"grounding\"}), evidence_types, difficulty, planning_complexity.";
    ModelRequest request{Purpose::Construct, {RequestPart::text(std::move(prompt))}};
    if (!record.image_path.empty()) request.parts.push_back(RequestPart::image(record.image_path));
    return request;
}

BenchmarkItem construct_qa(const PaintingRecord& record, ModelBackend& backend, const ConstructionConstraints& c) {
    if (auto why = filter_rejection(record, c.filter)) {
        fail(ErrorKind::Validation, "painting " + record.painting_id + " does not pass the filter: " + *why);
    }
    ModelRequest request = build_construction_request(record, c);
    std::string last_error;
    for (int attempt = 0; attempt <= 2; ++attempt) {
        ModelRequest r = request;
        if (attempt > 0) {
            r.parts.push_back(RequestPart::text("Your previous output was discarded (" + last_error +
                                                "). Reply again with only a JSON object that meets every constraint."));
        }
        std::string raw = backend.complete(r);
        try {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(text::strip_code_fence(raw));
            } catch (const nlohmann::json::exception&) {
                fail(ErrorKind::Validation, "output is not JSON");
            }
            BenchmarkItem item = benchmark_item_from_json(j);
            item.painting_id = record.painting_id;
            item.image_path = record.image_path;
            item.metadata = record.metadata;
            item.description = record.description();
            ValidationReport report = validate_item(item, c.allowed_tags, c.step_bounds);
            if (looks_like_direct_factual(item.question)) report.add("question is a direct factual question");
            if (!report.ok()) fail(ErrorKind::Validation, text::join(report.violations, "; "));
            return item;
        } catch (const Error& e) {
            last_error = e.what();
        }
    }
    fail(ErrorKind::Validation, "no valid item for painting " + record.painting_id + " after 3 attempts: " + last_error);
}

}  // namespace amar
