#include "amar/planner.hpp"

#include "amar/text.hpp"

#include <algorithm>

namespace amar {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::pair<EvidenceType, std::string_view> kEvidenceLabels[] = {
    {EvidenceType::Visual, "Visual"},
    {EvidenceType::Metadata, "Metadata"},
    {EvidenceType::Description, "Description"},
    {EvidenceType::KGBackground, "KG-Background"},
    {EvidenceType::CommonKnowledge, "Common-Knowledge"},
};

constexpr std::string_view kMetadataKeys[] = {"title", "author", "technique", "timeframe", "tags"};

std::optional<std::string> optional_string(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    if (!j.at(key).is_string()) fail(ErrorKind::Validation, std::string("'") + key + "' must be a string");
    return j.at(key).get<std::string>();
}

std::string evidence_list() {
    std::vector<std::string> labels;
    for (const auto& [_, label] : kEvidenceLabels) labels.emplace_back(label);
    return text::join(labels, ", ");
}

}  // namespace

std::string_view to_label(EvidenceType type) {
    for (const auto& [t, label] : kEvidenceLabels) {
        if (t == type) return label;
    }
    return "Unknown";
}

std::optional<EvidenceType> try_parse_evidence_type(std::string_view label) {
    std::string lowered = text::to_lower_ascii(text::trim(label));
    for (const auto& [t, l] : kEvidenceLabels) {
        std::string canon = text::to_lower_ascii(l);
        std::string compact;
        for (char c : canon) {
            if (c != '-') compact.push_back(c);
        }
        if (lowered == canon || lowered == compact) return t;
    }
    return std::nullopt;
}

EvidenceType parse_evidence_type(std::string_view label) {
    if (auto t = try_parse_evidence_type(label)) return *t;
    fail(ErrorKind::Validation, "unknown evidence label '" + std::string(label) + "'");
}

ordered_json to_json(const ArtworkMetadata& m) {
    ordered_json j;
    auto put = [&](const char* key, const std::optional<std::string>& v) {
        j[key] = v ? ordered_json(*v) : ordered_json(nullptr);
    };
    put("title", m.title);
    put("author", m.author);
    put("technique", m.technique);
    put("timeframe", m.timeframe);
    put("tags", m.tags);
    return j;
}

ArtworkMetadata metadata_from_json(const nlohmann::json& j) {
    if (j.is_null()) return {};
    if (!j.is_object()) fail(ErrorKind::Validation, "metadata must be an object");
    for (const auto& [key, _] : j.items()) {
        if (std::find(std::begin(kMetadataKeys), std::end(kMetadataKeys), key) == std::end(kMetadataKeys)) {
            fail(ErrorKind::Validation, "unknown metadata key '" + key + "'");
        }
    }
    ArtworkMetadata m;
    m.title = optional_string(j, "title");
    m.author = optional_string(j, "author");
    m.technique = optional_string(j, "technique");
    m.timeframe = optional_string(j, "timeframe");
    if (j.contains("tags") && j.at("tags").is_array()) {
        m.tags = text::join(j.at("tags").get<std::vector<std::string>>(), ", ");
    } else {
        m.tags = optional_string(j, "tags");
    }
    return m;
}

ordered_json to_json(const ArtworkRecord& a) {
    ordered_json j;
    j["painting_id"] = a.painting_id;
    j["image_ref"] = a.image_ref;
    j["metadata"] = to_json(a.metadata);
    j["description"] = a.description ? ordered_json(*a.description) : ordered_json(nullptr);
    return j;
}

ArtworkRecord artwork_from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail(ErrorKind::Validation, "artwork record must be an object");
    ArtworkRecord a;
    a.painting_id = optional_string(j, "painting_id").value_or("");
    if (text::trim(a.painting_id).empty()) fail(ErrorKind::Validation, "artwork painting_id is empty");
    a.image_ref = optional_string(j, "image_ref").value_or(optional_string(j, "image_path").value_or(""));
    a.metadata = metadata_from_json(j.contains("metadata") ? j.at("metadata") : nlohmann::json());
    a.description = optional_string(j, "description");
    return a;
}

ordered_json to_json(const ReasoningPlan& plan) {
    ordered_json steps = ordered_json::array();
    for (const auto& s : plan.steps) {
        steps.push_back({{"step", s.index}, {"goal", s.sub_goal}, {"evidence", to_label(s.evidence)}});
    }
    return {{"steps", std::move(steps)}};
}

std::string render_plan(const ReasoningPlan& plan) { return to_json(plan).dump(); }

ReasoningPlan parse_plan(std::string_view raw) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text::strip_code_fence(raw));
    } catch (const nlohmann::json::exception&) {
        fail(ErrorKind::Validation, "plan output is not JSON");
    }
    if (!j.is_object() || !j.contains("steps") || !j.at("steps").is_array()) {
        fail(ErrorKind::Validation, "plan must be an object with a 'steps' array");
    }
    if (j.at("steps").empty()) fail(ErrorKind::Validation, "plan has no steps");
    ReasoningPlan plan;
    std::size_t position = 0;
    for (const auto& s : j.at("steps")) {
        ++position;
        std::string where = "plan step " + std::to_string(position);
        if (!s.is_object()) fail(ErrorKind::Validation, where + " is not an object");
        if (s.contains("step") && !s.at("step").is_number_integer()) {
            fail(ErrorKind::Validation, where + ": 'step' must be an integer");
        }
        if (!s.contains("goal") || !s.at("goal").is_string()) fail(ErrorKind::Validation, where + " lacks a 'goal' string");
        if (!s.contains("evidence") || !s.at("evidence").is_string()) {
            fail(ErrorKind::Validation, where + " lacks an 'evidence' string");
        }
        std::string goal = text::trim(s.at("goal").get<std::string>());
        if (goal.empty()) fail(ErrorKind::Validation, where + " has an empty goal");
        std::string label = s.at("evidence").get<std::string>();
        auto evidence = try_parse_evidence_type(label);
        if (!evidence) fail(ErrorKind::Validation, where + ": unknown evidence label '" + label + "'");
        plan.steps.push_back({position, std::move(goal), *evidence});
    }
    return plan;
}

ValidationReport validate_plan(const ReasoningPlan& plan, const PlanConstraints& constraints) {
    ValidationReport report;
    const std::size_t t = plan.steps.size();
    if (t < constraints.min_steps) {
        report.add("T=" + std::to_string(t) + " < " + std::to_string(constraints.min_steps));
    }
    if (t > constraints.max_steps) {
        report.add("T=" + std::to_string(t) + " > " + std::to_string(constraints.max_steps));
    }
    for (std::size_t i = 0; i < t; ++i) {
        const auto& s = plan.steps[i];
        if (s.index != i + 1) {
            report.add("step at position " + std::to_string(i + 1) + " has index " + std::to_string(s.index));
        }
        if (text::trim(s.sub_goal).empty()) report.add("step " + std::to_string(i + 1) + " has an empty sub-goal");
    }
    return report;
}

std::string render_metadata_block(const ArtworkMetadata& m) {
    std::string out;
    auto line = [&](std::string_view label, const std::optional<std::string>& v) {
        if (v && !text::trim(*v).empty()) {
            out += label;
            out += ": ";
            out += *v;
            out += '\n';
        }
    };
    line("Title", m.title);
    line("Author", m.author);
    line("Technique", m.technique);
    line("Timeframe", m.timeframe);
    line("Tags", m.tags);
    return out;
}

ModelRequest build_planning_request(const ArtworkRecord& artwork, const std::string& question,
                                    const PlannerOptions& options) {
    std::string prompt =
        "You are the planning component of an art question answering system. Do not answer the question. "
        "Decide which ordered reasoning steps are needed to answer it and which single type of evidence each "
        "step requires.\n\n";
    prompt += "Question: " + question + "\n\n";
    prompt += "Artwork metadata:\n" + render_metadata_block(artwork.metadata);
    if (options.include_description && artwork.description && !artwork.description->empty()) {
        prompt += "\nDescription: " + *artwork.description + "\n";
    }
    prompt += options.multimodal ? "\nThe artwork image is attached.\n"
                                 : "\nNo image is provided; plan from the question and metadata only.\n";
    prompt += "\nAllowed evidence types: " + evidence_list() + ".\n";
    prompt +=
        "Output format: reply with only a JSON object of the form "
        "{\"steps\":[{\"step\":1,\"goal\":\"<sub-goal>\",\"evidence\":\"<evidence type>\"}]}. "
        "Each step has exactly one evidence type from the allowed list.";

    ModelRequest request{Purpose::Plan, {RequestPart::text(std::move(prompt))}};
    if (options.multimodal) {
        if (text::trim(artwork.image_ref).empty()) {
            fail(ErrorKind::Validation, "multimodal planning for '" + artwork.painting_id + "' needs an image");
        }
        request.parts.push_back(RequestPart::image(artwork.image_ref));
    }
    return request;
}

PlanOutcome generate_plan(const ArtworkRecord& artwork, const std::string& question, ModelBackend& backend,
                          const PlannerOptions& options) {
    ModelRequest request = build_planning_request(artwork, question, options);
    std::string last_error;
    for (int attempt = 0; attempt <= 2; ++attempt) {
        ModelRequest r = request;
        if (attempt > 0) {
            r.parts.push_back(RequestPart::text("Your previous plan could not be parsed (" + last_error +
                                                "). Reply again with only the JSON object."));
        }
        std::string raw = backend.complete(r);
        try {
            return {parse_plan(raw), request, attempt + 1};
        } catch (const Error& e) {
            last_error = e.what();
        }
    }
    fail(ErrorKind::Validation, "planner output unparseable after 3 attempts: " + last_error);
}

ordered_json to_json(const RetrievalIntent& intent) {
    ordered_json mix = ordered_json::array();
    for (auto e : intent.evidence_mix) mix.push_back(to_label(e));
    return {{"text", intent.text}, {"evidence_mix", std::move(mix)}};
}

RetrievalIntent derive_retrieval_intent(const ReasoningPlan& plan, const ArtworkRecord& artwork) {
    std::vector<std::string> pieces;
    for (const auto* field : {&artwork.metadata.title, &artwork.metadata.author}) {
        if (*field && !text::trim(**field).empty()) pieces.push_back(text::trim(**field));
    }
    RetrievalIntent intent;
    for (const auto& s : plan.steps) {
        pieces.push_back("step " + std::to_string(s.index) + " [" + std::string(to_label(s.evidence)) +
                         "]: " + s.sub_goal);
        intent.evidence_mix.push_back(s.evidence);
    }
    intent.text = text::join(pieces, "; ");
    return intent;
}

}  // namespace amar
