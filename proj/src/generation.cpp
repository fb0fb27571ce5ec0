#include "amar/generation.hpp"

#include "amar/error.hpp"
#include "amar/text.hpp"

namespace amar {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::pair<PipelineMode, std::string_view> kModeLabels[] = {
    {PipelineMode::MllmCot, "mllm-cot"},
    {PipelineMode::StaticRetrieval, "static-retrieval"},
    {PipelineMode::TextOnlyPlanner, "text-only-planner"},
    {PipelineMode::Amar, "amar"},
};

std::string all_grounding_labels() {
    std::vector<std::string> labels;
    for (auto e : kAllEvidenceTypes) labels.emplace_back(to_label(e));
    return text::join(labels, ", ");
}

}  // namespace

std::string_view to_label(PipelineMode mode) {
    for (const auto& [m, label] : kModeLabels) {
        if (m == mode) return label;
    }
    return "unknown";
}

PipelineMode parse_pipeline_mode(std::string_view label) {
    for (const auto& [m, l] : kModeLabels) {
        if (l == label) return m;
    }
    fail(ErrorKind::Config, "unknown pipeline mode '" + std::string(label) +
                                "' (expected mllm-cot, static-retrieval, text-only-planner or amar)");
}

bool uses_retrieval(PipelineMode mode) { return mode != PipelineMode::MllmCot; }

bool uses_plan(PipelineMode mode) { return mode == PipelineMode::TextOnlyPlanner || mode == PipelineMode::Amar; }

ordered_json to_json(const StepwiseAnswer& a) {
    ordered_json steps = ordered_json::array();
    for (const auto& s : a.steps) {
        steps.push_back({{"step", s.index}, {"text", s.text}, {"grounding", to_label(s.grounding)}});
    }
    ordered_json j;
    j["steps"] = std::move(steps);
    j["final_text"] = a.final_text;
    j["parse_failed"] = a.parse_failed;
    return j;
}

StepwiseAnswer stepwise_answer_from_json(const nlohmann::json& j) {
    StepwiseAnswer a;
    for (const auto& s : j.at("steps")) {
        a.steps.push_back({s.at("step").get<std::size_t>(), s.at("text").get<std::string>(),
                           parse_evidence_type(s.at("grounding").get<std::string>())});
    }
    a.final_text = j.at("final_text").get<std::string>();
    a.parse_failed = j.value("parse_failed", false);
    return a;
}

std::string build_generation_prompt(const ArtworkRecord& artwork, const std::string& question,
                                    const RetrievedContext* context, const ReasoningPlan* plan, PipelineMode mode) {
    if (uses_retrieval(mode) != (context != nullptr)) {
        fail(ErrorKind::Validation, std::string("mode ") + std::string(to_label(mode)) +
                                        (context ? " takes no retrieved context" : " requires a retrieved context"));
    }
    if (uses_plan(mode) != (plan != nullptr)) {
        fail(ErrorKind::Validation, std::string("mode ") + std::string(to_label(mode)) +
                                        (plan ? " takes no reasoning plan" : " requires a reasoning plan"));
    }

    std::string prompt = "Answer the question about the artwork";
    prompt += artwork.image_ref.empty() ? ".\n\n" : " shown in the attached image.\n\n";
    prompt += "Question: " + question + "\n\n";
    prompt += "Artwork metadata:\n" + render_metadata_block(artwork.metadata);

    if (context) {
        prompt += "\nRetrieved context (a shared evidence pool for all steps):\n" + context->rendered_text;
    }
    if (plan) {
        prompt += "\nReasoning plan. Follow these steps in order and ground each step in evidence of the stated type:\n";
        for (const auto& s : plan->steps) {
            prompt += std::to_string(s.index) + ". [" + std::string(to_label(s.evidence)) + "] " + s.sub_goal + "\n";
        }
    }

    prompt += "\nInstructions:\n";
    if (plan) {
        std::vector<std::string> seq;
        for (const auto& s : plan->steps) seq.emplace_back(to_label(s.evidence));
        prompt += "Write exactly " + std::to_string(plan->size()) +
                  " steps, one per plan step, in the same order, each grounded in its step's evidence type.\n";
        prompt += std::string(prompt_marker::kGroundingSequence) + " " + text::join(seq, ", ") + "\n";
    } else {
        if (mode == PipelineMode::MllmCot) {
            prompt += "Think step by step using only the image, the metadata and your own knowledge.\n";
        } else {
            prompt += "Reason step by step using the retrieved context where it is relevant.\n";
        }
        prompt += std::string(prompt_marker::kStepRange) + " 3-5\n";
    }
    prompt += "Tag every step with exactly one grounding label from: " + all_grounding_labels() + ".\n";
    prompt +=
        "Output format: reply with only a JSON object "
        "{\"steps\":[{\"step\":1,\"text\":\"<step>\",\"grounding\":\"<label>\"}],\"final_answer\":\"<answer>\"}.";
    return prompt;
}

ModelRequest build_generation_request(const ArtworkRecord& artwork, const std::string& question,
                                      const RetrievedContext* context, const ReasoningPlan* plan, PipelineMode mode) {
    ModelRequest request{Purpose::Generate,
                         {RequestPart::text(build_generation_prompt(artwork, question, context, plan, mode))}};
    if (!artwork.image_ref.empty()) request.parts.push_back(RequestPart::image(artwork.image_ref));
    return request;
}

StepwiseAnswer parse_stepwise(std::string_view raw, std::optional<std::size_t> expected_steps) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text::strip_code_fence(raw));
    } catch (const nlohmann::json::exception&) {
        fail(ErrorKind::Validation, "answer output is not JSON");
    }
    if (!j.is_object() || !j.contains("steps") || !j.at("steps").is_array()) {
        fail(ErrorKind::Validation, "answer must be an object with a 'steps' array");
    }
    StepwiseAnswer answer;
    std::size_t position = 0;
    for (const auto& s : j.at("steps")) {
        ++position;
        std::string where = "answer step " + std::to_string(position);
        if (!s.is_object()) fail(ErrorKind::Validation, where + " is not an object");
        if (!s.contains("text") || !s.at("text").is_string()) fail(ErrorKind::Validation, where + " lacks 'text'");
        if (!s.contains("grounding") || !s.at("grounding").is_string()) {
            fail(ErrorKind::Validation, where + " lacks a 'grounding' tag");
        }
        std::string body = text::trim(s.at("text").get<std::string>());
        if (body.empty()) fail(ErrorKind::Validation, where + " has empty text");
        std::string label = s.at("grounding").get<std::string>();
        auto tag = try_parse_evidence_type(label);
        if (!tag) fail(ErrorKind::Validation, where + ": unknown grounding label '" + label + "'");
        answer.steps.push_back({position, std::move(body), *tag});
    }
    if (answer.steps.empty()) fail(ErrorKind::Validation, "answer has no steps");
    if (expected_steps && answer.steps.size() != *expected_steps) {
        fail(ErrorKind::Validation, "answer has " + std::to_string(answer.steps.size()) + " steps, expected " +
                                        std::to_string(*expected_steps));
    }
    if (j.contains("final_answer")) {
        if (!j.at("final_answer").is_string()) fail(ErrorKind::Validation, "'final_answer' must be a string");
        answer.final_text = text::trim(j.at("final_answer").get<std::string>());
    }
    if (answer.final_text.empty()) {
        std::vector<std::string> texts;
        for (const auto& s : answer.steps) texts.push_back(s.text);
        answer.final_text = text::join(texts, " ");
    }
    return answer;
}

GenerationOutcome generate_answer(const ModelRequest& request, ModelBackend& generator,
                                  std::optional<std::size_t> expected_steps) {
    std::string last_error;
    std::string last_raw;
    for (int attempt = 0; attempt <= 2; ++attempt) {
        ModelRequest r = request;
        if (attempt > 0) {
            r.parts.push_back(RequestPart::text("Your previous answer could not be parsed (" + last_error +
                                                "). Reply again with only the JSON object."));
        }
        last_raw = generator.complete(r);
        try {
            return {parse_stepwise(last_raw, expected_steps), request, attempt + 1};
        } catch (const Error& e) {
            last_error = e.what();
        }
    }
    StepwiseAnswer fallback;
    fallback.final_text = last_raw;
    fallback.parse_failed = true;
    return {std::move(fallback), request, 3};
}

}  // namespace amar
