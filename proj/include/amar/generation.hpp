#pragma once

// Plan-constrained, step-wise answer generation.

#include "amar/backend.hpp"
#include "amar/planner.hpp"
#include "amar/retrieval.hpp"

#include <optional>
#include <string>
#include <vector>

namespace amar {

enum class PipelineMode { MllmCot, StaticRetrieval, TextOnlyPlanner, Amar };

inline constexpr PipelineMode kAllModes[] = {PipelineMode::MllmCot, PipelineMode::StaticRetrieval,
                                             PipelineMode::TextOnlyPlanner, PipelineMode::Amar};

/// "mllm-cot", "static-retrieval", "text-only-planner", "amar".
std::string_view to_label(PipelineMode mode);
PipelineMode parse_pipeline_mode(std::string_view label);

bool uses_retrieval(PipelineMode mode);
bool uses_plan(PipelineMode mode);

struct AnswerStep {
    std::size_t index = 1;
    std::string text;
    EvidenceType grounding = EvidenceType::Visual;

    bool operator==(const AnswerStep&) const = default;
};

struct StepwiseAnswer {
    std::vector<AnswerStep> steps;
    std::string final_text;
    bool parse_failed = false;

    bool operator==(const StepwiseAnswer&) const = default;
};

nlohmann::ordered_json to_json(const StepwiseAnswer& a);
StepwiseAnswer stepwise_answer_from_json(const nlohmann::json& j);

/// Errors when the supplied context/plan does not match what `mode` uses.
std::string build_generation_prompt(const ArtworkRecord& artwork, const std::string& question,
                                    const RetrievedContext* context, const ReasoningPlan* plan, PipelineMode mode);

/// The prompt as a text part, plus the image when the artwork has one.
ModelRequest build_generation_request(const ArtworkRecord& artwork, const std::string& question,
                                      const RetrievedContext* context, const ReasoningPlan* plan, PipelineMode mode);

/// Strict parse of {"steps":[{"step","text","grounding"}], "final_answer"}.
StepwiseAnswer parse_stepwise(std::string_view raw, std::optional<std::size_t> expected_steps = std::nullopt);

struct GenerationOutcome {
    StepwiseAnswer answer;
    ModelRequest request;
    int attempts = 1;
};

/// Up to two retries on parse failure; after that the raw text is kept as
/// final_text with no steps and parse_failed set.
GenerationOutcome generate_answer(const ModelRequest& request, ModelBackend& generator,
                                  std::optional<std::size_t> expected_steps);

}  // namespace amar
