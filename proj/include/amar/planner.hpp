#pragma once

// Reasoning plans: an ordered list of (sub-goal, evidence type) steps produced
// by a model before any retrieval, and the retrieval intent derived from it.

#include "amar/backend.hpp"
#include "amar/error.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace amar {

enum class EvidenceType { Visual, Metadata, Description, KGBackground, CommonKnowledge };

inline constexpr EvidenceType kAllEvidenceTypes[] = {
    EvidenceType::Visual, EvidenceType::Metadata, EvidenceType::Description,
    EvidenceType::KGBackground, EvidenceType::CommonKnowledge,
};

/// "Visual", "Metadata", "Description", "KG-Background", "Common-Knowledge".
std::string_view to_label(EvidenceType type);
std::optional<EvidenceType> try_parse_evidence_type(std::string_view label);
EvidenceType parse_evidence_type(std::string_view label);

struct ArtworkMetadata {
    std::optional<std::string> title;
    std::optional<std::string> author;
    std::optional<std::string> technique;
    std::optional<std::string> timeframe;
    std::optional<std::string> tags;

    bool operator==(const ArtworkMetadata&) const = default;
};

nlohmann::ordered_json to_json(const ArtworkMetadata& m);
/// Rejects keys outside {title, author, technique, timeframe, tags}. A tag
/// list is joined with ", ".
ArtworkMetadata metadata_from_json(const nlohmann::json& j);

struct ArtworkRecord {
    std::string painting_id;
    std::string image_ref;  // path or URL, opaque here
    ArtworkMetadata metadata;
    std::optional<std::string> description;

    bool operator==(const ArtworkRecord&) const = default;
};

nlohmann::ordered_json to_json(const ArtworkRecord& a);
ArtworkRecord artwork_from_json(const nlohmann::json& j);

struct ReasoningStep {
    std::size_t index = 1;
    std::string sub_goal;
    EvidenceType evidence = EvidenceType::Visual;

    bool operator==(const ReasoningStep&) const = default;
};

struct ReasoningPlan {
    std::vector<ReasoningStep> steps;

    std::size_t size() const noexcept { return steps.size(); }
    bool operator==(const ReasoningPlan&) const = default;
};

nlohmann::ordered_json to_json(const ReasoningPlan& plan);
/// {"steps":[{"step":1,"goal":"...","evidence":"Visual"}, ...]}
std::string render_plan(const ReasoningPlan& plan);

/// Strict parse. Steps keep their order and are re-indexed 1..T.
ReasoningPlan parse_plan(std::string_view raw);

struct PlanConstraints {
    std::size_t min_steps = 4;
    std::size_t max_steps = 5;
};

ValidationReport validate_plan(const ReasoningPlan& plan, const PlanConstraints& constraints);

struct PlannerOptions {
    bool multimodal = true;            // false: text-only planner, image omitted
    bool include_description = false;  // planner sees (image, metadata, question) by default
};

ModelRequest build_planning_request(const ArtworkRecord& artwork, const std::string& question,
                                    const PlannerOptions& options);

struct PlanOutcome {
    ReasoningPlan plan;
    ModelRequest request;  // the first-attempt request, stored in run records
    int attempts = 1;
};

/// Calls the planner model and parses its output, retrying up to twice on
/// parse failure. Never returns a partial plan.
PlanOutcome generate_plan(const ArtworkRecord& artwork, const std::string& question, ModelBackend& backend,
                          const PlannerOptions& options = {});

struct RetrievalIntent {
    std::string text;
    std::vector<EvidenceType> evidence_mix;  // plan order

    bool operator==(const RetrievalIntent&) const = default;
};

nlohmann::ordered_json to_json(const RetrievalIntent& intent);

/// Title and author, then "step t [label]: sub_goal" per step, joined by "; ".
RetrievalIntent derive_retrieval_intent(const ReasoningPlan& plan, const ArtworkRecord& artwork);

std::string render_metadata_block(const ArtworkMetadata& m);

}  // namespace amar
