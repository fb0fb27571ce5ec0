#pragma once

// End-to-end runs and their persisted trace (RunRecord).
//
// Stage order per mode:
//   amar               plan (image) -> intent -> coarse -> rerank -> context -> generate
//   text-only-planner  plan (no image) -> intent -> coarse -> rerank -> context -> generate
//   static-retrieval   intent = question -> coarse -> rerank -> context -> generate
//   mllm-cot           generate

#include "amar/generation.hpp"
#include "amar/graph.hpp"
#include "amar/index.hpp"
#include "amar/retrieval.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace amar {

struct PipelineBackends {
    std::shared_ptr<ModelBackend> planner;
    std::shared_ptr<ModelBackend> generator;
    std::shared_ptr<ModelBackend> embedder;
    std::shared_ptr<ModelBackend> scorer;  // used when retrieval.scorer == Remote
};

struct PipelineOptions {
    RetrievalConfig retrieval;
    bool planner_sees_description = false;
    std::int64_t seed = 0;
    bool record_timings = false;
    nlohmann::ordered_json config_echo;  // resolved engine config, embedded verbatim
};

struct GroundingViolation {
    std::size_t step = 0;
    EvidenceType expected = EvidenceType::Visual;
    EvidenceType actual = EvidenceType::Visual;

    bool operator==(const GroundingViolation&) const = default;
};

struct BackendIdentity {
    std::string kind;
    std::string model_id;

    bool operator==(const BackendIdentity&) const = default;
};

struct RunRecord {
    std::string run_id;
    PipelineMode mode = PipelineMode::Amar;
    std::int64_t seed = 0;
    ArtworkRecord artwork;
    std::string question;

    std::optional<ReasoningPlan> plan;
    std::optional<ModelRequest> planning_request;
    int plan_attempts = 0;

    std::optional<RetrievalIntent> intent;
    std::size_t retrieval_events = 0;
    std::vector<RankedUnit> coarse_candidates;
    std::vector<ScoredCandidate> reranked_candidates;  // all coarse candidates with fused scores
    std::optional<RetrievedContext> final_context;
    std::vector<ModelRequest> scoring_requests;

    std::string generation_prompt;
    ModelRequest generation_request;
    int generation_attempts = 0;
    StepwiseAnswer answer;
    std::vector<GroundingViolation> grounding_violations;

    std::optional<std::map<std::string, double>> timings_ms;
    std::map<std::string, BackendIdentity> backends;
    nlohmann::ordered_json config;
};

nlohmann::ordered_json to_json(const RunRecord& record);
RunRecord run_record_from_json(const nlohmann::json& j);

/// Mode-consistency rules: mllm-cot has no plan, intent or context;
/// static-retrieval has context but no plan; planner modes have both.
/// Retrieval modes log exactly one coarse retrieval event.
ValidationReport check_record_consistency(const RunRecord& record);

/// "<mode>-<16 hex>" from (mode, painting id, question, seed).
std::string make_run_id(PipelineMode mode, const std::string& painting_id, const std::string& question,
                        std::int64_t seed);

class PipelineError : public Error {
public:
    PipelineError(ErrorKind kind, std::string stage, const std::string& message)
        : Error(kind, "stage " + stage + ": " + message), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// graph and index may be null only for mllm-cot.
RunRecord run_pipeline(const ArtworkRecord& artwork, const std::string& question, const KnowledgeGraph* graph,
                       const VectorIndex* index, const PipelineOptions& options, PipelineMode mode,
                       const PipelineBackends& backends);

struct BatchItem {
    std::string item_id;
    ArtworkRecord artwork;
    std::string question;
};

struct BatchFailure {
    std::size_t index = 0;
    std::string item_id;
    std::string stage;
    std::string message;
};

struct BatchResult {
    std::vector<RunRecord> records;  // successful runs, in input order
    std::vector<BatchFailure> failures;
};

BatchResult run_batch(const std::vector<BatchItem>& items, const KnowledgeGraph* graph, const VectorIndex* index,
                      const PipelineOptions& options, PipelineMode mode, const PipelineBackends& backends,
                      std::size_t parallelism);

/// Writes <dir>/<run_id>.json and returns the path.
std::filesystem::path write_run_record(const RunRecord& record, const std::filesystem::path& dir);
std::string serialize_run_record(const RunRecord& record);
RunRecord load_run_record(const std::filesystem::path& path);
/// Every *.json file in `dir` that parses as a run record, ordered by file name.
std::vector<RunRecord> load_run_records(const std::filesystem::path& dir);

}  // namespace amar
