#pragma once

// Overlap metrics, the three-family LLM judge and report aggregation.

#include "amar/backend.hpp"
#include "amar/benchmark.hpp"
#include "amar/pipeline.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace amar {

/// Lowercased whitespace tokens.
std::vector<std::string> metric_tokens(std::string_view text);

/// Sentence BLEU-n: geometric mean of the clipped 1..n-gram precisions times
/// the brevity penalty, no smoothing. The reference length for the penalty is
/// the one closest to the candidate length (shorter wins ties).
double bleu_n(std::string_view candidate, const std::vector<std::string>& references, int n);

/// LCS F-measure with beta = 1.
double rouge_l(std::string_view candidate, std::string_view reference);

struct OverlapScores {
    std::array<double, 4> bleu{};  // bleu[0] is BLEU-1
    double rouge_l = 0.0;

    bool operator==(const OverlapScores&) const = default;
};

OverlapScores overlap_scores(std::string_view candidate, std::string_view reference);

enum class JudgeDimension { StepCompleteness, Faithfulness, SubgraphRelevance, EvidenceCoverage, AnswerQuality };

inline constexpr JudgeDimension kAllJudgeDimensions[] = {
    JudgeDimension::StepCompleteness, JudgeDimension::Faithfulness, JudgeDimension::SubgraphRelevance,
    JudgeDimension::EvidenceCoverage, JudgeDimension::AnswerQuality};

/// "step_completeness", "faithfulness", ...
std::string_view to_key(JudgeDimension d);

struct JudgeScores {
    std::optional<int> step_completeness;
    std::optional<int> faithfulness;
    std::optional<int> subgraph_relevance;
    std::optional<int> evidence_coverage;
    std::optional<int> answer_quality;

    std::optional<int>& at(JudgeDimension d);
    const std::optional<int>& at(JudgeDimension d) const;
    bool operator==(const JudgeScores&) const = default;
};

enum class JudgeFamily { Reasoning, Retrieval, Answer };

std::vector<JudgeDimension> dimensions_of(JudgeFamily family);
/// Retrieval is skipped for modes without retrieval.
std::vector<JudgeFamily> applicable_families(PipelineMode mode);

ModelRequest build_judge_request(JudgeFamily family, const BenchmarkItem& item, const RunRecord& record);

/// Strict: an object holding exactly the requested dimensions, each an
/// integer in 1..5.
std::map<JudgeDimension, int> parse_judge_output(std::string_view raw, const std::vector<JudgeDimension>& dims);

struct JudgeOutcome {
    JudgeScores scores;
    std::vector<ModelRequest> requests;  // one per family, first attempt
};

/// Fails with a config error, before any call, when the judge model is the
/// record's generator model.
JudgeOutcome judge(const BenchmarkItem& item, const RunRecord& record, ModelBackend& judge_backend);

struct EvaluationRow {
    std::string item_id;
    PipelineMode mode = PipelineMode::Amar;
    std::string run_id;
    OverlapScores overlap;
    JudgeScores judge;
    std::vector<std::string> judge_prompts;
};

/// Columns in report order: BLEU-1..4, ROUGE-L, then the five judge dimensions.
inline constexpr std::size_t kReportColumns = 10;
std::array<std::string_view, kReportColumns> report_column_names();
std::array<std::optional<double>, kReportColumns> row_values(const EvaluationRow& row);

struct ModeSummary {
    PipelineMode mode = PipelineMode::Amar;
    std::size_t rows = 0;
    // Overlap columns in percent, judge columns on the 1..5 scale; two decimals.
    std::array<std::optional<double>, kReportColumns> means{};
};

struct EvaluationReport {
    std::vector<EvaluationRow> rows;  // sorted by (item id, mode)
    std::vector<ModeSummary> summaries;
    std::array<std::vector<PipelineMode>, kReportColumns> best{};
    std::string judge_model_id;
    std::vector<std::string> warnings;
};

EvaluationReport aggregate(std::vector<EvaluationRow> rows, std::string judge_model_id);

nlohmann::ordered_json to_json(const EvaluationReport& report);
std::string render_table(const EvaluationReport& report);

struct EvaluationInputs {
    std::vector<BenchmarkItem> items;
    std::vector<RunRecord> records;
};

/// Pairs each record with its item by (painting id, question), scores the
/// overlap metrics and runs the judge. Records without an item are reported
/// as warnings.
EvaluationReport evaluate(const EvaluationInputs& inputs, ModelBackend& judge_backend, std::size_t parallelism);

}  // namespace amar
