#pragma once

// ArtCoT-QA style datasets: items, validation, statistics, painting filtering
// and model-driven QA construction.

#include "amar/backend.hpp"
#include "amar/error.hpp"
#include "amar/planner.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace amar {

struct CotStep {
    std::string text;
    std::optional<std::string> grounding;  // raw label; checked by validate_item

    bool operator==(const CotStep&) const = default;
};

struct BenchmarkItem {
    std::string question;
    std::string reference_answer;
    std::vector<CotStep> cot_steps;
    std::vector<std::string> evidence_types;
    std::string difficulty;           // "High" or "Medium"
    std::string planning_complexity;  // "multi-hop" for the main slice
    std::string painting_id;
    std::string image_path;
    ArtworkMetadata metadata;
    std::string description;

    bool operator==(const BenchmarkItem&) const = default;
};

nlohmann::ordered_json to_json(const BenchmarkItem& item);
/// Structural parse only; content rules are left to validate_item.
BenchmarkItem benchmark_item_from_json(const nlohmann::json& j);

/// One item per line. Errors name the 1-based line of the first bad item.
std::vector<BenchmarkItem> parse_dataset(std::string_view contents);
std::vector<BenchmarkItem> load_dataset(const std::filesystem::path& path);
void save_dataset(const std::vector<BenchmarkItem>& items, const std::filesystem::path& path);

/// Stable per-item key: the painting id, with "#2", "#3", ... appended to
/// repeats in dataset order.
std::vector<std::string> item_ids(const std::vector<BenchmarkItem>& items);

ArtworkRecord artwork_of(const BenchmarkItem& item);

struct StepBounds {
    std::size_t min_steps = 4;
    std::size_t max_steps = 5;
};

std::vector<EvidenceType> default_allowed_tags();       // all five labels
std::vector<EvidenceType> construction_allowed_tags();  // Visual, Metadata, KG-Background, Common-Knowledge

ValidationReport validate_item(const BenchmarkItem& item, const std::vector<EvidenceType>& allowed_tags,
                               const StepBounds& bounds);

struct LengthSummary {
    std::size_t min = 0;
    std::size_t max = 0;
    double mean = 0.0;  // rounded to one decimal

    bool operator==(const LengthSummary&) const = default;
};

struct DatasetStats {
    std::size_t n_questions = 0;
    std::size_t n_paintings = 0;
    std::map<std::string, std::size_t> difficulty_counts;
    LengthSummary steps;
    LengthSummary question_words;
    LengthSummary answer_words;
    std::size_t multi_hop = 0;

    bool operator==(const DatasetStats&) const = default;
};

nlohmann::ordered_json to_json(const DatasetStats& stats);
std::string render_stats(const DatasetStats& stats);

DatasetStats compute_stats(const std::vector<BenchmarkItem>& items);

struct PaintingRecord {
    std::string painting_id;
    std::string image_path;
    ArtworkMetadata metadata;
    // Description sections in source order, e.g. {"content", ...}, {"context", ...}.
    std::vector<std::pair<std::string, std::string>> sections;

    std::string description() const;            // section texts joined by blank lines
    std::string formatted_description() const;  // "[content] ..." per section
};

/// Accepts {"description": {"content": "...", ...}} or a plain description
/// string with a "perspectives" label list.
PaintingRecord painting_record_from_json(const nlohmann::ordered_json& j);
std::vector<PaintingRecord> load_painting_records(const std::filesystem::path& path);

struct FilterThresholds {
    std::size_t min_desc_words = 100;
    std::vector<std::string> required_keywords = {"symbolism", "depiction", "context", "meaning"};
    std::vector<std::string> required_perspectives = {"content", "context"};
};

/// Empty when the record passes; otherwise the first failed rule.
std::optional<std::string> filter_rejection(const PaintingRecord& record, const FilterThresholds& thresholds);
std::vector<PaintingRecord> filter_paintings(const std::vector<PaintingRecord>& records,
                                             const FilterThresholds& thresholds);

/// Heuristic for questions answerable from metadata alone.
bool looks_like_direct_factual(std::string_view question);

struct ConstructionConstraints {
    std::vector<EvidenceType> allowed_tags = construction_allowed_tags();
    StepBounds step_bounds;
    FilterThresholds filter;
};

ModelRequest build_construction_request(const PaintingRecord& record, const ConstructionConstraints& constraints);

/// Outputs that break the constraints are discarded and retried twice before failing.
BenchmarkItem construct_qa(const PaintingRecord& record, ModelBackend& backend,
                           const ConstructionConstraints& constraints = {});

}  // namespace amar
