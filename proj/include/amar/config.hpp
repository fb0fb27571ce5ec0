#pragma once

// Engine configuration: one JSON file holding every knob of a run.

#include "amar/backend.hpp"
#include "amar/benchmark.hpp"
#include "amar/ingestion.hpp"
#include "amar/retrieval.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace amar {

struct EnginePaths {
    std::string graph = "data/graph.jsonl";
    std::string index = "data/index.jsonl";
    std::string cache;  // empty: no response cache
    std::string dataset = "data/artcot_qa.jsonl";
    std::string runs = "runs";

    bool operator==(const EnginePaths&) const = default;
};

/// Backend roles, in config order.
inline constexpr std::string_view kBackendRoles[] = {"planner", "generator", "embedder", "scorer",
                                                     "extractor", "judge", "annotator"};

struct EngineConfig {
    EnginePaths paths;
    RetrievalConfig retrieval;
    ChunkParams chunking;
    double dedup_threshold = 0.95;
    std::size_t min_desc_words = 100;
    bool planner_sees_description = false;
    std::size_t parallelism = 4;
    std::optional<std::int64_t> seed;
    std::map<std::string, BackendConfig> backends;  // role -> config

    /// Directory relative paths are resolved against (the config file's).
    std::filesystem::path base_dir = ".";

    static EngineConfig defaults();

    void validate() const;
    std::filesystem::path resolve(const std::string& path) const;
    /// The role's backend with the top-level seed filled in for mock configs
    /// that do not set their own.
    BackendConfig backend_for(std::string_view role) const;

    bool operator==(const EngineConfig& other) const;
};

nlohmann::ordered_json to_json(const EngineConfig& config);
/// Unknown keys are errors. Omitted keys take their defaults.
EngineConfig engine_config_from_json(const nlohmann::json& j);
EngineConfig load_engine_config(const std::filesystem::path& path);

}  // namespace amar
