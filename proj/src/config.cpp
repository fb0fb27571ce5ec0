#include "amar/config.hpp"

#include "amar/text.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace amar {

namespace {

using ordered_json = nlohmann::ordered_json;

const std::vector<std::string> kTopKeys = {
    "paths",       "retrieval", "chunking", "dedup_threshold", "min_desc_words", "planner_sees_description",
    "parallelism", "seed"};

const std::vector<std::string> kPathKeys = {"graph", "index", "cache", "dataset", "runs"};

std::string backend_key(std::string_view role) { return std::string(role) + "_backend"; }

void reject_unknown(const nlohmann::json& j, const std::vector<std::string>& keys, const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            fail(ErrorKind::Config, "unknown " + where + " key '" + key + "'");
        }
    }
}

}  // namespace

EngineConfig EngineConfig::defaults() {
    EngineConfig c;
    for (auto role : kBackendRoles) {
        BackendConfig b;
        b.model_id = "mock-" + std::string(role);
        c.backends[std::string(role)] = b;
    }
    return c;
}

void EngineConfig::validate() const {
    retrieval.validate();
    chunking.validate();
    if (!(dedup_threshold > 0.0 && dedup_threshold <= 1.0)) {
        fail(ErrorKind::Config, "dedup_threshold must be in (0, 1], got " + text::format_double17(dedup_threshold));
    }
    if (parallelism == 0) fail(ErrorKind::Config, "parallelism must be >= 1");
    for (auto role : kBackendRoles) {
        if (!backends.count(std::string(role))) fail(ErrorKind::Config, "missing " + backend_key(role));
    }
}

std::filesystem::path EngineConfig::resolve(const std::string& path) const {
    std::filesystem::path p(path);
    return p.is_absolute() ? p : base_dir / p;
}

BackendConfig EngineConfig::backend_for(std::string_view role) const {
    auto it = backends.find(std::string(role));
    if (it == backends.end()) fail(ErrorKind::Config, "missing " + backend_key(role));
    BackendConfig b = it->second;
    if (b.kind == BackendKind::Mock && !b.seed) b.seed = seed;
    if (b.kind == BackendKind::Mock && !b.seed) {
        fail(ErrorKind::Config, "mock " + backend_key(role) + " needs a seed (set \"seed\" or pass --seed)");
    }
    return b;
}

bool EngineConfig::operator==(const EngineConfig& o) const {
    return paths == o.paths && retrieval == o.retrieval && chunking.window == o.chunking.window &&
           chunking.overlap == o.chunking.overlap && dedup_threshold == o.dedup_threshold &&
           min_desc_words == o.min_desc_words && planner_sees_description == o.planner_sees_description &&
           parallelism == o.parallelism && seed == o.seed && backends == o.backends;
}

ordered_json to_json(const EngineConfig& c) {
    ordered_json j;
    j["paths"] = {{"graph", c.paths.graph},
                  {"index", c.paths.index},
                  {"cache", c.paths.cache},
                  {"dataset", c.paths.dataset},
                  {"runs", c.paths.runs}};
    j["retrieval"] = to_json(c.retrieval);
    j["chunking"] = {{"window", c.chunking.window}, {"overlap", c.chunking.overlap}};
    j["dedup_threshold"] = c.dedup_threshold;
    j["min_desc_words"] = c.min_desc_words;
    j["planner_sees_description"] = c.planner_sees_description;
    j["parallelism"] = c.parallelism;
    j["seed"] = c.seed ? ordered_json(*c.seed) : ordered_json(nullptr);
    for (auto role : kBackendRoles) {
        auto it = c.backends.find(std::string(role));
        if (it != c.backends.end()) j[backend_key(role)] = to_json(it->second);
    }
    return j;
}

EngineConfig engine_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail(ErrorKind::Config, "config must be a JSON object");
    std::vector<std::string> keys = kTopKeys;
    for (auto role : kBackendRoles) keys.push_back(backend_key(role));
    reject_unknown(j, keys, "config");

    EngineConfig c = EngineConfig::defaults();
    try {
        if (j.contains("paths")) {
            const auto& p = j.at("paths");
            if (!p.is_object()) fail(ErrorKind::Config, "'paths' must be an object");
            reject_unknown(p, kPathKeys, "paths");
            c.paths.graph = p.value("graph", c.paths.graph);
            c.paths.index = p.value("index", c.paths.index);
            c.paths.cache = p.value("cache", c.paths.cache);
            c.paths.dataset = p.value("dataset", c.paths.dataset);
            c.paths.runs = p.value("runs", c.paths.runs);
        }
        if (j.contains("retrieval")) c.retrieval = retrieval_config_from_json(j.at("retrieval"));
        if (j.contains("chunking")) {
            const auto& ch = j.at("chunking");
            if (!ch.is_object()) fail(ErrorKind::Config, "'chunking' must be an object");
            reject_unknown(ch, {"window", "overlap"}, "chunking");
            c.chunking.window = ch.value("window", c.chunking.window);
            c.chunking.overlap = ch.value("overlap", c.chunking.overlap);
        }
        c.dedup_threshold = j.value("dedup_threshold", c.dedup_threshold);
        c.min_desc_words = j.value("min_desc_words", c.min_desc_words);
        c.planner_sees_description = j.value("planner_sees_description", c.planner_sees_description);
        c.parallelism = j.value("parallelism", c.parallelism);
        if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::int64_t>();
        for (auto role : kBackendRoles) {
            auto key = backend_key(role);
            if (j.contains(key)) {
                BackendConfig defaults = c.backends.at(std::string(role));
                nlohmann::json merged = nlohmann::json::parse(to_json(defaults).dump());
                merged.merge_patch(j.at(key));
                c.backends[std::string(role)] = backend_config_from_json(merged);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Config, std::string("invalid config: ") + e.what());
    }
    c.validate();
    return c;
}

EngineConfig load_engine_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Config, "cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Config, "config file " + path.string() + " is not valid JSON: " + e.what());
    }
    EngineConfig c = engine_config_from_json(j);
    c.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    return c;
}

}  // namespace amar
