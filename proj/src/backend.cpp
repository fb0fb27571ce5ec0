#include "amar/backend.hpp"

#include "amar/error.hpp"
#include "amar/text.hpp"

#include <algorithm>
#include <sstream>

namespace amar {

namespace {

constexpr std::pair<Purpose, std::string_view> kPurposeNames[] = {
    {Purpose::Plan, "plan"},       {Purpose::Extract, "extract"}, {Purpose::Generate, "generate"},
    {Purpose::Score, "score"},     {Purpose::Judge, "judge"},     {Purpose::Embed, "embed"},
    {Purpose::Construct, "construct"},
};

}  // namespace

std::string_view to_string(Purpose p) {
    for (const auto& [value, name] : kPurposeNames) {
        if (value == p) return name;
    }
    return "unknown";
}

Purpose parse_purpose(std::string_view s) {
    for (const auto& [value, name] : kPurposeNames) {
        if (name == s) return value;
    }
    fail(ErrorKind::Validation, "unknown request purpose '" + std::string(s) + "'");
}

bool ModelRequest::has_image() const {
    for (const auto& p : parts) {
        if (p.kind == RequestPart::Kind::Image) return true;
    }
    return false;
}

std::string ModelRequest::joined_text() const {
    std::vector<std::string> texts;
    for (const auto& p : parts) {
        if (p.kind == RequestPart::Kind::Text) texts.push_back(p.data);
    }
    return text::join(texts, "\n\n");
}

void validate_request(const ModelRequest& request) {
    if (request.parts.empty()) fail(ErrorKind::Validation, "model request has no parts");
    if (request.purpose == Purpose::Embed) {
        if (request.parts.size() != 1 || request.parts[0].kind != RequestPart::Kind::Text) {
            fail(ErrorKind::Validation, "embed requests take exactly one text part");
        }
        if (text::trim(request.parts[0].data).empty()) {
            fail(ErrorKind::Validation, "cannot embed empty text");
        }
    }
}

nlohmann::json request_to_json(const ModelRequest& request) {
    nlohmann::json parts = nlohmann::json::array();
    for (const auto& p : request.parts) {
        parts.push_back({{"type", p.kind == RequestPart::Kind::Text ? "text" : "image"}, {"data", p.data}});
    }
    return {{"purpose", to_string(request.purpose)}, {"parts", std::move(parts)}};
}

ModelRequest request_from_json(const nlohmann::json& j) {
    ModelRequest r;
    r.purpose = parse_purpose(j.at("purpose").get<std::string>());
    for (const auto& p : j.at("parts")) {
        std::string type = p.at("type").get<std::string>();
        if (type != "text" && type != "image") fail(ErrorKind::Validation, "unknown request part type '" + type + "'");
        r.parts.push_back({type == "text" ? RequestPart::Kind::Text : RequestPart::Kind::Image,
                           p.at("data").get<std::string>()});
    }
    return r;
}

std::string canonical_json(const ModelRequest& request) {
    // nlohmann::json sorts object keys, so the dump is stable.
    return request_to_json(request).dump();
}

std::string request_key(const ModelRequest& request) { return text::sha256_hex(canonical_json(request)); }

std::optional<std::string> find_marked_line(std::string_view prompt, std::string_view marker) {
    std::size_t pos = 0;
    while (pos <= prompt.size()) {
        auto end = prompt.find('\n', pos);
        std::string_view line = prompt.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
        std::string trimmed = text::trim(line);
        if (trimmed.rfind(marker, 0) == 0) return text::trim(std::string_view(trimmed).substr(marker.size()));
        if (end == std::string_view::npos) break;
        pos = end + 1;
    }
    return std::nullopt;
}

void BackendConfig::validate() const {
    if (kind == BackendKind::Remote) {
        if (endpoint.empty()) fail(ErrorKind::Config, "remote backend requires an endpoint");
        if (model_id.empty()) fail(ErrorKind::Config, "remote backend requires a model_id");
    } else {
        if (!seed) fail(ErrorKind::Config, "mock backend '" + model_id + "' requires a seed");
        if (embedding_dim == 0) fail(ErrorKind::Config, "mock embedding_dim must be positive");
    }
    if (max_concurrency == 0) fail(ErrorKind::Config, "max_concurrency must be >= 1");
    if (!(timeout_seconds > 0)) fail(ErrorKind::Config, "timeout must be positive");
}

nlohmann::ordered_json to_json(const BackendConfig& c) {
    nlohmann::ordered_json j;
    j["kind"] = c.kind == BackendKind::Mock ? "mock" : "remote";
    j["endpoint"] = c.endpoint;
    j["model_id"] = c.model_id;
    j["api_key_env"] = c.api_key_env;
    j["max_concurrency"] = c.max_concurrency;
    j["timeout"] = c.timeout_seconds;
    j["seed"] = c.seed ? nlohmann::ordered_json(*c.seed) : nlohmann::ordered_json(nullptr);
    j["embedding_dim"] = c.embedding_dim;
    j["retry_backoff"] = c.retry_backoff_seconds;
    return j;
}

BackendConfig backend_config_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> kKeys = {"kind",  "endpoint", "model_id",      "api_key_env",
                                                   "max_concurrency", "timeout", "seed", "embedding_dim",
                                                   "retry_backoff"};
    if (!j.is_object()) fail(ErrorKind::Config, "backend config must be an object");
    for (const auto& [key, _] : j.items()) {
        if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
            fail(ErrorKind::Config, "unknown backend config key '" + key + "'");
        }
    }
    BackendConfig c;
    try {
        std::string kind = j.value("kind", std::string("mock"));
        if (kind == "mock") {
            c.kind = BackendKind::Mock;
        } else if (kind == "remote") {
            c.kind = BackendKind::Remote;
        } else {
            fail(ErrorKind::Config, "backend kind must be 'mock' or 'remote', got '" + kind + "'");
        }
        c.endpoint = j.value("endpoint", c.endpoint);
        c.model_id = j.value("model_id", c.model_id);
        c.api_key_env = j.value("api_key_env", c.api_key_env);
        c.max_concurrency = j.value("max_concurrency", c.max_concurrency);
        c.timeout_seconds = j.value("timeout", c.timeout_seconds);
        if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::int64_t>();
        c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
        c.retry_backoff_seconds = j.value("retry_backoff", c.retry_backoff_seconds);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Config, std::string("invalid backend config: ") + e.what());
    }
    return c;
}

std::shared_ptr<ModelBackend> make_backend(const BackendConfig& config,
                                           const std::optional<std::filesystem::path>& cache_path) {
    config.validate();
    std::shared_ptr<ModelBackend> backend;
    if (config.kind == BackendKind::Mock) {
        backend = std::make_shared<MockBackend>(*config.seed, config.model_id, config.embedding_dim);
    } else {
        backend = std::make_shared<RemoteBackend>(config);
    }
    if (cache_path) backend = std::make_shared<CachedBackend>(std::move(backend), *cache_path);
    return backend;
}

}  // namespace amar
