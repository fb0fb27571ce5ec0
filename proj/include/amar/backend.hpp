#pragma once

// Model access. Every model call in the engine goes through ModelBackend:
// text / multimodal completion and text embedding. Three implementations:
//   MockBackend    deterministic templates keyed by (purpose, request, seed)
//   RemoteBackend  HTTP POST with a generic chat-style JSON body
//   CachedBackend  append-only JSON Lines response cache around another backend

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace amar {

using Embedding = std::vector<double>;

enum class Purpose { Plan, Extract, Generate, Score, Judge, Embed, Construct };

std::string_view to_string(Purpose p);
Purpose parse_purpose(std::string_view s);

struct RequestPart {
    enum class Kind { Text, Image };
    Kind kind = Kind::Text;
    std::string data;  // text, or an image path / URL

    static RequestPart text(std::string s) { return {Kind::Text, std::move(s)}; }
    static RequestPart image(std::string ref) { return {Kind::Image, std::move(ref)}; }
    bool operator==(const RequestPart&) const = default;
};

struct ModelRequest {
    Purpose purpose = Purpose::Generate;
    std::vector<RequestPart> parts;

    bool has_image() const;
    /// Concatenation of all text parts, separated by blank lines.
    std::string joined_text() const;
    bool operator==(const ModelRequest&) const = default;
};

/// Throws Error(Validation) unless the request has >= 1 part and embed
/// requests carry exactly one text part.
void validate_request(const ModelRequest& request);

/// Compact JSON with fixed key order. Part text is kept verbatim.
std::string canonical_json(const ModelRequest& request);
nlohmann::json request_to_json(const ModelRequest& request);
ModelRequest request_from_json(const nlohmann::json& j);

/// SHA-256 of canonical_json.
std::string request_key(const ModelRequest& request);

class ModelBackend {
public:
    virtual ~ModelBackend() = default;

    virtual std::string complete(const ModelRequest& request) = 0;
    virtual Embedding embed(std::string_view text) = 0;

    virtual const std::string& model_id() const = 0;
    /// "mock" or "remote".
    virtual std::string_view kind() const = 0;
};

enum class BackendKind { Mock, Remote };

struct BackendConfig {
    BackendKind kind = BackendKind::Mock;
    std::string endpoint;
    std::string model_id = "mock-model";
    std::string api_key_env = "AMAR_API_KEY";
    std::size_t max_concurrency = 4;
    double timeout_seconds = 60.0;
    std::optional<std::int64_t> seed;
    std::size_t embedding_dim = 64;  // mock only
    double retry_backoff_seconds = 0.5;  // remote only, doubled per attempt

    void validate() const;
    bool operator==(const BackendConfig&) const = default;
};

nlohmann::ordered_json to_json(const BackendConfig& config);
BackendConfig backend_config_from_json(const nlohmann::json& j);

class MockBackend final : public ModelBackend {
public:
    explicit MockBackend(std::int64_t seed, std::string model_id = "mock-model",
                         std::size_t embedding_dim = 64);

    std::string complete(const ModelRequest& request) override;
    Embedding embed(std::string_view text) override;
    const std::string& model_id() const override { return model_id_; }
    std::string_view kind() const override { return "mock"; }

    std::int64_t seed() const noexcept { return seed_; }

private:
    std::uint64_t digest(const ModelRequest& request) const;

    std::int64_t seed_;
    std::string model_id_;
    std::size_t embedding_dim_;
};

class RemoteBackend final : public ModelBackend {
public:
    explicit RemoteBackend(BackendConfig config);
    ~RemoteBackend() override;

    std::string complete(const ModelRequest& request) override;
    Embedding embed(std::string_view text) override;
    const std::string& model_id() const override { return config_.model_id; }
    std::string_view kind() const override { return "remote"; }

    /// The JSON body sent for a request (image parts resolved to base64).
    nlohmann::ordered_json wire_body(const ModelRequest& request) const;

private:
    nlohmann::json post(const nlohmann::ordered_json& body);

    BackendConfig config_;
    struct Limiter;
    std::unique_ptr<Limiter> limiter_;
};

class CachedBackend final : public ModelBackend {
public:
    CachedBackend(std::shared_ptr<ModelBackend> inner, std::filesystem::path cache_path);

    std::string complete(const ModelRequest& request) override;
    Embedding embed(std::string_view text) override;
    const std::string& model_id() const override { return inner_->model_id(); }
    std::string_view kind() const override { return inner_->kind(); }

    std::size_t hits() const;
    std::size_t misses() const;
    /// One entry per corrupt cache line skipped at load time.
    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    std::optional<std::string> lookup(const std::string& key);
    void store(const std::string& key, const std::string& response);

    std::shared_ptr<ModelBackend> inner_;
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, std::string> entries_;
    std::vector<std::string> warnings_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

/// Builds the backend described by `config`, wrapped in a response cache when
/// `cache_path` is set. A mock config without a seed is rejected.
std::shared_ptr<ModelBackend> make_backend(const BackendConfig& config,
                                           const std::optional<std::filesystem::path>& cache_path = {});

// Line markers shared by prompt builders and the mock backend, which reads
// them back to produce schema-conforming output.
namespace prompt_marker {
inline constexpr std::string_view kGroundingSequence = "Required grounding sequence:";
inline constexpr std::string_view kStepRange = "Number of steps:";
inline constexpr std::string_view kJudgeDimensions = "Dimensions to score:";
inline constexpr std::string_view kAllowedTags = "Allowed grounding tags:";
inline constexpr std::string_view kTitle = "Title:";
}  // namespace prompt_marker

/// Returns the rest of the first line starting with `marker`, trimmed.
std::optional<std::string> find_marked_line(std::string_view prompt, std::string_view marker);

}  // namespace amar
