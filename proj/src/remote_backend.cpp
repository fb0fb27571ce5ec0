#include "amar/backend.hpp"

#include "amar/error.hpp"
#include "amar/text.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <semaphore>
#include <sstream>
#include <thread>

namespace amar {

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Endpoint split_endpoint(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) fail(ErrorKind::Config, "endpoint must be an http(s) URL: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

bool is_url(std::string_view ref) {
    return ref.rfind("http://", 0) == 0 || ref.rfind("https://", 0) == 0 || ref.rfind("data:", 0) == 0;
}

std::string read_image_base64(const std::string& ref) {
    std::ifstream in(ref, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot read image: " + ref);
    std::stringstream buf;
    buf << in.rdbuf();
    return text::base64_encode(buf.str());
}

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

struct RemoteBackend::Limiter {
    explicit Limiter(std::size_t n) : slots(static_cast<std::ptrdiff_t>(n)) {}
    std::counting_semaphore<4096> slots;
};

RemoteBackend::RemoteBackend(BackendConfig config)
    : config_(std::move(config)), limiter_(std::make_unique<Limiter>(std::min<std::size_t>(config_.max_concurrency, 4096))) {
    config_.validate();
    if (config_.kind != BackendKind::Remote) fail(ErrorKind::Config, "RemoteBackend needs a remote config");
}

RemoteBackend::~RemoteBackend() = default;

nlohmann::ordered_json RemoteBackend::wire_body(const ModelRequest& request) const {
    nlohmann::ordered_json content = nlohmann::ordered_json::array();
    for (const auto& p : request.parts) {
        if (p.kind == RequestPart::Kind::Text) {
            content.push_back({{"type", "text"}, {"data", p.data}});
        } else {
            content.push_back({{"type", "image"}, {"data", is_url(p.data) ? p.data : read_image_base64(p.data)}});
        }
    }
    nlohmann::ordered_json body;
    body["model"] = config_.model_id;
    body["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", std::move(content)}}});
    body["purpose"] = to_string(request.purpose);
    return body;
}

nlohmann::json RemoteBackend::post(const nlohmann::ordered_json& body) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        fail(ErrorKind::Config, "environment variable " + config_.api_key_env + " is not set");
    }
    auto endpoint = split_endpoint(config_.endpoint);

    limiter_->slots.acquire();
    struct Release {
        Limiter& l;
        ~Release() { l.slots.release(); }
    } release{*limiter_};

    httplib::Client client(endpoint.origin);
    auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(config_.timeout_seconds));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};
    const std::string payload = body.dump();

    constexpr int kAttempts = 3;
    std::string last_error;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(
                std::chrono::duration<double>(config_.retry_backoff_seconds * (1 << (attempt - 1))));
        }
        auto res = client.Post(endpoint.path, headers, payload, "application/json");
        if (!res) {
            last_error = "request failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 200 && res->status < 300) {
            try {
                return nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::exception& e) {
                fail(ErrorKind::Backend, std::string("malformed response body: ") + e.what());
            }
        }
        last_error = "HTTP status " + std::to_string(res->status);
        if (!transient_status(res->status)) break;
    }
    fail(ErrorKind::Backend, config_.model_id + ": " + last_error);
}

std::string RemoteBackend::complete(const ModelRequest& request) {
    validate_request(request);
    auto response = post(wire_body(request));
    if (!response.is_object() || !response.contains("text") || !response.at("text").is_string()) {
        fail(ErrorKind::Backend, "response lacks a string 'text' field");
    }
    return response.at("text").get<std::string>();
}

Embedding RemoteBackend::embed(std::string_view input) {
    ModelRequest request{Purpose::Embed, {RequestPart::text(std::string(input))}};
    validate_request(request);
    auto response = post(wire_body(request));
    if (!response.is_object() || !response.contains("embedding") || !response.at("embedding").is_array()) {
        fail(ErrorKind::Backend, "response lacks an 'embedding' array");
    }
    Embedding v;
    for (const auto& x : response.at("embedding")) {
        if (!x.is_number()) fail(ErrorKind::Backend, "embedding contains a non-number");
        v.push_back(x.get<double>());
    }
    if (v.empty()) fail(ErrorKind::Backend, "empty embedding");
    return v;
}

}  // namespace amar
