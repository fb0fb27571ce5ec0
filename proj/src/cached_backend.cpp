#include "amar/backend.hpp"

#include "amar/error.hpp"
#include "amar/text.hpp"

#include <spdlog/spdlog.h>

#include <fstream>

namespace amar {

namespace {

std::string serialize_embedding(const Embedding& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += text::format_double17(v[i]);
    }
    return out + "]";
}

}  // namespace

CachedBackend::CachedBackend(std::shared_ptr<ModelBackend> inner, std::filesystem::path cache_path)
    : inner_(std::move(inner)), path_(std::move(cache_path)) {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return;  // no cache yet
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            entries_.insert_or_assign(j.at("key").get<std::string>(), j.at("response").get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            std::string msg = "cache " + path_.string() + " line " + std::to_string(line_no) +
                              " is corrupt and was skipped: " + e.what();
            spdlog::warn("{}", msg);
            warnings_.push_back(std::move(msg));
        }
    }
}

std::optional<std::string> CachedBackend::lookup(const std::string& key) {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        ++misses_;
        return std::nullopt;
    }
    ++hits_;
    return it->second;
}

void CachedBackend::store(const std::string& key, const std::string& response) {
    std::lock_guard lock(mutex_);
    if (!entries_.emplace(key, response).second) return;
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) fail(ErrorKind::Io, "cannot append to cache " + path_.string());
    out << nlohmann::json{{"key", key}, {"response", response}}.dump() << '\n';
}

std::string CachedBackend::complete(const ModelRequest& request) {
    auto key = request_key(request);
    if (auto hit = lookup(key)) return *hit;
    std::string response = inner_->complete(request);
    store(key, response);
    return response;
}

Embedding CachedBackend::embed(std::string_view input) {
    auto key = request_key({Purpose::Embed, {RequestPart::text(std::string(input))}});
    if (auto hit = lookup(key)) {
        Embedding v;
        for (const auto& x : nlohmann::json::parse(*hit)) v.push_back(x.get<double>());
        return v;
    }
    Embedding v = inner_->embed(input);
    store(key, serialize_embedding(v));
    return v;
}

std::size_t CachedBackend::hits() const {
    std::lock_guard lock(mutex_);
    return hits_;
}

std::size_t CachedBackend::misses() const {
    std::lock_guard lock(mutex_);
    return misses_;
}

}  // namespace amar
