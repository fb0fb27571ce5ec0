#pragma once

#include "amar/backend.hpp"
#include "amar/graph.hpp"

#include <algorithm>
#include <atomic>
#include <deque>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace amar::testing {

inline std::filesystem::path fixture(const std::string& name) {
    return std::filesystem::path(AMAR_FIXTURES_DIR) / name;
}

class TempDir {
public:
    TempDir() {
        std::random_device rd;
        std::mt19937_64 rng(rd());
        path_ = std::filesystem::temp_directory_path() / ("amar-test-" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& contents) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << contents;
}

inline std::string random_word(std::mt19937_64& rng, std::size_t min_len = 3, std::size_t max_len = 9) {
    static const std::string letters = "abcdefghijklmnopqrstuvwxyz";
    std::uniform_int_distribution<std::size_t> len(min_len, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, letters.size() - 1);
    std::string w(len(rng), 'a');
    for (auto& c : w) c = letters[pick(rng)];
    return w;
}

/// n nodes with random two-word names and types, edges drawn with probability p.
inline KnowledgeGraph random_graph(std::mt19937_64& rng, std::size_t n, double p) {
    KnowledgeGraph g;
    std::vector<std::string> ids;
    std::uniform_int_distribution<int> type_pick(0, 4);
    while (ids.size() < n) {
        KnowledgeNode node;
        node.name = random_word(rng) + " " + random_word(rng);
        node.type = kAllNodeTypes[type_pick(rng)];
        node.description = "about " + random_word(rng) + " and " + random_word(rng);
        std::string id = g.add_node(node);
        if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    }
    std::bernoulli_distribution edge(p);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = i + 1; j < ids.size(); ++j) {
            if (edge(rng)) g.add_edge({ids[i], ids[j], random_word(rng) + " relates"});
        }
    }
    return g;
}

/// Forwards to an inner backend and counts calls.
class CountingBackend final : public ModelBackend {
public:
    explicit CountingBackend(std::shared_ptr<ModelBackend> inner) : inner_(std::move(inner)) {}

    std::string complete(const ModelRequest& request) override {
        ++completes;
        return inner_->complete(request);
    }
    Embedding embed(std::string_view text) override {
        ++embeds;
        return inner_->embed(text);
    }
    const std::string& model_id() const override { return inner_->model_id(); }
    std::string_view kind() const override { return inner_->kind(); }

    std::atomic<int> completes{0};
    std::atomic<int> embeds{0};

private:
    std::shared_ptr<ModelBackend> inner_;
};

/// Replies from a fixed queue; the last reply repeats once the queue runs dry.
class ScriptedBackend final : public ModelBackend {
public:
    explicit ScriptedBackend(std::vector<std::string> replies, std::string model_id = "scripted")
        : replies_(replies.begin(), replies.end()), model_id_(std::move(model_id)) {}

    std::string complete(const ModelRequest& request) override {
        std::lock_guard lock(mutex_);
        requests.push_back(request);
        if (replies_.size() > 1) {
            std::string r = replies_.front();
            replies_.pop_front();
            return r;
        }
        return replies_.empty() ? std::string() : replies_.front();
    }
    Embedding embed(std::string_view text) override { return MockBackend(1, model_id_, 8).embed(text); }
    const std::string& model_id() const override { return model_id_; }
    std::string_view kind() const override { return "mock"; }

    std::vector<ModelRequest> requests;

private:
    std::mutex mutex_;
    std::deque<std::string> replies_;
    std::string model_id_;
};

}  // namespace amar::testing
