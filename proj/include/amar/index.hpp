#pragma once

// Exact dense retrieval over graph nodes.

#include "amar/backend.hpp"
#include "amar/graph.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace amar {

/// dot(a,b) / (|a||b|), clamped to [-1, 1]. Errors on zero vectors and on
/// dimension mismatch.
double cosine(std::span<const double> a, std::span<const double> b);

/// "name (type): description"
std::string render_node_text(const KnowledgeNode& node);

struct IndexEntry {
    std::string unit_id;
    std::string text;
    Embedding vector;

    bool operator==(const IndexEntry&) const = default;
};

struct RankedUnit {
    std::string unit_id;
    double score = 0.0;

    bool operator==(const RankedUnit&) const = default;
};

class VectorIndex {
public:
    VectorIndex() = default;
    /// Entries are sorted by unit_id; duplicate ids or mixed dimensions are errors.
    VectorIndex(std::size_t dimension, std::vector<IndexEntry> entries);

    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const std::vector<IndexEntry>& entries() const { return entries_; }
    const IndexEntry* find(std::string_view unit_id) const;

    /// The k best entries by cosine, score descending then unit_id ascending.
    std::vector<RankedUnit> top_k(std::span<const double> query, std::size_t k) const;

    bool operator==(const VectorIndex&) const = default;

private:
    std::size_t dimension_ = 0;
    std::vector<IndexEntry> entries_;
};

/// One embedding per node. Any embedding failure aborts the build.
VectorIndex build_index(const KnowledgeGraph& graph, ModelBackend& embedder, std::size_t parallelism = 1);

std::string serialize_index(const VectorIndex& index);
void save_index(const VectorIndex& index, const std::filesystem::path& path);
VectorIndex parse_index(std::string_view contents);
VectorIndex load_index(const std::filesystem::path& path);

}  // namespace amar
