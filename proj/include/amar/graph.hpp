#pragma once

// Art context knowledge graph: typed entity nodes joined by described,
// undirected relations.
//
// The graph is built single-threaded (add_node / add_edge / merge_duplicates)
// and treated as read-only afterwards; const member functions are safe to call
// from any number of threads once construction is done.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace amar {

enum class NodeType {
    Artist,
    Theme,
    CultureHistory,
    ArtStyleTechnique,
    ArtMovementSchool,
};

inline constexpr NodeType kAllNodeTypes[] = {
    NodeType::Artist,         NodeType::Theme,
    NodeType::CultureHistory, NodeType::ArtStyleTechnique,
    NodeType::ArtMovementSchool,
};

/// Serialized label, e.g. "Culture & History".
std::string_view to_label(NodeType type);

/// Accepts the serialized label or the identifier spelling, case-insensitively.
/// Throws Error(Validation) for anything else.
NodeType parse_node_type(std::string_view label);
std::optional<NodeType> try_parse_node_type(std::string_view label);

struct SourceRef {
    std::string doc_id;
    std::size_t chunk_index = 0;

    auto operator<=>(const SourceRef&) const = default;
};

struct KnowledgeNode {
    std::string id;  // assigned by add_node when empty
    std::string name;
    NodeType type = NodeType::Theme;
    std::string description;
    std::vector<SourceRef> source_refs;

    bool operator==(const KnowledgeNode&) const = default;
};

struct KnowledgeEdge {
    std::string source_id;
    std::string target_id;
    std::string description;

    bool operator==(const KnowledgeEdge&) const = default;
};

/// Stable id derived from type and normalized name, e.g. "artist:claude_monet".
std::string make_node_id(std::string_view name, NodeType type);

/// 1 - levenshtein(a', b') / max(|a'|, |b'|) over trimmed, case-folded code
/// points. Two empty strings are identical (1.0).
double name_similarity(std::string_view a, std::string_view b);

/// Plain Levenshtein distance over code points.
std::size_t edit_distance(std::u32string_view a, std::u32string_view b);

struct MergeReport {
    /// (survivor id, absorbed id) in merge order.
    std::vector<std::pair<std::string, std::string>> merged_pairs;
    std::set<std::string> survivor_ids;

    std::size_t merges() const noexcept { return merged_pairs.size(); }
};

enum class StructuralMeasure { DegreeCentrality, Degree };

class KnowledgeGraph {
public:
    using EdgeKey = std::pair<std::string, std::string>;  // (min id, max id)

    /// Inserts the node, or merges it into an existing node with the same
    /// normalized name and type. Returns the id that now holds it.
    std::string add_node(KnowledgeNode node);

    /// Adds an undirected edge; a repeated unordered pair merges descriptions.
    void add_edge(KnowledgeEdge edge);

    MergeReport merge_duplicates(double threshold);

    bool contains(std::string_view id) const;
    const KnowledgeNode& node(std::string_view id) const;
    const std::map<std::string, KnowledgeNode, std::less<>>& nodes() const { return nodes_; }
    const std::map<EdgeKey, KnowledgeEdge>& edges() const { return edges_; }
    const std::set<std::string>& neighbors(std::string_view id) const;

    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t edge_count() const noexcept { return edges_.size(); }
    bool empty() const noexcept { return nodes_.empty(); }

    std::size_t degree(std::string_view id) const;

    /// degree / (|V| - 1). Errors on unknown ids and on graphs with < 2 nodes.
    double degree_centrality(std::string_view id) const;

    double structural_score(std::string_view id, StructuralMeasure measure) const;

    /// Induced subgraph over everything within `hops` edges of a seed.
    KnowledgeGraph neighborhood(const std::vector<std::string>& seed_ids, std::size_t hops) const;

    /// Recomputes adjacency from the edge set.
    void rebuild_adjacency();
    bool adjacency_consistent() const;

    bool same_content(const KnowledgeGraph& other) const;

private:
    static EdgeKey key_for(const std::string& a, const std::string& b);
    std::optional<std::string> find_by_name(const std::u32string& normalized, NodeType type) const;
    void absorb(const std::string& survivor, const std::string& absorbed);

    std::map<std::string, KnowledgeNode, std::less<>> nodes_;
    std::map<EdgeKey, KnowledgeEdge> edges_;
    std::map<std::string, std::set<std::string>, std::less<>> adjacency_;
    // (type, normalized name) -> id, for add_node merging.
    std::map<std::pair<NodeType, std::u32string>, std::string> name_index_;
};

/// Appends `extra` to `base` with a separator unless it is empty or already
/// one of the segments.
std::string merge_descriptions(const std::string& base, const std::string& extra);

inline constexpr std::string_view kDescriptionSeparator = " | ";

/// JSON Lines: node lines first (sorted by id), then edge lines.
void save_graph(const KnowledgeGraph& graph, const std::filesystem::path& path);
std::string serialize_graph(const KnowledgeGraph& graph);
KnowledgeGraph load_graph(const std::filesystem::path& path);
KnowledgeGraph parse_graph(std::string_view contents);

}  // namespace amar
