#include "amar/graph.hpp"

#include "amar/error.hpp"
#include "amar/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>

namespace amar {

namespace {

using ordered_json = nlohmann::ordered_json;

struct TypeLabel {
    NodeType type;
    std::string_view label;
    std::string_view identifier;
    std::string_view slug;
};

constexpr TypeLabel kTypeLabels[] = {
    {NodeType::Artist, "Artist", "Artist", "artist"},
    {NodeType::Theme, "Theme", "Theme", "theme"},
    {NodeType::CultureHistory, "Culture & History", "CultureHistory", "culture_history"},
    {NodeType::ArtStyleTechnique, "Art Style & Technique", "ArtStyleTechnique",
     "art_style_technique"},
    {NodeType::ArtMovementSchool, "Art Movement & School", "ArtMovementSchool",
     "art_movement_school"},
};

const TypeLabel& label_entry(NodeType type) {
    for (const auto& e : kTypeLabels) {
        if (e.type == type) return e;
    }
    fail(ErrorKind::Validation, "invalid node type value");
}

void union_refs(std::vector<SourceRef>& into, const std::vector<SourceRef>& from) {
    into.insert(into.end(), from.begin(), from.end());
    std::sort(into.begin(), into.end());
    into.erase(std::unique(into.begin(), into.end()), into.end());
}

}  // namespace

std::string_view to_label(NodeType type) { return label_entry(type).label; }

std::optional<NodeType> try_parse_node_type(std::string_view label) {
    std::string lowered = text::to_lower_ascii(text::trim(label));
    for (const auto& e : kTypeLabels) {
        if (lowered == text::to_lower_ascii(e.label) ||
            lowered == text::to_lower_ascii(e.identifier)) {
            return e.type;
        }
    }
    return std::nullopt;
}

NodeType parse_node_type(std::string_view label) {
    if (auto t = try_parse_node_type(label)) return *t;
    fail(ErrorKind::Validation, "unknown node type label '" + std::string(label) + "'");
}

std::string make_node_id(std::string_view name, NodeType type) {
    std::u32string norm = text::normalize_name(name);
    std::u32string slug;
    bool in_space = false;
    for (char32_t c : norm) {
        if (text::is_unicode_space(c)) {
            if (!in_space) slug.push_back(U'_');
            in_space = true;
        } else {
            slug.push_back(c);
            in_space = false;
        }
    }
    return std::string(label_entry(type).slug) + ":" + text::encode_utf8(slug);
}

std::size_t edit_distance(std::u32string_view a, std::u32string_view b) {
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t up = row[j];
            std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + cost});
            diag = up;
        }
    }
    return row[b.size()];
}

namespace {

double similarity_normalized(const std::u32string& a, const std::u32string& b) {
    std::size_t longest = std::max(a.size(), b.size());
    if (longest == 0) return 1.0;
    return 1.0 - static_cast<double>(edit_distance(a, b)) / static_cast<double>(longest);
}

}  // namespace

double name_similarity(std::string_view a, std::string_view b) {
    return similarity_normalized(text::normalize_name(a), text::normalize_name(b));
}

std::string merge_descriptions(const std::string& base, const std::string& extra) {
    if (extra.empty()) return base;
    if (base.empty()) return extra;
    std::string_view rest = base;
    const std::string_view sep = kDescriptionSeparator;
    for (;;) {
        auto pos = rest.find(sep);
        if (rest.substr(0, pos) == extra) return base;
        if (pos == std::string_view::npos) break;
        rest.remove_prefix(pos + sep.size());
    }
    return base + std::string(sep) + extra;
}

KnowledgeGraph::EdgeKey KnowledgeGraph::key_for(const std::string& a, const std::string& b) {
    return a < b ? EdgeKey{a, b} : EdgeKey{b, a};
}

std::optional<std::string> KnowledgeGraph::find_by_name(const std::u32string& normalized,
                                                        NodeType type) const {
    auto it = name_index_.find({type, normalized});
    if (it == name_index_.end()) return std::nullopt;
    return it->second;
}

std::string KnowledgeGraph::add_node(KnowledgeNode node) {
    node.name = text::trim(node.name);
    if (node.name.empty()) fail(ErrorKind::Validation, "node name is empty");

    std::u32string norm = text::normalize_name(node.name);
    if (auto existing = find_by_name(norm, node.type)) {
        auto& target = nodes_.find(*existing)->second;
        target.description = merge_descriptions(target.description, node.description);
        union_refs(target.source_refs, node.source_refs);
        return *existing;
    }

    if (node.id.empty()) {
        std::string base = make_node_id(node.name, node.type);
        node.id = base;
        for (int suffix = 2; nodes_.count(node.id) != 0; ++suffix) {
            node.id = base + "#" + std::to_string(suffix);
        }
    } else if (nodes_.count(node.id) != 0) {
        fail(ErrorKind::Validation, "duplicate node id '" + node.id + "'");
    }

    std::sort(node.source_refs.begin(), node.source_refs.end());
    node.source_refs.erase(std::unique(node.source_refs.begin(), node.source_refs.end()),
                           node.source_refs.end());
    std::string id = node.id;
    name_index_.emplace(std::make_pair(node.type, std::move(norm)), id);
    adjacency_.try_emplace(id);
    nodes_.emplace(id, std::move(node));
    return id;
}

void KnowledgeGraph::add_edge(KnowledgeEdge edge) {
    if (edge.source_id == edge.target_id) {
        fail(ErrorKind::Validation, "self-loop on node '" + edge.source_id + "'");
    }
    for (const auto* id : {&edge.source_id, &edge.target_id}) {
        if (!contains(*id)) fail(ErrorKind::Validation, "edge endpoint '" + *id + "' does not exist");
    }
    auto key = key_for(edge.source_id, edge.target_id);
    auto it = edges_.find(key);
    if (it != edges_.end()) {
        it->second.description = merge_descriptions(it->second.description, edge.description);
        return;
    }
    adjacency_[edge.source_id].insert(edge.target_id);
    adjacency_[edge.target_id].insert(edge.source_id);
    edges_.emplace(std::move(key), std::move(edge));
}

void KnowledgeGraph::absorb(const std::string& survivor, const std::string& absorbed) {
    auto& keep = nodes_.find(survivor)->second;
    auto gone_it = nodes_.find(absorbed);
    keep.description = merge_descriptions(keep.description, gone_it->second.description);
    union_refs(keep.source_refs, gone_it->second.source_refs);

    std::set<std::string> old_neighbors = adjacency_[absorbed];
    std::vector<KnowledgeEdge> repointed;
    for (const auto& n : old_neighbors) {
        auto key = key_for(absorbed, n);
        KnowledgeEdge e = edges_.at(key);
        edges_.erase(key);
        adjacency_[n].erase(absorbed);
        if (n == survivor) continue;
        if (e.source_id == absorbed) e.source_id = survivor;
        if (e.target_id == absorbed) e.target_id = survivor;
        repointed.push_back(std::move(e));
    }
    adjacency_.erase(absorbed);

    for (auto& [k, id] : name_index_) {
        if (id == absorbed) id = survivor;
    }
    nodes_.erase(gone_it);
    for (auto& e : repointed) add_edge(std::move(e));
}

MergeReport KnowledgeGraph::merge_duplicates(double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        fail(ErrorKind::Validation, "merge threshold must be in (0, 1]");
    }
    MergeReport report;
    for (;;) {
        std::size_t merged_this_pass = 0;
        for (NodeType type : kAllNodeTypes) {
            std::vector<std::string> ids;
            std::vector<std::u32string> names;
            for (const auto& [id, n] : nodes_) {
                if (n.type == type) {
                    ids.push_back(id);
                    names.push_back(text::normalize_name(n.name));
                }
            }
            std::vector<bool> removed(ids.size(), false);
            for (std::size_t i = 0; i < ids.size(); ++i) {
                if (removed[i]) continue;
                for (std::size_t j = i + 1; j < ids.size(); ++j) {
                    if (removed[j]) continue;
                    std::size_t lo = std::min(names[i].size(), names[j].size());
                    std::size_t hi = std::max(names[i].size(), names[j].size());
                    // Similarity can never exceed lo / hi.
                    if (hi > 0 && static_cast<double>(lo) / static_cast<double>(hi) < threshold) {
                        continue;
                    }
                    if (similarity_normalized(names[i], names[j]) < threshold) continue;

                    const auto& a = nodes_.at(ids[i]);
                    const auto& b = nodes_.at(ids[j]);
                    bool keep_i = a.description.size() != b.description.size()
                                      ? a.description.size() > b.description.size()
                                      : ids[i] < ids[j];
                    std::size_t s = keep_i ? i : j;
                    std::size_t g = keep_i ? j : i;
                    absorb(ids[s], ids[g]);
                    removed[g] = true;
                    report.merged_pairs.emplace_back(ids[s], ids[g]);
                    ++merged_this_pass;
                    if (g == i) break;
                }
            }
        }
        if (merged_this_pass == 0) break;
    }
    for (const auto& [survivor, absorbed] : report.merged_pairs) {
        if (nodes_.count(survivor)) report.survivor_ids.insert(survivor);
    }
    return report;
}

bool KnowledgeGraph::contains(std::string_view id) const { return nodes_.find(id) != nodes_.end(); }

const KnowledgeNode& KnowledgeGraph::node(std::string_view id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) fail(ErrorKind::Validation, "unknown node '" + std::string(id) + "'");
    return it->second;
}

const std::set<std::string>& KnowledgeGraph::neighbors(std::string_view id) const {
    auto it = adjacency_.find(id);
    if (it == adjacency_.end()) fail(ErrorKind::Validation, "unknown node '" + std::string(id) + "'");
    return it->second;
}

std::size_t KnowledgeGraph::degree(std::string_view id) const { return neighbors(id).size(); }

double KnowledgeGraph::degree_centrality(std::string_view id) const {
    std::size_t d = degree(id);
    if (nodes_.size() < 2) {
        fail(ErrorKind::Validation, "degree centrality is undefined on a graph with fewer than 2 nodes");
    }
    return static_cast<double>(d) / static_cast<double>(nodes_.size() - 1);
}

double KnowledgeGraph::structural_score(std::string_view id, StructuralMeasure measure) const {
    if (measure == StructuralMeasure::Degree) return static_cast<double>(degree(id));
    return degree_centrality(id);
}

KnowledgeGraph KnowledgeGraph::neighborhood(const std::vector<std::string>& seed_ids,
                                            std::size_t hops) const {
    std::map<std::string, std::size_t> dist;
    std::deque<std::string> frontier;
    for (const auto& s : seed_ids) {
        if (!contains(s)) fail(ErrorKind::Validation, "unknown seed node '" + s + "'");
        if (dist.emplace(s, 0).second) frontier.push_back(s);
    }
    while (!frontier.empty()) {
        std::string cur = std::move(frontier.front());
        frontier.pop_front();
        std::size_t d = dist[cur];
        if (d == hops) continue;
        for (const auto& n : adjacency_.find(cur)->second) {
            if (dist.emplace(n, d + 1).second) frontier.push_back(n);
        }
    }

    KnowledgeGraph sub;
    for (const auto& [id, _] : dist) {
        const auto& n = nodes_.find(id)->second;
        sub.nodes_.emplace(id, n);
        sub.adjacency_.try_emplace(id);
        sub.name_index_.emplace(std::make_pair(n.type, text::normalize_name(n.name)), id);
    }
    for (const auto& [key, e] : edges_) {
        if (dist.count(key.first) && dist.count(key.second)) {
            sub.edges_.emplace(key, e);
            sub.adjacency_[key.first].insert(key.second);
            sub.adjacency_[key.second].insert(key.first);
        }
    }
    return sub;
}

void KnowledgeGraph::rebuild_adjacency() {
    adjacency_.clear();
    for (const auto& [id, _] : nodes_) adjacency_.try_emplace(id);
    for (const auto& [key, _] : edges_) {
        adjacency_[key.first].insert(key.second);
        adjacency_[key.second].insert(key.first);
    }
}

bool KnowledgeGraph::adjacency_consistent() const {
    KnowledgeGraph copy = *this;
    copy.rebuild_adjacency();
    return copy.adjacency_ == adjacency_;
}

bool KnowledgeGraph::same_content(const KnowledgeGraph& other) const {
    return nodes_ == other.nodes_ && edges_ == other.edges_;
}

std::string serialize_graph(const KnowledgeGraph& graph) {
    std::string out;
    for (const auto& [id, n] : graph.nodes()) {
        ordered_json line;
        line["kind"] = "node";
        line["id"] = n.id;
        line["name"] = n.name;
        line["type"] = to_label(n.type);
        line["description"] = n.description;
        auto refs = ordered_json::array();
        for (const auto& r : n.source_refs) refs.push_back(ordered_json::array({r.doc_id, r.chunk_index}));
        line["source_refs"] = std::move(refs);
        out += line.dump();
        out += '\n';
    }
    for (const auto& [key, e] : graph.edges()) {
        ordered_json line;
        line["kind"] = "edge";
        line["source"] = e.source_id;
        line["target"] = e.target_id;
        line["description"] = e.description;
        out += line.dump();
        out += '\n';
    }
    return out;
}

void save_graph(const KnowledgeGraph& graph, const std::filesystem::path& path) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open graph file for writing: " + path.string());
    out << serialize_graph(graph);
    if (!out) fail(ErrorKind::Io, "failed writing graph file: " + path.string());
}

KnowledgeGraph parse_graph(std::string_view contents) {
    KnowledgeGraph graph;
    std::istringstream in{std::string(contents)};
    std::string line;
    std::size_t line_no = 0;
    auto bad = [&](const std::string& why) -> void {
        fail(ErrorKind::Io, "graph file line " + std::to_string(line_no) + ": " + why);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            const std::string kind = j.at("kind").get<std::string>();
            if (kind == "node") {
                KnowledgeNode n;
                n.id = j.at("id").get<std::string>();
                n.name = j.at("name").get<std::string>();
                n.type = parse_node_type(j.at("type").get<std::string>());
                n.description = j.value("description", std::string{});
                for (const auto& r : j.value("source_refs", nlohmann::json::array())) {
                    n.source_refs.push_back({r.at(0).get<std::string>(), r.at(1).get<std::size_t>()});
                }
                if (n.id.empty()) bad("node id is empty");
                if (graph.contains(n.id)) bad("duplicate node id '" + n.id + "'");
                if (graph.add_node(n) != n.id) bad("node '" + n.id + "' duplicates an earlier name/type");
            } else if (kind == "edge") {
                graph.add_edge({j.at("source").get<std::string>(), j.at("target").get<std::string>(),
                                j.value("description", std::string{})});
            } else {
                bad("unknown kind '" + kind + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            bad(e.what());
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Io) throw;
            bad(e.what());
        }
    }
    return graph;
}

KnowledgeGraph load_graph(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open graph file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_graph(buf.str());
}

}  // namespace amar
