#include "amar/retrieval.hpp"

#include "amar/error.hpp"
#include "amar/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace amar {

namespace {

using ordered_json = nlohmann::ordered_json;

}  // namespace

void RetrievalConfig::validate() const {
    if (k_coarse == 0) fail(ErrorKind::Config, "k_coarse must be >= 1");
    if (m_fine == 0 || m_fine > k_coarse) fail(ErrorKind::Config, "m_fine must be in [1, k_coarse]");
    if (!(lambda >= 0.0 && lambda <= 1.0)) fail(ErrorKind::Config, "lambda must be in [0, 1]");
}

ordered_json to_json(const RetrievalConfig& c) {
    ordered_json j;
    j["k_coarse"] = c.k_coarse;
    j["m_fine"] = c.m_fine;
    j["lambda"] = c.lambda;
    j["expansion_hops"] = c.expansion_hops;
    j["scorer"] = c.scorer == ScorerKind::Embedding ? "embedding" : "remote";
    j["structural"] = c.structural == StructuralMeasure::DegreeCentrality ? "degree_centrality" : "degree";
    return j;
}

RetrievalConfig retrieval_config_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> kKeys = {"k_coarse", "m_fine", "lambda", "expansion_hops", "scorer", "structural"};
    if (!j.is_object()) fail(ErrorKind::Config, "retrieval config must be an object");
    for (const auto& [key, _] : j.items()) {
        if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
            fail(ErrorKind::Config, "unknown retrieval config key '" + key + "'");
        }
    }
    RetrievalConfig c;
    try {
        c.k_coarse = j.value("k_coarse", c.k_coarse);
        c.m_fine = j.value("m_fine", c.m_fine);
        c.lambda = j.value("lambda", c.lambda);
        c.expansion_hops = j.value("expansion_hops", c.expansion_hops);
        std::string scorer = j.value("scorer", std::string("embedding"));
        if (scorer == "embedding") {
            c.scorer = ScorerKind::Embedding;
        } else if (scorer == "remote") {
            c.scorer = ScorerKind::Remote;
        } else {
            fail(ErrorKind::Config, "scorer must be 'embedding' or 'remote'");
        }
        std::string structural = j.value("structural", std::string("degree_centrality"));
        if (structural == "degree_centrality") {
            c.structural = StructuralMeasure::DegreeCentrality;
        } else if (structural == "degree") {
            c.structural = StructuralMeasure::Degree;
        } else {
            fail(ErrorKind::Config, "structural must be 'degree_centrality' or 'degree'");
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Config, std::string("invalid retrieval config: ") + e.what());
    }
    c.validate();
    return c;
}

ordered_json to_json(const ScoredCandidate& c) {
    ordered_json j;
    j["unit_id"] = c.unit_id;
    j["s_sem_raw"] = c.s_sem_raw;
    j["s_str_raw"] = c.s_str_raw;
    j["s_sem_norm"] = c.s_sem_norm;
    j["s_str_norm"] = c.s_str_norm;
    j["fused"] = c.fused;
    return j;
}

ScoredCandidate scored_candidate_from_json(const nlohmann::json& j) {
    return {j.at("unit_id").get<std::string>(), j.at("s_sem_raw").get<double>(), j.at("s_str_raw").get<double>(),
            j.at("s_sem_norm").get<double>(),   j.at("s_str_norm").get<double>(), j.at("fused").get<double>()};
}

std::vector<RankedUnit> coarse_retrieve(const RetrievalIntent& intent, const VectorIndex& index,
                                        ModelBackend& embedder, std::size_t k) {
    if (index.empty()) fail(ErrorKind::Validation, "coarse retrieval over an empty index");
    Embedding query = embedder.embed(intent.text);
    return index.top_k(query, k);
}

SemanticScore EmbeddingScorer::score(const ArtworkRecord&, const RetrievalIntent& intent,
                                     const std::string& candidate_text) {
    Embedding query;
    {
        std::lock_guard lock(mutex_);
        auto it = intent_cache_.find(intent.text);
        if (it != intent_cache_.end()) query = it->second;
    }
    if (query.empty()) {
        query = embedder_.embed(intent.text);
        std::lock_guard lock(mutex_);
        intent_cache_.emplace(intent.text, query);
    }
    return {cosine(embedder_.embed(candidate_text), query), std::nullopt};
}

ModelRequest ModelScorer::build_request(const ArtworkRecord& artwork, const RetrievalIntent& intent,
                                        const std::string& candidate_text) const {
    std::string prompt =
        "Rate how relevant the candidate knowledge unit is to the retrieval intent" +
        std::string(multimodal_ ? " and the attached artwork image" : "") +
        ".\n\nRetrieval intent: " + intent.text + "\n\nCandidate: " + candidate_text +
        "\n\nReply with only a number between 0 and 1.";
    ModelRequest request{Purpose::Score, {RequestPart::text(std::move(prompt))}};
    if (multimodal_ && !artwork.image_ref.empty()) request.parts.push_back(RequestPart::image(artwork.image_ref));
    return request;
}

double parse_relevance_score(std::string_view raw) {
    std::string s = text::trim(raw);
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
        fail(ErrorKind::Validation, "relevance score is not a number: '" + s + "'");
    }
    return v;
}

SemanticScore ModelScorer::score(const ArtworkRecord& artwork, const RetrievalIntent& intent,
                                 const std::string& candidate_text) {
    ModelRequest request = build_request(artwork, intent, candidate_text);
    std::string last_error;
    for (int attempt = 0; attempt <= 2; ++attempt) {
        ModelRequest r = request;
        if (attempt > 0) r.parts.push_back(RequestPart::text("Reply with only the number."));
        try {
            return {parse_relevance_score(backend_.complete(r)), request};
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Validation) throw;
            last_error = e.what();
        }
    }
    fail(ErrorKind::Validation, "scorer output unparseable after 3 attempts: " + last_error);
}

double structural_score(std::string_view unit_id, const KnowledgeGraph& graph, StructuralMeasure measure) {
    return graph.structural_score(unit_id, measure);
}

std::vector<double> softmax_normalize(std::span<const double> scores) {
    if (scores.empty()) fail(ErrorKind::Validation, "softmax of an empty list");
    double max = scores.front();
    for (double s : scores) {
        if (!std::isfinite(s)) fail(ErrorKind::Validation, "softmax input is not finite");
        max = std::max(max, s);
    }
    std::vector<double> out(scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] - max);
        total += out[i];
    }
    for (auto& p : out) p /= total;
    return out;
}

double fuse(double s_sem_norm, double s_str_norm, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) fail(ErrorKind::Validation, "lambda must be in [0, 1]");
    return lambda * s_sem_norm + (1.0 - lambda) * s_str_norm;
}

RerankOutcome rerank(const std::vector<RankedUnit>& candidates, const ArtworkRecord& artwork,
                     const RetrievalIntent& intent, const KnowledgeGraph& graph, SemanticScorer& scorer,
                     const RetrievalConfig& config) {
    config.validate();
    if (candidates.empty()) fail(ErrorKind::Validation, "rerank needs at least one candidate");

    RerankOutcome out;
    std::vector<double> sem;
    std::vector<double> str;
    for (const auto& c : candidates) {
        auto s = scorer.score(artwork, intent, render_node_text(graph.node(c.unit_id)));
        sem.push_back(s.value);
        if (s.request) out.scoring_requests.push_back(std::move(*s.request));
        str.push_back(structural_score(c.unit_id, graph, config.structural));
    }
    auto sem_norm = softmax_normalize(sem);
    auto str_norm = softmax_normalize(str);

    std::vector<ScoredCandidate> scored;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        scored.push_back({candidates[i].unit_id, sem[i], str[i], sem_norm[i], str_norm[i],
                          fuse(sem_norm[i], str_norm[i], config.lambda)});
    }
    std::stable_sort(scored.begin(), scored.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
        return a.fused != b.fused ? a.fused > b.fused : a.unit_id < b.unit_id;
    });
    out.all_scored = scored;
    if (scored.size() > config.m_fine) scored.resize(config.m_fine);
    out.ranked = std::move(scored);
    return out;
}

ordered_json to_json(const RetrievedContext& c) {
    ordered_json cands = ordered_json::array();
    for (const auto& x : c.candidates) cands.push_back(to_json(x));
    ordered_json nodes = ordered_json::array();
    for (const auto& [id, n] : c.subgraph.nodes()) {
        nodes.push_back({{"id", n.id}, {"name", n.name}, {"type", to_label(n.type)}, {"description", n.description}});
    }
    ordered_json edges = ordered_json::array();
    for (const auto& [key, e] : c.subgraph.edges()) {
        edges.push_back({{"source", e.source_id}, {"target", e.target_id}, {"description", e.description}});
    }
    ordered_json j;
    j["candidates"] = std::move(cands);
    j["subgraph"] = {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
    j["rendered_text"] = c.rendered_text;
    return j;
}

RetrievedContext retrieved_context_from_json(const nlohmann::json& j) {
    RetrievedContext c;
    for (const auto& x : j.at("candidates")) c.candidates.push_back(scored_candidate_from_json(x));
    for (const auto& n : j.at("subgraph").at("nodes")) {
        c.subgraph.add_node({n.at("id").get<std::string>(), n.at("name").get<std::string>(),
                             parse_node_type(n.at("type").get<std::string>()), n.at("description").get<std::string>(),
                             {}});
    }
    for (const auto& e : j.at("subgraph").at("edges")) {
        c.subgraph.add_edge({e.at("source").get<std::string>(), e.at("target").get<std::string>(),
                             e.at("description").get<std::string>()});
    }
    c.rendered_text = j.at("rendered_text").get<std::string>();
    return c;
}

RetrievedContext assemble_context(const std::vector<ScoredCandidate>& final_candidates, const KnowledgeGraph& graph,
                                  std::size_t expansion_hops) {
    std::vector<std::string> seeds;
    for (const auto& c : final_candidates) seeds.push_back(c.unit_id);
    RetrievedContext ctx{final_candidates, graph.neighborhood(seeds, expansion_hops), {}};

    std::string rendered;
    for (const auto& c : final_candidates) {
        rendered += render_node_text(graph.node(c.unit_id)) + " [s=" + text::format_fixed(c.fused, 4) + "]\n";
    }
    for (const auto& [key, e] : ctx.subgraph.edges()) {
        rendered += ctx.subgraph.node(e.source_id).name + " —(" + e.description + ")→ " +
                    ctx.subgraph.node(e.target_id).name + "\n";
    }
    ctx.rendered_text = std::move(rendered);
    return ctx;
}

}  // namespace amar
