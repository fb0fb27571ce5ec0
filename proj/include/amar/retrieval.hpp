#pragma once

// Two-stage retrieval conditioned on a retrieval intent:
//   1. coarse: exact top-k by cosine(f(intent), f(node)) over the vector index
//   2. rerank: softmax-normalize the semantic and structural score families
//      separately, fuse s = lambda * sem + (1 - lambda) * str, keep the top m.
// The survivors plus their hop neighborhood form the retrieved context.

#include "amar/backend.hpp"
#include "amar/graph.hpp"
#include "amar/index.hpp"
#include "amar/planner.hpp"

#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace amar {

enum class ScorerKind { Embedding, Remote };

struct RetrievalConfig {
    std::size_t k_coarse = 10;
    std::size_t m_fine = 5;
    double lambda = 0.5;
    std::size_t expansion_hops = 1;
    ScorerKind scorer = ScorerKind::Embedding;
    StructuralMeasure structural = StructuralMeasure::DegreeCentrality;

    void validate() const;
    bool operator==(const RetrievalConfig&) const = default;
};

nlohmann::ordered_json to_json(const RetrievalConfig& c);
RetrievalConfig retrieval_config_from_json(const nlohmann::json& j);

struct ScoredCandidate {
    std::string unit_id;
    double s_sem_raw = 0.0;
    double s_str_raw = 0.0;
    double s_sem_norm = 0.0;
    double s_str_norm = 0.0;
    double fused = 0.0;

    bool operator==(const ScoredCandidate&) const = default;
};

nlohmann::ordered_json to_json(const ScoredCandidate& c);
ScoredCandidate scored_candidate_from_json(const nlohmann::json& j);

/// Embeds intent.text and returns the index's top k.
std::vector<RankedUnit> coarse_retrieve(const RetrievalIntent& intent, const VectorIndex& index,
                                        ModelBackend& embedder, std::size_t k);

struct SemanticScore {
    double value = 0.0;
    std::optional<ModelRequest> request;  // set when a model call was made
};

class SemanticScorer {
public:
    virtual ~SemanticScorer() = default;
    virtual SemanticScore score(const ArtworkRecord& artwork, const RetrievalIntent& intent,
                                const std::string& candidate_text) = 0;
};

/// cosine(embed(candidate_text), embed(intent.text)).
class EmbeddingScorer final : public SemanticScorer {
public:
    explicit EmbeddingScorer(ModelBackend& embedder) : embedder_(embedder) {}
    SemanticScore score(const ArtworkRecord& artwork, const RetrievalIntent& intent,
                        const std::string& candidate_text) override;

private:
    ModelBackend& embedder_;
    std::mutex mutex_;
    std::unordered_map<std::string, Embedding> intent_cache_;
};

/// Asks a (vision-)language model for a relevance score in [0, 1]. In
/// text-only mode the image is left out of the request.
class ModelScorer final : public SemanticScorer {
public:
    ModelScorer(ModelBackend& backend, bool multimodal) : backend_(backend), multimodal_(multimodal) {}
    SemanticScore score(const ArtworkRecord& artwork, const RetrievalIntent& intent,
                        const std::string& candidate_text) override;

    ModelRequest build_request(const ArtworkRecord& artwork, const RetrievalIntent& intent,
                               const std::string& candidate_text) const;

private:
    ModelBackend& backend_;
    bool multimodal_;
};

double parse_relevance_score(std::string_view raw);

double structural_score(std::string_view unit_id, const KnowledgeGraph& graph,
                        StructuralMeasure measure = StructuralMeasure::DegreeCentrality);

/// exp(s_i - max) / sum_j exp(s_j - max).
std::vector<double> softmax_normalize(std::span<const double> scores);

double fuse(double s_sem_norm, double s_str_norm, double lambda);

struct RerankOutcome {
    std::vector<ScoredCandidate> ranked;       // at most m_fine, best first
    std::vector<ScoredCandidate> all_scored;   // every coarse candidate, best first
    std::vector<ModelRequest> scoring_requests;
};

RerankOutcome rerank(const std::vector<RankedUnit>& candidates, const ArtworkRecord& artwork,
                     const RetrievalIntent& intent, const KnowledgeGraph& graph, SemanticScorer& scorer,
                     const RetrievalConfig& config);

struct RetrievedContext {
    std::vector<ScoredCandidate> candidates;
    KnowledgeGraph subgraph;
    std::string rendered_text;
};

nlohmann::ordered_json to_json(const RetrievedContext& c);
RetrievedContext retrieved_context_from_json(const nlohmann::json& j);

/// Subgraph = neighborhood(candidates, hops). Text lists the candidates in rank
/// order ("name (type): description [s=0.1234]"), then every subgraph edge
/// ("source —(description)→ target").
RetrievedContext assemble_context(const std::vector<ScoredCandidate>& final_candidates,
                                  const KnowledgeGraph& graph, std::size_t expansion_hops);

}  // namespace amar
