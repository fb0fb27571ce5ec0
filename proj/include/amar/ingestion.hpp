#pragma once

// Corpus -> chunks -> model extraction -> graph.

#include "amar/backend.hpp"
#include "amar/graph.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace amar {

/// Whitespace-delimited words.
std::vector<std::string> tokenize(std::string_view text);

struct DocumentChunk {
    std::string doc_id;
    std::size_t chunk_index = 0;
    std::string text;  // tokens joined by single spaces
    std::size_t start_token = 0;
    std::size_t token_count = 0;
};

struct ChunkParams {
    std::size_t window = 1000;
    std::size_t overlap = 100;

    void validate() const;
    std::size_t step() const { return window - overlap; }
};

/// Sliding windows starting at 0, step = window - overlap, stopping at the first
/// window that reaches the end of the document. Empty documents give no chunks.
std::vector<DocumentChunk> chunk_document(const std::string& doc_id, std::string_view text,
                                          const ChunkParams& params = {});

struct ExtractedEntity {
    std::string name;
    NodeType type = NodeType::Theme;
    std::string description;
};

struct ExtractedRelation {
    std::string source_name;
    std::string target_name;
    std::string description;
};

struct ExtractionResult {
    std::vector<ExtractedEntity> entities;
    std::vector<ExtractedRelation> relations;
    std::size_t dropped_entities = 0;
    std::size_t dropped_relations = 0;
    std::vector<std::string> warnings;
};

/// Strict parse of {"entities":[...], "relationships":[...]}. Entities with an
/// unknown type are dropped individually; relations must name extracted entities.
ExtractionResult parse_extraction(std::string_view raw);

ModelRequest build_extraction_request(const DocumentChunk& chunk);

inline constexpr int kMaxParseRetries = 2;

ExtractionResult extract(const DocumentChunk& chunk, ModelBackend& backend);

struct CorpusDocument {
    std::string doc_id;
    std::optional<std::string> text;           // inline text, or
    std::optional<std::filesystem::path> path;  // read at ingestion time
};

/// Directory of .txt files (doc_id = file stem) or a JSON Lines manifest of
/// {"doc_id", "text"}. Documents are ordered by doc_id.
std::vector<CorpusDocument> load_corpus(const std::filesystem::path& source);

struct IngestFailure {
    std::string doc_id;
    std::string message;
};

struct IngestStats {
    std::size_t docs = 0;
    std::size_t chunks = 0;
    std::size_t entities = 0;
    std::size_t relations = 0;
    std::size_t dropped = 0;
    std::size_t failed_docs = 0;
    std::vector<IngestFailure> failures;
    std::size_t merged_duplicates = 0;
    std::size_t nodes = 0;
    std::size_t edges = 0;

    nlohmann::ordered_json to_json() const;
};

struct IngestOptions {
    ChunkParams chunking;
    std::size_t parallelism = 1;
};

/// Extracts every chunk (concurrently up to options.parallelism) and merges
/// results into `graph` in document/chunk order. Per-document failures are
/// recorded and skipped.
IngestStats ingest_corpus(const std::vector<CorpusDocument>& docs, KnowledgeGraph& graph, ModelBackend& backend,
                          const IngestOptions& options = {});

}  // namespace amar
