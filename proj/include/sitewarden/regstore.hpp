#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace sitewarden::regstore {

struct RegulationClause {
    std::string clause_id;  // citation string, e.g. "1926.1053"
    std::string subpart;
    std::string title;
    std::string body;
};

// Corpus format: JSON Lines, one clause per line
// {clause_id, subpart, title, body}. Duplicate ids and empty bodies are
// rejected.
std::vector<RegulationClause> load_corpus(const std::filesystem::path& path);

struct Chunk {
    std::string chunk_id;   // "{clause_id}#{ordinal}"
    std::string clause_id;
    std::string text;       // substring of the clause body
    std::size_t start = 0;  // [start, end) character span within the body
    std::size_t end = 0;

    bool operator==(const Chunk&) const = default;
};

// Sliding window of width max_chars and stride max_chars - overlap over each
// clause body; the final chunk is the remainder. overlap must stay below
// max_chars or the stride collapses.
std::vector<Chunk> chunk_clauses(std::span<const RegulationClause> clauses,
                                 std::size_t max_chars, std::size_t overlap);

class Embedder {
public:
    virtual ~Embedder() = default;
    // Unit-norm vector, or the zero vector when no vocabulary term matches.
    // Empty text is an error.
    virtual Eigen::VectorXd embed(const std::string& text) const = 0;
    virtual Eigen::Index dimension() const = 0;
    virtual std::string id() const = 0;
    // Everything needed to reconstruct the embedder from the index header.
    virtual nlohmann::json params() const = 0;
};

// Deterministic tf-idf cosine embedder over the chunk vocabulary. Tokens are
// maximal [a-z0-9]+ runs of the lowercased text; idf(t) = ln((1+N)/(1+df(t)))+1;
// vectors are raw-count tf weighted by idf and L2-normalized. Hermetic by
// construction: no tokenizer or model dependency.
class LexicalEmbedder final : public Embedder {
public:
    static LexicalEmbedder fit(std::span<const Chunk> chunks);
    static LexicalEmbedder from_params(const nlohmann::json& params);

    Eigen::VectorXd embed(const std::string& text) const override;
    Eigen::Index dimension() const override { return static_cast<Eigen::Index>(terms_.size()); }
    std::string id() const override { return "lexical-tfidf/1"; }
    nlohmann::json params() const override;

private:
    std::vector<std::string> terms_;  // sorted; position = vector component
    std::vector<double> idf_;
};

// Remote embedder delegating to the local model server's embeddings endpoint
// (POST {base_url}/api/embeddings {"model","prompt"} -> {"embedding":[...]}).
// Returned vectors are L2-normalized.
class RemoteEmbedder final : public Embedder {
public:
    RemoteEmbedder(std::string base_url, std::string model_id, int timeout_seconds = 300);
    Eigen::VectorXd embed(const std::string& text) const override;
    Eigen::Index dimension() const override { return dimension_; }
    std::string id() const override { return "remote/" + model_id_; }
    nlohmann::json params() const override;

private:
    std::string base_url_;
    std::string model_id_;
    int timeout_seconds_;
    mutable Eigen::Index dimension_ = 0;  // discovered from the first reply
};

struct EmbeddingIndex {
    Eigen::Index dimension = 0;
    std::string embedder_id;
    nlohmann::json embedder_params;
    std::size_t chunk_max_chars = 0;
    std::size_t chunk_overlap = 0;
    std::vector<Chunk> chunks;   // row i of `vectors` embeds chunks[i]
    Eigen::MatrixXd vectors;     // rows are unit-norm chunk embeddings

    std::size_t size() const { return chunks.size(); }
};

EmbeddingIndex build_index(std::span<const RegulationClause> clauses, const Embedder& embedder,
                           std::size_t max_chars, std::size_t overlap);

// Index file: one header record {dimension, embedder_id, params} followed by
// {chunk_id, clause_id, span, vector} records. Building is deterministic:
// same corpus + embedder -> identical bytes.
void save_index(const EmbeddingIndex& index, const std::filesystem::path& path);
// Chunk texts are re-derived from the corpus via the stored spans.
EmbeddingIndex load_index(const std::filesystem::path& path,
                          std::span<const RegulationClause> corpus);

struct ScoredChunk {
    Chunk chunk;
    double score = 0.0;  // cosine similarity in [-1, 1]
};

// Exact top-k by (score desc, chunk_id asc); exactly min(k, |index|) results.
std::vector<ScoredChunk> retrieve(const EmbeddingIndex& index, const Eigen::VectorXd& query,
                                  int k);

}  // namespace sitewarden::regstore
