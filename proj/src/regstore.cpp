#include "sitewarden/regstore.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "sitewarden/error.hpp"
#include "sitewarden/util.hpp"

namespace sitewarden::regstore {

namespace {

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

}  // namespace

std::vector<RegulationClause> load_corpus(const std::filesystem::path& path) {
    std::vector<RegulationClause> clauses;
    std::set<std::string> seen;
    try {
        for_each_jsonl(path, [&](std::size_t lineno, const nlohmann::json& record) {
            RegulationClause clause;
            try {
                clause.clause_id = record.at("clause_id").get<std::string>();
                clause.subpart = record.value("subpart", "");
                clause.title = record.value("title", "");
                clause.body = record.at("body").get<std::string>();
            } catch (const nlohmann::json::exception& e) {
                throw Error(errc::invalid_corpus,
                            path.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
            if (clause.body.empty()) {
                throw Error(errc::invalid_corpus,
                            "clause " + clause.clause_id + " has an empty body");
            }
            if (!seen.insert(clause.clause_id).second) {
                throw Error(errc::invalid_corpus, "duplicate clause_id " + clause.clause_id);
            }
            clauses.push_back(std::move(clause));
        });
    } catch (const Error& e) {
        if (e.code() == errc::io_error) throw Error(errc::invalid_corpus, e.message());
        throw;
    }
    return clauses;
}

std::vector<Chunk> chunk_clauses(std::span<const RegulationClause> clauses,
                                 std::size_t max_chars, std::size_t overlap) {
    if (max_chars == 0 || overlap >= max_chars) {
        throw Error(errc::invalid_params, "need 0 <= overlap < max_chars and max_chars > 0");
    }
    const std::size_t stride = max_chars - overlap;
    std::vector<Chunk> chunks;
    for (const auto& clause : clauses) {
        const std::size_t len = clause.body.size();
        std::size_t ordinal = 0;
        for (std::size_t start = 0; start < len; start += stride) {
            std::size_t end = std::min(start + max_chars, len);
            Chunk chunk;
            chunk.clause_id = clause.clause_id;
            chunk.chunk_id = clause.clause_id + "#" + std::to_string(ordinal++);
            chunk.start = start;
            chunk.end = end;
            chunk.text = clause.body.substr(start, end - start);
            chunks.push_back(std::move(chunk));
            if (end == len) break;
        }
    }
    return chunks;
}

// --- LexicalEmbedder ----------------------------------------------------

LexicalEmbedder LexicalEmbedder::fit(std::span<const Chunk> chunks) {
    std::map<std::string, std::size_t> df;  // sorted term order = vector order
    for (const auto& chunk : chunks) {
        std::set<std::string> in_doc;
        for (auto& token : tokenize(chunk.text)) in_doc.insert(std::move(token));
        for (const auto& term : in_doc) ++df[term];
    }
    LexicalEmbedder embedder;
    const double n = static_cast<double>(chunks.size());
    embedder.terms_.reserve(df.size());
    embedder.idf_.reserve(df.size());
    for (const auto& [term, count] : df) {
        embedder.terms_.push_back(term);
        embedder.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
    }
    return embedder;
}

LexicalEmbedder LexicalEmbedder::from_params(const nlohmann::json& params) {
    LexicalEmbedder embedder;
    embedder.terms_ = params.at("terms").get<std::vector<std::string>>();
    embedder.idf_ = params.at("idf").get<std::vector<double>>();
    if (embedder.terms_.size() != embedder.idf_.size()) {
        throw Error(errc::invalid_params, "embedder params: terms/idf length mismatch");
    }
    return embedder;
}

Eigen::VectorXd LexicalEmbedder::embed(const std::string& text) const {
    if (trim(text).empty()) throw Error(errc::empty_text, "cannot embed empty text");
    Eigen::VectorXd vec = Eigen::VectorXd::Zero(dimension());
    for (const auto& token : tokenize(text)) {
        auto it = std::lower_bound(terms_.begin(), terms_.end(), token);
        if (it != terms_.end() && *it == token) {
            auto idx = static_cast<Eigen::Index>(it - terms_.begin());
            vec[idx] += idf_[static_cast<std::size_t>(idx)];
        }
    }
    double norm = vec.norm();
    if (norm > 0.0) vec /= norm;
    return vec;
}

nlohmann::json LexicalEmbedder::params() const {
    return nlohmann::json{{"terms", terms_}, {"idf", idf_}};
}

// --- RemoteEmbedder -----------------------------------------------------

RemoteEmbedder::RemoteEmbedder(std::string base_url, std::string model_id, int timeout_seconds)
    : base_url_(std::move(base_url)), model_id_(std::move(model_id)),
      timeout_seconds_(timeout_seconds) {
    while (base_url_.size() > 1 && base_url_.back() == '/') base_url_.pop_back();
}

Eigen::VectorXd RemoteEmbedder::embed(const std::string& text) const {
    if (trim(text).empty()) throw Error(errc::empty_text, "cannot embed empty text");
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_seconds_);
    client.set_read_timeout(timeout_seconds_);
    nlohmann::json body{{"model", model_id_}, {"prompt", text}};
    auto result = client.Post("/api/embeddings", body.dump(), "application/json");
    if (!result || result->status != 200) {
        throw Error(errc::backend_unreachable,
                    "embeddings request failed against " + base_url_);
    }
    auto reply = nlohmann::json::parse(result->body);
    auto values = reply.at("embedding").get<std::vector<double>>();
    Eigen::VectorXd vec = Eigen::Map<Eigen::VectorXd>(values.data(),
                                                      static_cast<Eigen::Index>(values.size()));
    if (dimension_ == 0) dimension_ = vec.size();
    if (vec.size() != dimension_) {
        throw Error(errc::dimension_mismatch, "remote embedder changed dimension mid-run");
    }
    double norm = vec.norm();
    if (norm > 0.0) vec /= norm;
    return vec;
}

nlohmann::json RemoteEmbedder::params() const {
    return nlohmann::json{{"base_url", base_url_}, {"model", model_id_}};
}

// --- EmbeddingIndex -----------------------------------------------------

EmbeddingIndex build_index(std::span<const RegulationClause> clauses, const Embedder& embedder,
                           std::size_t max_chars, std::size_t overlap) {
    EmbeddingIndex index;
    index.chunks = chunk_clauses(clauses, max_chars, overlap);
    index.chunk_max_chars = max_chars;
    index.chunk_overlap = overlap;
    index.embedder_id = embedder.id();

    // The lexical embedder has to be fitted on exactly these chunks; other
    // embedders are corpus-independent.
    const Embedder* active = &embedder;
    std::unique_ptr<LexicalEmbedder> fitted;
    if (dynamic_cast<const LexicalEmbedder*>(&embedder) != nullptr) {
        fitted = std::make_unique<LexicalEmbedder>(LexicalEmbedder::fit(index.chunks));
        active = fitted.get();
    }

    index.vectors.resize(static_cast<Eigen::Index>(index.chunks.size()), 0);
    for (std::size_t i = 0; i < index.chunks.size(); ++i) {
        Eigen::VectorXd vec = active->embed(index.chunks[i].text);
        if (index.dimension == 0) {
            index.dimension = vec.size();
            index.vectors.resize(static_cast<Eigen::Index>(index.chunks.size()), index.dimension);
        }
        if (vec.size() != index.dimension) {
            throw Error(errc::dimension_mismatch, "inconsistent embedding dimensions");
        }
        index.vectors.row(static_cast<Eigen::Index>(i)) = vec.transpose();
    }
    if (index.chunks.empty()) index.dimension = active->dimension();
    index.embedder_params = active->params();
    return index;
}

void save_index(const EmbeddingIndex& index, const std::filesystem::path& path) {
    std::ostringstream out;
    nlohmann::json header{
        {"dimension", index.dimension},
        {"embedder_id", index.embedder_id},
        {"params", index.embedder_params},
        {"chunking", {{"max_chars", index.chunk_max_chars}, {"overlap", index.chunk_overlap}}},
    };
    out << header.dump() << "\n";
    for (std::size_t i = 0; i < index.chunks.size(); ++i) {
        const Chunk& chunk = index.chunks[i];
        std::vector<double> values(static_cast<std::size_t>(index.dimension));
        for (Eigen::Index j = 0; j < index.dimension; ++j) {
            values[static_cast<std::size_t>(j)] = index.vectors(static_cast<Eigen::Index>(i), j);
        }
        nlohmann::json record{
            {"chunk_id", chunk.chunk_id},
            {"clause_id", chunk.clause_id},
            {"span", {chunk.start, chunk.end}},
            {"vector", values},
        };
        out << record.dump() << "\n";
    }
    write_file_atomic(path, out.str());
}

EmbeddingIndex load_index(const std::filesystem::path& path,
                          std::span<const RegulationClause> corpus) {
    std::map<std::string, const RegulationClause*> by_id;
    for (const auto& clause : corpus) by_id[clause.clause_id] = &clause;

    EmbeddingIndex index;
    std::vector<std::vector<double>> rows;
    bool header_seen = false;
    for_each_jsonl(path, [&](std::size_t, const nlohmann::json& record) {
        if (!header_seen) {
            header_seen = true;
            index.dimension = record.at("dimension").get<Eigen::Index>();
            index.embedder_id = record.at("embedder_id").get<std::string>();
            index.embedder_params = record.at("params");
            index.chunk_max_chars = record.at("chunking").at("max_chars").get<std::size_t>();
            index.chunk_overlap = record.at("chunking").at("overlap").get<std::size_t>();
            return;
        }
        Chunk chunk;
        chunk.chunk_id = record.at("chunk_id").get<std::string>();
        chunk.clause_id = record.at("clause_id").get<std::string>();
        chunk.start = record.at("span").at(0).get<std::size_t>();
        chunk.end = record.at("span").at(1).get<std::size_t>();
        auto it = by_id.find(chunk.clause_id);
        if (it == by_id.end()) {
            throw Error(errc::invalid_corpus,
                        "index references unknown clause " + chunk.clause_id);
        }
        if (chunk.end > it->second->body.size() || chunk.start >= chunk.end) {
            throw Error(errc::invalid_corpus, "index span out of range in " + chunk.chunk_id);
        }
        chunk.text = it->second->body.substr(chunk.start, chunk.end - chunk.start);
        index.chunks.push_back(std::move(chunk));
        rows.push_back(record.at("vector").get<std::vector<double>>());
    });
    if (!header_seen) throw Error(errc::invalid_corpus, "index file has no header record");

    index.vectors.resize(static_cast<Eigen::Index>(rows.size()), index.dimension);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (static_cast<Eigen::Index>(rows[i].size()) != index.dimension) {
            throw Error(errc::dimension_mismatch, "index row dimension mismatch");
        }
        for (Eigen::Index j = 0; j < index.dimension; ++j) {
            index.vectors(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
        }
    }
    return index;
}

std::vector<ScoredChunk> retrieve(const EmbeddingIndex& index, const Eigen::VectorXd& query,
                                  int k) {
    if (k <= 0) throw Error(errc::invalid_params, "k must be >= 1");
    if (index.chunks.empty()) return {};
    if (query.size() != index.dimension) {
        throw Error(errc::dimension_mismatch,
                    "query dimension " + std::to_string(query.size()) + " vs index " +
                        std::to_string(index.dimension));
    }
    Eigen::VectorXd scores = index.vectors * query;
    std::vector<std::size_t> order(index.chunks.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        double sa = scores[static_cast<Eigen::Index>(a)];
        double sb = scores[static_cast<Eigen::Index>(b)];
        if (sa != sb) return sa > sb;
        return index.chunks[a].chunk_id < index.chunks[b].chunk_id;
    });
    std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
    std::vector<ScoredChunk> results;
    results.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        results.push_back(
            ScoredChunk{index.chunks[order[i]], scores[static_cast<Eigen::Index>(order[i])]});
    }
    return results;
}

}  // namespace sitewarden::regstore
