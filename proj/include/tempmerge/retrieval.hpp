#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tempmerge/encoder.hpp"
#include "tempmerge/trainlab.hpp"

namespace tempmerge::retrieval {

using encoder::Embedding;
using encoder::EncoderParams;
using encoder::TokenId;

// Encoded corpus: row i is the embedding of passage_ids[i].
struct Index {
  std::vector<std::string> passage_ids;
  encoder::Matrix embeddings;  // [N x d]
  std::uint64_t model_hash = 0;

  std::size_t size() const { return passage_ids.size(); }
  bool operator==(const Index&) const = default;
};

struct ScoredHit {
  std::string passage_id;
  double score = 0.0;
  int rank = 0;  // 1-based
  bool operator==(const ScoredHit&) const = default;
};

enum class Strategy { Single, Ensemble, Routed };
std::string_view strategy_name(Strategy s);
std::optional<Strategy> strategy_from_name(std::string_view name);

struct RetrievalRun {
  Strategy strategy = Strategy::Single;
  int k = 0;
  std::map<std::string, std::vector<ScoredHit>> results;  // query_id -> hits
};

// Throws Error naming the passage whose tokens cannot be encoded.
Index build_index(const EncoderParams& params, std::span<const std::string> passage_ids,
                  std::span<const std::vector<TokenId>> passage_tokens);

// Exact top-k by dot product; ties go to the smaller passage id. k > N
// returns all N hits.
std::vector<ScoredHit> search(const Index& index, const Embedding& query, int k);

// Top-k over an explicit score vector aligned with `ids`.
std::vector<ScoredHit> rank_scores(std::span<const std::string> ids, std::span<const double> scores, int k);

// Min-max normalizes each score vector to [0, 1] (all-equal vectors become
// 0.5), averages them and ranks. All vectors must align with `ids`.
std::vector<double> ensemble_scores(std::span<const std::vector<double>> raw_scores);
std::vector<ScoredHit> ensemble_rank(std::span<const std::string> ids, std::span<const std::vector<double>> raw_scores,
                                     int k);

struct Retriever {
  const EncoderParams* params = nullptr;
  const Index* index = nullptr;
};

// Scores every passage under every model for the query.
std::vector<ScoredHit> ensemble_search(std::span<const Retriever> models, std::span<const TokenId> query, int k);

struct RoutedResult {
  std::vector<ScoredHit> hits;
  bool routed_to_tuned = false;
};

// The router looks at the vanilla embedding of the query; temporal queries
// go to the tuned retriever, the rest to the vanilla one.
RoutedResult routed_search(const train::RouterParams& router, const Retriever& vanilla, const Retriever& tuned,
                           std::span<const TokenId> query, int k);

// Full score vector of the query against the index.
std::vector<double> score_all(const Index& index, const Embedding& query);

// TREC run lines: "query_id Q0 passage_id rank score tag".
void write_trec_run(const std::filesystem::path& path, const RetrievalRun& run);
RetrievalRun read_trec_run(const std::filesystem::path& path);

// Binary index file (ids, hash, matrix).
void save_index(const Index& index, const std::filesystem::path& path);
Index load_index(const std::filesystem::path& path);

}  // namespace tempmerge::retrieval
