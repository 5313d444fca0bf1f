#include "tempmerge/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "tempmerge/error.hpp"

namespace tempmerge::retrieval {

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Single: return "single";
    case Strategy::Ensemble: return "ensemble";
    case Strategy::Routed: return "routed";
  }
  return "?";
}

std::optional<Strategy> strategy_from_name(std::string_view name) {
  for (auto s : {Strategy::Single, Strategy::Ensemble, Strategy::Routed})
    if (strategy_name(s) == name) return s;
  return std::nullopt;
}

Index build_index(const EncoderParams& params, std::span<const std::string> passage_ids,
                  std::span<const std::vector<TokenId>> passage_tokens) {
  if (passage_ids.empty()) throw Error("build_index: no passages");
  if (passage_ids.size() != passage_tokens.size()) throw Error("build_index: ids and token lists differ in length");
  const std::size_t d = params.dim();
  Index idx;
  idx.passage_ids.assign(passage_ids.begin(), passage_ids.end());
  idx.embeddings = encoder::Matrix(passage_ids.size(), d);
  idx.model_hash = encoder::checkpoint_hash(params);
  for (std::size_t i = 0; i < passage_ids.size(); ++i) {
    Embedding e;
    try {
      e = encoder::encode(params, passage_tokens[i]);
    } catch (const Error& err) {
      throw Error("build_index: passage " + passage_ids[i] + ": " + err.what());
    }
    std::copy(e.values.begin(), e.values.end(), idx.embeddings.row(i).begin());
  }
  return idx;
}

std::vector<double> score_all(const Index& index, const Embedding& query) {
  const std::size_t d = index.embeddings.cols;
  if (query.size() != d)
    throw Error("search: query dimension " + std::to_string(query.size()) + " != index dimension " + std::to_string(d));
  std::vector<double> scores(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    auto row = index.embeddings.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += query.values[j] * row[j];
    scores[i] = acc;
  }
  return scores;
}

std::vector<ScoredHit> rank_scores(std::span<const std::string> ids, std::span<const double> scores, int k) {
  if (k < 1) throw Error("search: k must be >= 1");
  if (ids.size() != scores.size()) throw Error("search: ids and scores differ in length");
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t top = std::min(order.size(), static_cast<std::size_t>(k));
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(), better);
  std::vector<ScoredHit> hits;
  hits.reserve(top);
  for (std::size_t r = 0; r < top; ++r) hits.push_back({ids[order[r]], scores[order[r]], static_cast<int>(r + 1)});
  return hits;
}

std::vector<ScoredHit> search(const Index& index, const Embedding& query, int k) {
  return rank_scores(index.passage_ids, score_all(index, query), k);
}

std::vector<double> ensemble_scores(std::span<const std::vector<double>> raw_scores) {
  if (raw_scores.empty()) throw Error("ensemble: no score vectors");
  const std::size_t n = raw_scores.front().size();
  std::vector<double> avg(n, 0.0);
  for (const auto& s : raw_scores) {
    if (s.size() != n) throw Error("ensemble: score vectors differ in length");
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    const double range = *hi - *lo;
    for (std::size_t i = 0; i < n; ++i) avg[i] += range > 0 ? (s[i] - *lo) / range : 0.5;
  }
  for (auto& x : avg) x /= static_cast<double>(raw_scores.size());
  return avg;
}

std::vector<ScoredHit> ensemble_rank(std::span<const std::string> ids, std::span<const std::vector<double>> raw_scores,
                                     int k) {
  return rank_scores(ids, ensemble_scores(raw_scores), k);
}

std::vector<ScoredHit> ensemble_search(std::span<const Retriever> models, std::span<const TokenId> query, int k) {
  if (models.size() < 2) throw Error("ensemble: need at least two retrievers");
  const auto& ids = models.front().index->passage_ids;
  std::vector<std::vector<double>> raw;
  for (const auto& m : models) {
    if (m.index->passage_ids != ids) throw Error("ensemble: retrievers index different passage lists");
    raw.push_back(score_all(*m.index, encoder::encode(*m.params, query)));
  }
  return ensemble_rank(ids, raw, k);
}

RoutedResult routed_search(const train::RouterParams& router, const Retriever& vanilla, const Retriever& tuned,
                           std::span<const TokenId> query, int k) {
  if (vanilla.index->passage_ids != tuned.index->passage_ids)
    throw Error("routed search: retrievers index different passage lists");
  const Embedding qv = encoder::encode(*vanilla.params, query);
  RoutedResult r;
  r.routed_to_tuned = train::router_predict(router, qv.values) == train::kTemporal;
  if (r.routed_to_tuned)
    r.hits = search(*tuned.index, encoder::encode(*tuned.params, query), k);
  else
    r.hits = search(*vanilla.index, qv, k);
  return r;
}

void write_trec_run(const std::filesystem::path& path, const RetrievalRun& run) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write run: " + path.string());
  char buf[64];
  const auto tag = strategy_name(run.strategy);
  for (const auto& [qid, hits] : run.results)
    for (const auto& h : hits) {
      std::snprintf(buf, sizeof buf, "%.17g", h.score);
      out << qid << " Q0 " << h.passage_id << ' ' << h.rank << ' ' << buf << ' ' << tag << '\n';
    }
  if (!out) throw Error("write failed: " + path.string());
}

RetrievalRun read_trec_run(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open run: " + path.string());
  RetrievalRun run;
  std::string line;
  std::size_t lineno = 0;
  bool have_tag = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string qid, q0, pid, tag;
    int rank = 0;
    std::string score_text;
    if (!(ss >> qid >> q0 >> pid >> rank >> score_text >> tag) || q0 != "Q0")
      throw Error(path.string() + ":" + std::to_string(lineno) + ": malformed run line");
    auto strat = strategy_from_name(tag);
    if (!strat) throw Error(path.string() + ":" + std::to_string(lineno) + ": unknown strategy tag '" + tag + "'");
    if (have_tag && *strat != run.strategy)
      throw Error(path.string() + ":" + std::to_string(lineno) + ": mixed strategy tags");
    run.strategy = *strat;
    have_tag = true;
    auto& hits = run.results[qid];
    hits.push_back({pid, std::stod(score_text), rank});
    run.k = std::max(run.k, rank);
  }
  for (auto& [qid, hits] : run.results)
    std::sort(hits.begin(), hits.end(), [](const ScoredHit& a, const ScoredHit& b) { return a.rank < b.rank; });
  return run;
}

namespace {
constexpr char kIndexMagic[8] = {'T', 'M', 'I', 'N', 'D', 'E', 'X', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct ByteReader {
  std::string_view bytes;
  std::size_t pos = 0;
  std::uint64_t u64() {
    if (bytes.size() - pos < 8) throw Error("index file: truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  std::string str(std::size_t n) {
    if (bytes.size() - pos < n) throw Error("index file: truncated");
    std::string s(bytes.substr(pos, n));
    pos += n;
    return s;
  }
};
}  // namespace

void save_index(const Index& index, const std::filesystem::path& path) {
  std::string out(kIndexMagic, 8);
  put_u64(out, index.model_hash);
  put_u64(out, index.size());
  put_u64(out, index.embeddings.cols);
  for (const auto& id : index.passage_ids) {
    put_u64(out, id.size());
    out += id;
  }
  for (double x : index.embeddings.data) put_u64(out, std::bit_cast<std::uint64_t>(x));
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write index: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

Index load_index(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open index: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kIndexMagic, 8) != 0) throw Error("index file: bad magic");
  ByteReader r{bytes, 8};
  Index idx;
  idx.model_hash = r.u64();
  const auto n = r.u64();
  const auto d = r.u64();
  if (n == 0 || d == 0 || n > (1ULL << 32) || d > 65536) throw Error("index file: bad shape");
  for (std::uint64_t i = 0; i < n; ++i) idx.passage_ids.push_back(r.str(r.u64()));
  idx.embeddings = encoder::Matrix(n, d);
  for (auto& x : idx.embeddings.data) x = std::bit_cast<double>(r.u64());
  if (r.pos != bytes.size()) throw Error("index file: trailing bytes");
  return idx;
}

}  // namespace tempmerge::retrieval
