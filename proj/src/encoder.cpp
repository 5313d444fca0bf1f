#include "tempmerge/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "tempmerge/error.hpp"
#include "tempmerge/text.hpp"

namespace tempmerge::encoder {

Vocab Vocab::build(std::span<const std::string> texts) {
  std::set<std::string> seen;
  for (const auto& t : texts)
    for (auto& tok : tokenize(t)) seen.insert(std::move(tok));
  std::vector<std::string> tokens = {"[PAD]", "[UNK]"};
  tokens.insert(tokens.end(), seen.begin(), seen.end());
  return from_tokens(std::move(tokens));
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != "[PAD]" || tokens[1] != "[UNK]")
    throw Error("vocab: first two entries must be [PAD] and [UNK]");
  Vocab v;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], static_cast<TokenId>(i)).second)
      throw Error("vocab: duplicate token '" + v.tokens_[i] + "'");
  }
  return v;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open vocab: " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  return from_tokens(std::move(tokens));
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write vocab: " + path.string());
  out << serialize();
}

TokenId Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw Error("vocab: id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocab::encode_text(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& tok : tokenize(text)) ids.push_back(id(tok));
  return ids;
}

std::string Vocab::serialize() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

std::uint64_t Vocab::hash() const { return fnv1a64(serialize()); }

EncoderParams EncoderParams::init(std::size_t vocab_size, std::size_t dim, std::uint64_t seed,
                                  std::uint64_t vocab_hash) {
  if (vocab_size < 1 || dim < 1) throw Error("encoder: vocab size and dim must be >= 1");
  EncoderParams p;
  p.embed = Matrix(vocab_size, dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  for (auto& x : p.embed.data) x = gauss(rng);
  p.proj_w = Matrix(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) p.proj_w.at(i, i) = 1.0;
  p.proj_b.assign(dim, 0.0);
  p.vocab_hash = vocab_hash;
  return p;
}

std::vector<TensorView> EncoderParams::tensors() {
  return {{"embed", embed.rows, embed.cols, embed.data},
          {"proj_w", proj_w.rows, proj_w.cols, proj_w.data},
          {"proj_b", 1, proj_b.size(), proj_b}};
}

std::vector<ConstTensorView> EncoderParams::tensors() const {
  return {{"embed", embed.rows, embed.cols, embed.data},
          {"proj_w", proj_w.rows, proj_w.cols, proj_w.data},
          {"proj_b", 1, proj_b.size(), proj_b}};
}

void EncoderParams::validate() const {
  const std::size_t d = dim();
  if (embed.rows == 0 || d == 0) throw Error("encoder params: embed has an empty shape");
  if (embed.data.size() != embed.rows * embed.cols) throw Error("encoder params: embed storage size mismatch");
  if (proj_w.rows != d || proj_w.cols != d || proj_w.data.size() != d * d)
    throw Error("encoder params: proj_w must be " + std::to_string(d) + "x" + std::to_string(d));
  if (proj_b.size() != d) throw Error("encoder params: proj_b must have " + std::to_string(d) + " entries");
  for (const auto& t : tensors())
    for (double x : t.values)
      if (!std::isfinite(x)) throw Error("encoder params: non-finite entry in " + std::string(t.name));
}

LoraAdapter LoraAdapter::init(std::size_t dim, std::size_t rank, double alpha, std::uint64_t seed) {
  if (rank < 1 || rank > dim) throw Error("lora: rank must be in [1, dim]");
  LoraAdapter ad;
  ad.rank = rank;
  ad.alpha = alpha;
  ad.a = Matrix(rank, dim);
  ad.b = Matrix(dim, rank, 0.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  for (auto& x : ad.a.data) x = gauss(rng);
  return ad;
}

void LoraAdapter::validate(std::size_t dim) const {
  if (target != "proj_w") throw Error("lora: unknown target tensor '" + target + "'");
  if (rank < 1 || rank > dim) throw Error("lora: rank must be in [1, dim]");
  if (a.rows != rank || a.cols != dim) throw Error("lora: A must be rank x dim");
  if (b.rows != dim || b.cols != rank) throw Error("lora: B must be dim x rank");
}

std::vector<double> mean_pool(const EncoderParams& params, std::span<const TokenId> tokens) {
  if (tokens.empty()) throw Error("empty input");
  const std::size_t d = params.dim();
  std::vector<double> m(d, 0.0);
  for (TokenId t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= params.vocab_size())
      throw Error("out-of-vocab id " + std::to_string(t));
    auto row = params.embed.row(static_cast<std::size_t>(t));
    for (std::size_t j = 0; j < d; ++j) m[j] += row[j];
  }
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (auto& x : m) x *= inv;
  return m;
}

Matrix effective_projection(const EncoderParams& params, const LoraAdapter* adapter) {
  if (!adapter) return params.proj_w;
  const std::size_t d = params.dim();
  adapter->validate(d);
  Matrix w = params.proj_w;
  const double s = adapter->scale();
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < adapter->rank; ++k) acc += adapter->b.at(i, k) * adapter->a.at(k, j);
      w.at(i, j) += s * acc;
    }
  return w;
}

Embedding project(const Matrix& w_eff, const std::vector<double>& bias, std::span<const double> pooled) {
  const std::size_t d = bias.size();
  Embedding e;
  e.values.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    double acc = bias[i];
    auto row = w_eff.row(i);
    for (std::size_t j = 0; j < d; ++j) acc += row[j] * pooled[j];
    e.values[i] = acc;
  }
  return e;
}

Embedding encode(const EncoderParams& params, const LoraAdapter* adapter, std::span<const TokenId> tokens) {
  const auto pooled = mean_pool(params, tokens);
  if (!adapter) return project(params.proj_w, params.proj_b, pooled);
  return project(effective_projection(params, adapter), params.proj_b, pooled);
}

double similarity(const Embedding& q, const Embedding& d) {
  if (q.size() != d.size())
    throw Error("similarity: dimension mismatch " + std::to_string(q.size()) + " vs " + std::to_string(d.size()));
  double acc = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) acc += q.values[i] * d.values[i];
  return acc;
}

EncoderParams materialize_lora(const EncoderParams& params, const LoraAdapter& adapter) {
  EncoderParams out = params;
  out.proj_w = effective_projection(params, &adapter);
  return out;
}

}  // namespace tempmerge::encoder
