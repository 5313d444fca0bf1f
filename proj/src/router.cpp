#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

#include "adamw.hpp"
#include "tempmerge/error.hpp"
#include "tempmerge/trainlab.hpp"

namespace tempmerge::train {

namespace {

struct RouterForward {
  std::vector<double> hidden;  // tanh activations
  std::array<double, 2> probs{};
};

RouterForward router_forward(const RouterParams& r, std::span<const double> x) {
  const std::size_t h = r.b1.size();
  const std::size_t d = r.w1.cols;
  if (x.size() != d) throw Error("router: input dimension " + std::to_string(x.size()) + " != " + std::to_string(d));
  RouterForward f;
  f.hidden.resize(h);
  for (std::size_t i = 0; i < h; ++i) {
    double acc = r.b1[i];
    for (std::size_t j = 0; j < d; ++j) acc += r.w1.at(i, j) * x[j];
    f.hidden[i] = std::tanh(acc);
  }
  std::array<double, 2> logits{};
  for (std::size_t c = 0; c < 2; ++c) {
    double acc = r.b2[c];
    for (std::size_t i = 0; i < h; ++i) acc += r.w2.at(c, i) * f.hidden[i];
    logits[c] = acc;
  }
  const double mx = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - mx);
  const double e1 = std::exp(logits[1] - mx);
  f.probs = {e0 / (e0 + e1), e1 / (e0 + e1)};
  return f;
}

void check_classes(std::span<const LabeledEmbedding> data) {
  bool seen[2] = {false, false};
  for (const auto& e : data) {
    if (e.label != kTemporal && e.label != kNonTemporal) throw Error("router: label must be 0 or 1");
    seen[e.label] = true;
  }
  if (!seen[0] || !seen[1]) throw Error("router: training data must contain both temporal and non-temporal queries");
}

}  // namespace

RouterParams RouterParams::init(std::size_t dim, std::size_t hidden, std::uint64_t seed) {
  if (dim < 1 || hidden < 1) throw Error("router: dim and hidden size must be >= 1");
  RouterParams r;
  r.w1 = Matrix(hidden, dim);
  r.b1.assign(hidden, 0.0);
  r.w2 = Matrix(2, hidden);
  r.b2.assign(2, 0.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g1(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  std::normal_distribution<double> g2(0.0, 1.0 / std::sqrt(static_cast<double>(hidden)));
  for (auto& x : r.w1.data) x = g1(rng);
  for (auto& x : r.w2.data) x = g2(rng);
  return r;
}

void RouterParams::validate() const {
  const std::size_t h = b1.size();
  if (h < 1) throw Error("router: hidden size must be >= 1");
  if (w1.rows != h || w1.data.size() != w1.rows * w1.cols) throw Error("router: w1 shape mismatch");
  if (w2.rows != 2 || w2.cols != h) throw Error("router: w2 must be 2 x hidden");
  if (b2.size() != 2) throw Error("router: b2 must have 2 entries");
  for (const auto* v : {&w1.data, &b1, &w2.data, &b2})
    for (double x : *v)
      if (!std::isfinite(x)) throw Error("router: non-finite weight");
}

std::array<double, 2> router_probs(const RouterParams& r, std::span<const double> x) {
  return router_forward(r, x).probs;
}

int router_predict(const RouterParams& r, std::span<const double> x) {
  const auto p = router_probs(r, x);
  return p[kTemporal] > p[kNonTemporal] ? kTemporal : kNonTemporal;
}

double router_accuracy(const RouterParams& r, std::span<const LabeledEmbedding> data) {
  if (data.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& e : data) ok += router_predict(r, e.x) == e.label ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(data.size());
}

double router_loss(const RouterParams& r, std::span<const LabeledEmbedding> batch) {
  double loss = 0.0;
  for (const auto& e : batch) loss -= std::log(router_forward(r, e.x).probs[static_cast<std::size_t>(e.label)]);
  return loss / static_cast<double>(batch.size());
}

RouterGradients router_gradients(const RouterParams& r, std::span<const LabeledEmbedding> batch) {
  if (batch.empty()) throw Error("router: empty batch");
  const std::size_t h = r.b1.size();
  const std::size_t d = r.w1.cols;
  RouterGradients g;
  g.w1 = Matrix(h, d);
  g.b1.assign(h, 0.0);
  g.w2 = Matrix(2, h);
  g.b2.assign(2, 0.0);
  const double inv = 1.0 / static_cast<double>(batch.size());
  std::vector<double> da(h);
  for (const auto& e : batch) {
    const auto f = router_forward(r, e.x);
    g.loss -= std::log(f.probs[static_cast<std::size_t>(e.label)]) * inv;
    std::array<double, 2> dout = {f.probs[0] * inv, f.probs[1] * inv};
    dout[static_cast<std::size_t>(e.label)] -= inv;
    for (std::size_t c = 0; c < 2; ++c) {
      g.b2[c] += dout[c];
      for (std::size_t i = 0; i < h; ++i) g.w2.at(c, i) += dout[c] * f.hidden[i];
    }
    for (std::size_t i = 0; i < h; ++i) {
      const double dz = r.w2.at(0, i) * dout[0] + r.w2.at(1, i) * dout[1];
      da[i] = dz * (1.0 - f.hidden[i] * f.hidden[i]);
      g.b1[i] += da[i];
      for (std::size_t j = 0; j < d; ++j) g.w1.at(i, j) += da[i] * e.x[j];
    }
  }
  return g;
}

RouterParams train_router(std::span<const LabeledEmbedding> train_set, std::span<const LabeledEmbedding> dev_set,
                          const RouterConfig& config) {
  check_classes(train_set);
  if (config.batch_size < 1 || config.epochs < 1) throw Error("router: batch_size and epochs must be >= 1");
  const std::size_t dim = train_set.front().x.size();
  RouterParams r = RouterParams::init(dim, config.hidden, config.seed);
  detail::AdamW opt(0.9, 0.999, 1e-8);
  std::mt19937_64 rng(config.seed ^ 0x5eed5eedULL);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto dev = dev_set.empty() ? train_set : dev_set;
  RouterParams best = r;
  double best_acc = -1.0;
  std::vector<LabeledEmbedding> batch;
  const auto bsz = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += bsz) {
      batch.clear();
      for (std::size_t k = start; k < std::min(order.size(), start + bsz); ++k) batch.push_back(train_set[order[k]]);
      auto g = router_gradients(r, batch);
      if (!std::isfinite(g.loss)) throw Error("router: non-finite loss in epoch " + std::to_string(epoch));
      opt.step({r.w1.data, r.b1, r.w2.data, r.b2}, {g.w1.data, g.b1, g.w2.data, g.b2}, config.learning_rate, 0.0);
    }
    const double acc = router_accuracy(r, dev);
    if (acc > best_acc) {
      best_acc = acc;
      best = r;
    }
  }
  return best;
}

RouterParams train_router(const std::vector<std::vector<TokenId>>& temporal,
                          const std::vector<std::vector<TokenId>>& nontemporal, const EncoderParams& vanilla,
                          const RouterConfig& config, double dev_fraction) {
  if (temporal.empty() || nontemporal.empty())
    throw Error("router: training data must contain both temporal and non-temporal queries");
  std::vector<LabeledEmbedding> all;
  for (const auto& t : temporal) all.push_back({encoder::encode(vanilla, t).values, kTemporal});
  for (const auto& t : nontemporal) all.push_back({encoder::encode(vanilla, t).values, kNonTemporal});
  std::mt19937_64 rng(config.seed ^ 0xdef0ULL);
  std::shuffle(all.begin(), all.end(), rng);
  const auto n_dev = static_cast<std::size_t>(static_cast<double>(all.size()) * dev_fraction);
  std::vector<LabeledEmbedding> dev(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_dev));
  std::vector<LabeledEmbedding> tr(all.begin() + static_cast<std::ptrdiff_t>(n_dev), all.end());
  return train_router(tr, dev, config);
}

namespace {
constexpr char kRouterMagic[8] = {'T', 'M', 'R', 'O', 'U', 'T', 'E', 'R'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint64_t get_u64(std::string_view bytes, std::size_t& pos) {
  if (bytes.size() - pos < 8) throw Error("router file: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  pos += 8;
  return v;
}
}  // namespace

void save_router(const RouterParams& r, const std::filesystem::path& path) {
  r.validate();
  std::string out(kRouterMagic, 8);
  put_u64(out, r.b1.size());
  put_u64(out, r.w1.cols);
  for (const auto* v : {&r.w1.data, &r.b1, &r.w2.data, &r.b2})
    for (double x : *v) put_u64(out, std::bit_cast<std::uint64_t>(x));
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write router: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

RouterParams load_router(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open router: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kRouterMagic, 8) != 0) throw Error("router file: bad magic");
  std::size_t pos = 8;
  const auto h = get_u64(bytes, pos);
  const auto d = get_u64(bytes, pos);
  if (h == 0 || d == 0 || h > 65536 || d > 65536) throw Error("router file: bad shape");
  RouterParams r;
  r.w1 = Matrix(h, d);
  r.b1.assign(h, 0.0);
  r.w2 = Matrix(2, h);
  r.b2.assign(2, 0.0);
  for (auto* v : {&r.w1.data, &r.b1, &r.w2.data, &r.b2})
    for (double& x : *v) x = std::bit_cast<double>(get_u64(bytes, pos));
  if (pos != bytes.size()) throw Error("router file: trailing bytes");
  r.validate();
  return r;
}

}  // namespace tempmerge::train
