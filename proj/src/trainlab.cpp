#include "tempmerge/trainlab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>

#include "adamw.hpp"
#include "tempmerge/error.hpp"

namespace tempmerge::train {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9e3779b97f4a7c15ULL + b + 0x7f4a7c159e3779b9ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

// Forward state of one encoded item (a query or a passage).
struct Encoded {
  const std::vector<TokenId>* tokens = nullptr;
  std::vector<double> pooled;  // after dropout
  std::vector<double> mask;    // empty when dropout is off; else 0 or 1/(1-p)
  Embedding out;
};

struct Forward {
  Matrix w_eff;
  std::vector<Encoded> items;  // [0, B) queries, [B, 2B) positives
  std::vector<std::vector<double>> probs;  // per query, over n+1 candidates
  double loss = 0.0;
};

bool dropout_active(const TrainConfig& c) { return c.mode == Mode::FullRegularized && c.dropout_rate > 0.0; }

Forward forward(const EncoderParams& params, const LoraAdapter* adapter, std::span<const TrainExample> batch,
                const TrainConfig& config, std::uint64_t step) {
  const std::size_t b = batch.size();
  const auto n = static_cast<std::size_t>(config.negatives);
  if (n >= b)
    throw Error("in-batch negatives (" + std::to_string(n) + ") must be fewer than the batch size (" +
                std::to_string(b) + ")");
  Forward f;
  f.w_eff = encoder::effective_projection(params, adapter);
  f.items.resize(2 * b);
  const bool drop = dropout_active(config);
  std::mt19937_64 rng(mix(config.seed, step));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double keep_scale = drop ? 1.0 / (1.0 - config.dropout_rate) : 1.0;
  for (std::size_t i = 0; i < 2 * b; ++i) {
    auto& it = f.items[i];
    it.tokens = i < b ? &batch[i].query : &batch[i - b].positive;
    it.pooled = encoder::mean_pool(params, *it.tokens);
    if (drop) {
      it.mask.resize(it.pooled.size());
      for (std::size_t j = 0; j < it.pooled.size(); ++j) {
        it.mask[j] = unit(rng) < config.dropout_rate ? 0.0 : keep_scale;
        it.pooled[j] *= it.mask[j];
      }
    }
    it.out = encoder::project(f.w_eff, params.proj_b, it.pooled);
  }
  const double tau = config.temperature;
  f.probs.resize(b);
  std::vector<double> scores(n + 1);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j <= n; ++j)
      scores[j] = encoder::similarity(f.items[i].out, f.items[b + (i + j) % b].out);
    f.loss += info_nce_from_scores(scores, tau);
    const double mx = *std::max_element(scores.begin(), scores.end()) / tau;
    double z = 0.0;
    auto& p = f.probs[i];
    p.resize(n + 1);
    for (std::size_t j = 0; j <= n; ++j) z += (p[j] = std::exp(scores[j] / tau - mx));
    for (auto& x : p) x /= z;
  }
  f.loss /= static_cast<double>(b);
  return f;
}

}  // namespace

std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::Full: return "full";
    case Mode::Lora: return "lora";
    case Mode::FullRegularized: return "full_regularized";
  }
  return "?";
}

std::optional<Mode> mode_from_name(std::string_view name) {
  for (auto m : {Mode::Full, Mode::Lora, Mode::FullRegularized})
    if (mode_name(m) == name) return m;
  return std::nullopt;
}

void TrainConfig::validate() const {
  if (!(temperature > 0)) throw Error("train config: temperature must be > 0");
  if (group_run < 1) throw Error("train config: group_run must be >= 1");
  if (negatives < 1) throw Error("train config: negatives must be >= 1");
  if (batch_size <= negatives) throw Error("train config: batch_size must exceed negatives");
  if (epochs < 0) throw Error("train config: epochs must be >= 0");
  if (eval_every < 1) throw Error("train config: eval_every must be >= 1");
  if (!(learning_rate >= 0)) throw Error("train config: learning_rate must be >= 0");
  if (!(dropout_rate >= 0 && dropout_rate < 1)) throw Error("train config: dropout_rate must be in [0, 1)");
  if (!(weight_decay >= 0)) throw Error("train config: weight_decay must be >= 0");
}

double info_nce_from_scores(std::span<const double> scores, double tau) {
  if (scores.size() < 2) throw Error("info_nce: need a positive and at least one negative");
  if (!(tau > 0)) throw Error("info_nce: temperature must be > 0");
  for (double s : scores)
    if (!std::isfinite(s)) throw Error("info_nce: non-finite similarity");
  const double l0 = scores[0] / tau;
  double mx = l0;
  for (double s : scores) mx = std::max(mx, s / tau);
  if (mx == l0) {
    // log(1 + sum exp(l_j - l0)) keeps tiny losses representable.
    double acc = 0.0;
    for (std::size_t j = 1; j < scores.size(); ++j) acc += std::exp(scores[j] / tau - l0);
    return std::log1p(acc);
  }
  double acc = 0.0;
  for (double s : scores) acc += std::exp(s / tau - mx);
  return (mx - l0) + std::log(acc);
}

double info_nce_loss(const Embedding& q, const Embedding& pos, std::span<const Embedding> negs, double tau) {
  if (negs.empty()) throw Error("info_nce: need at least one negative");
  for (const auto* e : {&q, &pos})
    if (!all_finite(e->values)) throw Error("info_nce: non-finite embedding");
  std::vector<double> scores;
  scores.push_back(encoder::similarity(q, pos));
  for (const auto& n : negs) {
    if (!all_finite(n.values)) throw Error("info_nce: non-finite embedding");
    scores.push_back(encoder::similarity(q, n));
  }
  return info_nce_from_scores(scores, tau);
}

double batch_loss(const EncoderParams& params, const LoraAdapter* adapter, std::span<const TrainExample> batch,
                  const TrainConfig& config, std::uint64_t step) {
  return forward(params, adapter, batch, config, step).loss;
}

Gradients loss_gradients(const EncoderParams& params, const LoraAdapter* adapter,
                         std::span<const TrainExample> batch, const TrainConfig& config, std::uint64_t step) {
  if (config.mode == Mode::Lora && !adapter) throw Error("loss_gradients: lora mode needs an adapter");
  Forward f = forward(params, adapter, batch, config, step);
  const std::size_t b = batch.size();
  const auto n = static_cast<std::size_t>(config.negatives);
  const std::size_t d = params.dim();
  const double tau = config.temperature;
  const double inv_b = 1.0 / static_cast<double>(b);

  // d loss / d embedding output, per item.
  std::vector<std::vector<double>> dout(2 * b, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j <= n; ++j) {
      const double g = (f.probs[i][j] - (j == 0 ? 1.0 : 0.0)) * inv_b / tau;
      const std::size_t p = b + (i + j) % b;
      const auto& qv = f.items[i].out.values;
      const auto& pv = f.items[p].out.values;
      for (std::size_t k = 0; k < d; ++k) {
        dout[i][k] += g * pv[k];
        dout[p][k] += g * qv[k];
      }
    }
  }

  Gradients g;
  g.loss = f.loss;
  Matrix dw_eff(d, d);
  std::vector<double> db(d, 0.0);
  const bool full = config.mode != Mode::Lora;
  if (full) g.embed = Matrix(params.vocab_size(), d);
  std::vector<double> dm(d);
  for (std::size_t it = 0; it < 2 * b; ++it) {
    const auto& item = f.items[it];
    const auto& de = dout[it];
    for (std::size_t r = 0; r < d; ++r) {
      db[r] += de[r];
      for (std::size_t c = 0; c < d; ++c) dw_eff.at(r, c) += de[r] * item.pooled[c];
    }
    if (!full) continue;
    for (std::size_t c = 0; c < d; ++c) {
      double acc = 0.0;
      for (std::size_t r = 0; r < d; ++r) acc += f.w_eff.at(r, c) * de[r];
      dm[c] = item.mask.empty() ? acc : acc * item.mask[c];
    }
    const double inv_len = 1.0 / static_cast<double>(item.tokens->size());
    for (TokenId t : *item.tokens) {
      auto row = g.embed.row(static_cast<std::size_t>(t));
      for (std::size_t c = 0; c < d; ++c) row[c] += dm[c] * inv_len;
    }
  }
  if (full) {
    g.proj_w = std::move(dw_eff);
    g.proj_b = std::move(db);
    return g;
  }
  // W_eff = W + s * B * A  =>  dA = s * B^T G,  dB = s * G * A^T
  const std::size_t r = adapter->rank;
  const double s = adapter->scale();
  g.lora_a = Matrix(r, d);
  g.lora_b = Matrix(d, r);
  for (std::size_t k = 0; k < r; ++k)
    for (std::size_t c = 0; c < d; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) acc += adapter->b.at(i, k) * dw_eff.at(i, c);
      g.lora_a.at(k, c) = s * acc;
    }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < r; ++k) {
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += dw_eff.at(i, c) * adapter->a.at(k, c);
      g.lora_b.at(i, k) = s * acc;
    }
  return g;
}

double dev_top1(const EncoderParams& params, const LoraAdapter* adapter, const DevSet& dev) {
  if (dev.queries.empty()) return 0.0;
  const Matrix w = encoder::effective_projection(params, adapter);
  std::vector<Embedding> passages;
  passages.reserve(dev.passages.size());
  for (const auto& p : dev.passages) passages.push_back(encoder::project(w, params.proj_b, encoder::mean_pool(params, p)));
  std::size_t hits = 0;
  for (const auto& q : dev.queries) {
    const Embedding qe = encoder::project(w, params.proj_b, encoder::mean_pool(params, q.tokens));
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < passages.size(); ++i) {
      const double s = encoder::similarity(qe, passages[i]);
      if (s > best_score) {
        best_score = s;
        best = i;
      }
    }
    if (std::find(q.gold.begin(), q.gold.end(), best) != q.gold.end()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(dev.queries.size());
}

TrainResult train(const EncoderParams& base, std::span<const TrainExample> data, const DevSet& dev,
                  const TrainConfig& config) {
  config.validate();
  base.validate();
  if (data.empty()) throw Error("train: no training examples");
  const auto n = static_cast<std::size_t>(config.negatives);
  if (data.size() <= n)
    throw Error("train: need more than " + std::to_string(n) + " examples for in-batch negatives");

  EncoderParams cur = base;
  std::optional<LoraAdapter> adapter;
  if (config.mode == Mode::Lora)
    adapter = LoraAdapter::init(base.dim(), config.lora_rank, config.lora_alpha, mix(config.seed, 0x10a));

  const auto bsz = static_cast<std::size_t>(config.batch_size);
  const std::size_t per_epoch = data.size() < bsz ? 1 : data.size() / bsz;
  const std::size_t batch_len = std::min(bsz, data.size());
  const int total = static_cast<int>(per_epoch) * config.epochs;

  TrainResult result;
  result.total_steps = total;
  result.params = config.mode == Mode::Lora ? encoder::materialize_lora(cur, *adapter) : cur;
  result.adapter = adapter;
  result.best_dev_top1 = -1.0;

  detail::AdamW opt(config.beta1, config.beta2, config.adam_eps);
  const double wd = config.mode == Mode::FullRegularized ? config.weight_decay : 0.0;

  std::vector<std::size_t> order(data.size());
  std::vector<TrainExample> batch(batch_len);
  int step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 rng(mix(config.seed, 0xe90c0000ULL + static_cast<std::uint64_t>(epoch)));
    if (config.batching == Batching::Grouped) {
      std::map<std::size_t, std::vector<std::size_t>> groups;
      for (std::size_t i = 0; i < data.size(); ++i) groups[data[i].group].push_back(i);
      std::vector<std::vector<std::size_t>> runs;
      const auto run_len = static_cast<std::size_t>(config.group_run);
      for (auto& [key, members] : groups) {
        std::shuffle(members.begin(), members.end(), rng);
        for (std::size_t i = 0; i < members.size(); i += run_len)
          runs.emplace_back(members.begin() + static_cast<std::ptrdiff_t>(i),
                            members.begin() + static_cast<std::ptrdiff_t>(std::min(members.size(), i + run_len)));
      }
      std::shuffle(runs.begin(), runs.end(), rng);
      order.clear();
      for (const auto& r : runs) order.insert(order.end(), r.begin(), r.end());
    } else {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), rng);
    }
    for (std::size_t bi = 0; bi < per_epoch; ++bi) {
      for (std::size_t k = 0; k < batch_len; ++k) batch[k] = data[order[bi * batch_len + k]];
      ++step;
      Gradients g;
      try {
        g = loss_gradients(cur, adapter ? &*adapter : nullptr, batch, config, static_cast<std::uint64_t>(step));
      } catch (const Error& e) {
        throw Error("step " + std::to_string(step) + ": " + e.what());
      }
      if (!std::isfinite(g.loss)) throw Error("non-finite loss at step " + std::to_string(step));
      const double lr = config.learning_rate * (1.0 - static_cast<double>(step - 1) / static_cast<double>(total));
      if (adapter) {
        opt.step({adapter->a.data, adapter->b.data}, {g.lora_a.data, g.lora_b.data}, lr, 0.0);
        if (!all_finite(adapter->a.data) || !all_finite(adapter->b.data))
          throw Error("non-finite adapter weights after step " + std::to_string(step));
      } else {
        opt.step({cur.embed.data, cur.proj_w.data, cur.proj_b}, {g.embed.data, g.proj_w.data, g.proj_b}, lr, wd);
        for (const auto& t : std::as_const(cur).tensors())
          if (!all_finite(t.values))
            throw Error("non-finite " + std::string(t.name) + " after step " + std::to_string(step));
      }
      TraceRow row{step, g.loss, std::nullopt};
      if (step % config.eval_every == 0 || step == total) {
        const double acc = dev_top1(cur, adapter ? &*adapter : nullptr, dev);
        row.dev_top1 = acc;
        if (acc > result.best_dev_top1) {
          result.best_dev_top1 = acc;
          result.best_step = step;
          result.params = adapter ? encoder::materialize_lora(cur, *adapter) : cur;
          result.adapter = adapter;
        }
      }
      result.trace.push_back(row);
    }
  }
  if (result.best_dev_top1 < 0) result.best_dev_top1 = dev_top1(result.params, nullptr, dev);
  result.base_after = cur;
  return result;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write trace: " + path.string());
  out << "step,loss,dev_top1\n";
  char buf[64];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof buf, "%.10g", r.loss);
    out << r.step << ',' << buf << ',';
    if (r.dev_top1) {
      std::snprintf(buf, sizeof buf, "%.6f", *r.dev_top1);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace tempmerge::train
