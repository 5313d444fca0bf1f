#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tempmerge/encoder.hpp"

namespace tempmerge::train {

using encoder::Embedding;
using encoder::EncoderParams;
using encoder::LoraAdapter;
using encoder::Matrix;
using encoder::TokenId;

struct TrainExample {
  std::vector<TokenId> query;
  std::vector<TokenId> positive;  // a gold passage of the query
  std::string query_id;
  // Batching key; examples sharing a key are kept adjacent when batches are
  // grouped (e.g. the entity the query is about).
  std::size_t group = 0;
};

enum class Mode { Full, Lora, FullRegularized };
std::string_view mode_name(Mode m);
std::optional<Mode> mode_from_name(std::string_view name);

enum class Batching { Shuffled, Grouped };

struct TrainConfig {
  double learning_rate = 1e-4;
  int epochs = 5;
  int batch_size = 64;
  double temperature = 1.0;
  int negatives = 5;
  // Only applied in FullRegularized mode.
  double weight_decay = 0.01;
  double dropout_rate = 0.1;
  std::uint64_t seed = 0;
  int eval_every = 50;
  Mode mode = Mode::Full;
  Batching batching = Batching::Grouped;
  // Grouped batching lays out each group's examples in runs of this length, so
  // a member's negatives mix its own group with others.
  int group_run = 2;
  std::size_t lora_rank = 4;
  double lora_alpha = 8.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;  // throws Error
};

// -log softmax of the positive among {pos} U negs, similarities scaled by 1/tau.
double info_nce_loss(const Embedding& q, const Embedding& pos, std::span<const Embedding> negs, double tau);
// Same loss from raw similarity scores; index 0 is the positive.
double info_nce_from_scores(std::span<const double> scores, double tau);

// Gradient of the mean batch loss. In Full modes embed/proj_w/proj_b are
// filled; in Lora mode lora_a/lora_b are.
struct Gradients {
  double loss = 0.0;
  Matrix embed;
  Matrix proj_w;
  std::vector<double> proj_b;
  Matrix lora_a;
  Matrix lora_b;
};

// Negatives of member i are the positives of members i+1..i+n (cyclic).
// Dropout masks (FullRegularized only) come from a stream keyed by
// (config.seed, step), so repeated calls with the same step are identical.
Gradients loss_gradients(const EncoderParams& params, const LoraAdapter* adapter,
                         std::span<const TrainExample> batch, const TrainConfig& config, std::uint64_t step = 0);

// Mean batch loss only (same masks as loss_gradients for the same step).
double batch_loss(const EncoderParams& params, const LoraAdapter* adapter, std::span<const TrainExample> batch,
                  const TrainConfig& config, std::uint64_t step = 0);

struct DevQuery {
  std::vector<TokenId> tokens;
  std::vector<std::size_t> gold;  // passage indices
};

// Held-out queries plus the full tokenized passage list they are ranked over.
struct DevSet {
  std::vector<std::vector<TokenId>> passages;
  std::vector<DevQuery> queries;
};

// Fraction of dev queries whose single best passage is gold (ties -> lower index).
double dev_top1(const EncoderParams& params, const LoraAdapter* adapter, const DevSet& dev);

struct TraceRow {
  int step = 0;
  double loss = 0.0;
  std::optional<double> dev_top1;
};

struct TrainResult {
  EncoderParams params;               // best checkpoint (adapter materialized in Lora mode)
  std::optional<LoraAdapter> adapter; // best adapter in Lora mode
  EncoderParams base_after;           // base tensors at the end of training
  int best_step = 0;
  double best_dev_top1 = 0.0;
  int total_steps = 0;
  std::vector<TraceRow> trace;
};

// AdamW with a linear decay to zero and no warmup. The dev set is scored every
// eval_every steps and at the last step; the best-scoring checkpoint is
// returned (earliest on ties). Throws Error on a non-finite loss, naming the step.
TrainResult train(const EncoderParams& base, std::span<const TrainExample> data, const DevSet& dev,
                  const TrainConfig& config);

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace);

// --- query router ------------------------------------------------------------

// Two-layer classifier: tanh hidden layer, softmax over {non-temporal, temporal}.
struct RouterParams {
  Matrix w1;               // [h x d]
  std::vector<double> b1;  // [h]
  Matrix w2;               // [2 x h]
  std::vector<double> b2;  // [2]

  static RouterParams init(std::size_t dim, std::size_t hidden, std::uint64_t seed);
  void validate() const;
  bool operator==(const RouterParams&) const = default;
};

inline constexpr int kNonTemporal = 0;
inline constexpr int kTemporal = 1;

struct LabeledEmbedding {
  std::vector<double> x;
  int label = kNonTemporal;
};

struct RouterConfig {
  std::size_t hidden = 16;
  double learning_rate = 1e-2;
  int epochs = 30;
  int batch_size = 32;
  std::uint64_t seed = 0;
};

std::array<double, 2> router_probs(const RouterParams& r, std::span<const double> x);
int router_predict(const RouterParams& r, std::span<const double> x);
double router_accuracy(const RouterParams& r, std::span<const LabeledEmbedding> data);

struct RouterGradients {
  double loss = 0.0;
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;
};
// Mean cross-entropy over the batch and its gradient.
RouterGradients router_gradients(const RouterParams& r, std::span<const LabeledEmbedding> batch);
double router_loss(const RouterParams& r, std::span<const LabeledEmbedding> batch);

// Trains on labeled embeddings, keeping the weights with the best dev accuracy
// (checked once per epoch). Throws Error when either class is missing.
RouterParams train_router(std::span<const LabeledEmbedding> train_set, std::span<const LabeledEmbedding> dev_set,
                          const RouterConfig& config);

// Convenience: embeds the token lists with frozen vanilla params first.
RouterParams train_router(const std::vector<std::vector<TokenId>>& temporal,
                          const std::vector<std::vector<TokenId>>& nontemporal, const EncoderParams& vanilla,
                          const RouterConfig& config, double dev_fraction = 0.2);

void save_router(const RouterParams& r, const std::filesystem::path& path);
RouterParams load_router(const std::filesystem::path& path);

}  // namespace tempmerge::train
