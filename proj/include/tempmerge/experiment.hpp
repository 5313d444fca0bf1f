#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tempmerge/corpuslab.hpp"
#include "tempmerge/encoder.hpp"
#include "tempmerge/evalkit.hpp"
#include "tempmerge/mergekit.hpp"
#include "tempmerge/retrieval.hpp"
#include "tempmerge/trainlab.hpp"

namespace tempmerge::experiment {

using corpus::QueryRecord;
using corpus::Split;
using encoder::EncoderParams;
using encoder::TokenId;
using timeparse::Specifier;

struct ExperimentConfig {
  ExperimentConfig();  // desk-scale defaults, see the README table

  std::uint64_t seed = 0;  // drives corpus generation and every training run
  corpus::CorpusConfig corpus;
  std::size_t dim = 32;
  train::TrainConfig pretrain;  // base model, non-temporal queries
  // Pretraining also pairs two random crops of each passage this many times
  // (unsupervised; no labels involved).
  int pretrain_crops = 2;
  train::TrainConfig finetune;  // all temporal fine-tuning runs
  train::RouterConfig router;
  std::vector<int> ks{5, 20};
  std::filesystem::path corpus_dir = "corpus";
  std::filesystem::path checkpoint_dir = "checkpoints";
  std::filesystem::path run_dir = "runs";

  // Copies the experiment seed into the corpus and training configs.
  void apply_seed(std::uint64_t s);
  void validate() const;  // throws Error
};

// Corpus plus its tokenized view under one vocabulary.
struct Workspace {
  std::vector<corpus::Passage> passages;
  std::vector<QueryRecord> queries;
  encoder::Vocab vocab;
  std::vector<std::string> passage_ids;
  std::vector<std::vector<TokenId>> passage_tokens;
  std::vector<std::vector<TokenId>> query_tokens;  // parallel to queries
  std::unordered_map<std::string, std::size_t> passage_pos;

  std::size_t passage_index(const std::string& id) const;  // throws Error
};

Workspace make_workspace(std::vector<corpus::Passage> passages, std::vector<QueryRecord> queries);
Workspace make_workspace(std::vector<corpus::Passage> passages, std::vector<QueryRecord> queries,
                         encoder::Vocab vocab);

// Which queries a run trains or evaluates on.
struct Scope {
  enum class Kind { NonTemporal, Temporal, One, All };
  Kind kind = Kind::Temporal;
  Specifier specifier = Specifier::In;  // Kind::One only

  static Scope nontemporal() { return {Kind::NonTemporal, Specifier::In}; }
  static Scope temporal() { return {Kind::Temporal, Specifier::In}; }
  static Scope one(Specifier s) { return {Kind::One, s}; }
  static Scope all() { return {Kind::All, Specifier::In}; }
  bool contains(const QueryRecord& q) const;
  std::string name() const;  // "nontemporal", "temporal", "<specifier>", "all"
};

std::vector<std::size_t> select_queries(const Workspace& ws, Split split, Scope scope);

// One example per (query, gold passage). The batching group is the entity the
// gold passage belongs to.
std::vector<train::TrainExample> make_examples(const Workspace& ws, std::span<const std::size_t> queries);
train::DevSet make_dev_set(const Workspace& ws, std::span<const std::size_t> queries);

// Checkpoint file stem: "<method>-<scope>-s<seed>-step<step>".
std::string checkpoint_name(const std::string& method, const std::string& scope, std::uint64_t seed, int step);

// Pairs of random contiguous crops (at least half the passage each) of every
// passage, `per_passage` pairs per passage.
std::vector<train::TrainExample> crop_pairs(const Workspace& ws, int per_passage, std::uint64_t seed);

// Random init followed by contrastive training on non-temporal queries and
// passage crop pairs.
train::TrainResult pretrain_base(const Workspace& ws, const ExperimentConfig& cfg);
// Fine-tunes `base` on the scope's train split, model selection on its dev split.
train::TrainResult finetune(const Workspace& ws, const EncoderParams& base, Scope scope, train::Mode mode,
                            const ExperimentConfig& cfg);
train::RouterParams fit_router(const Workspace& ws, const EncoderParams& vanilla, const ExperimentConfig& cfg);

// Specifiers ordered by training-set size, largest first (ties by table order).
std::vector<Specifier> merge_order(const Workspace& ws);

// Retrieval runs over the given queries.
retrieval::RetrievalRun run_single(const Workspace& ws, const retrieval::Index& index, const EncoderParams& params,
                                   std::span<const std::size_t> queries, int k);
retrieval::RetrievalRun run_ensemble(const Workspace& ws, std::span<const retrieval::Retriever> models,
                                     std::span<const std::size_t> queries, int k);
retrieval::RetrievalRun run_routed(const Workspace& ws, const train::RouterParams& router,
                                   const retrieval::Retriever& vanilla, const retrieval::Retriever& tuned,
                                   std::span<const std::size_t> queries, int k, double* tuned_share = nullptr);

// Recall/nDCG on the "temporal" and "nontemporal" test sets plus the
// per-specifier Recall@20 breakdown of the temporal run.
eval::MetricsReport evaluate_on_test(const Workspace& ws, const eval::Qrels& qrels,
                                     const retrieval::RetrievalRun& temporal, const retrieval::RetrievalRun& nontemporal,
                                     std::span<const int> ks);

struct CurvePoint {
  int merge_count = 0;
  double temporal_recall = 0.0;
  double nontemporal_recall = 0.0;
};
void write_curve_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& curve);

// Per-token contributions to a query-passage score. Row i is
// (1/n) q . W_eff E[t_i] for passage token i; the bias row is q . b. Rows sum
// to the dot product of the two embeddings.
struct TokenContribution {
  std::string token;
  double score = 0.0;
};
struct ScoreDump {
  std::vector<TokenContribution> rows;  // passage tokens in order, then "[BIAS]"
  double total = 0.0;
};
ScoreDump dump_scores(const EncoderParams& params, const encoder::Vocab& vocab, std::string_view query,
                      std::string_view passage);
std::string score_dump_csv(const ScoreDump& dump);

struct ExperimentResult {
  std::vector<std::pair<std::string, eval::MetricsReport>> methods;  // table order
  std::map<Specifier, eval::SpecifierBreakdown> specialists;         // per-specifier recall of each specialist
  std::vector<Specifier> order;
  std::vector<CurvePoint> curve;
  merge::MergeReport tsm_report;
  std::vector<std::pair<std::string, merge::WeightChange>> weight_changes;  // every fine-tuned model vs base
  double routed_tuned_share_temporal = 0.0;
  double routed_tuned_share_nontemporal = 0.0;

  const eval::MetricsReport& method(const std::string& name) const;  // throws Error
};

using Logger = std::function<void(const std::string&)>;

// Whole pipeline in memory. When `out_dir` is non-empty every artifact is also
// written below it (corpus, checkpoints, runs, reports).
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir = {},
                                const Logger& log = {});

// Spearman rank correlation with average ranks for ties; 0 when either
// side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

// The directional findings, measured on one experiment.
struct DirectionalChecks {
  double base_temporal = 0.0, base_nontemporal = 0.0;
  double ft_temporal = 0.0, ft_nontemporal = 0.0;
  double tsm_temporal = 0.0, tsm_nontemporal = 0.0;
  double curve_rho = 0.0;
  int cells_total = 0;      // (group, specialist) pairs off the specialist's home group
  int cells_satisfied = 0;  // where TSM recall >= specialist recall
  bool forgetting() const;  // FT: nontemporal -5 points, temporal +10 points vs base
  bool balance() const;     // TSM: temporal +10 vs base, nontemporal +5 vs FT
  bool curve_rises() const; // rho > 0.5
  bool coverage() const;    // >= 80% of cells satisfied
};
DirectionalChecks directional_checks(const ExperimentResult& r);

// Text summary: comparison table, per-specifier table, curve and weight changes.
std::string format_result(const ExperimentResult& r);

}  // namespace tempmerge::experiment
