#include "tempmerge/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "tempmerge/error.hpp"
#include "tempmerge/text.hpp"

namespace tempmerge::experiment {

namespace fs = std::filesystem;
using retrieval::Index;
using retrieval::Retriever;
using retrieval::RetrievalRun;

ExperimentConfig::ExperimentConfig() {
  corpus.split_scale = 1.0;
  pretrain.batching = train::Batching::Shuffled;
  pretrain.learning_rate = 1e-2;
  pretrain.epochs = 20;
  finetune.batching = train::Batching::Grouped;
  finetune.learning_rate = 5e-2;
  finetune.epochs = 5;
  finetune.group_run = 2;
}

void ExperimentConfig::apply_seed(std::uint64_t s) {
  seed = s;
  corpus.seed = s;
  pretrain.seed = s;
  finetune.seed = s;
  router.seed = s;
}

void ExperimentConfig::validate() const {
  corpus.validate();
  pretrain.validate();
  finetune.validate();
  if (dim < 1) throw Error("dim must be >= 1");
  if (pretrain_crops < 0) throw Error("pretrain_crops must be >= 0");
  if (finetune.mode != train::Mode::Full) throw Error("finetune.mode is chosen per method; leave it at full");
  if (router.hidden < 1 || router.epochs < 1 || router.batch_size < 1) throw Error("router settings must be >= 1");
  if (ks.empty()) throw Error("ks must not be empty");
  for (int k : ks)
    if (k < 1) throw Error("k values must be >= 1");
}

std::size_t Workspace::passage_index(const std::string& id) const {
  auto it = passage_pos.find(id);
  if (it == passage_pos.end()) throw Error("unknown passage id " + id);
  return it->second;
}

Workspace make_workspace(std::vector<corpus::Passage> passages, std::vector<QueryRecord> queries,
                         encoder::Vocab vocab) {
  Workspace ws;
  ws.passages = std::move(passages);
  ws.queries = std::move(queries);
  ws.vocab = std::move(vocab);
  for (std::size_t i = 0; i < ws.passages.size(); ++i) {
    const auto& p = ws.passages[i];
    if (!ws.passage_pos.emplace(p.passage_id, i).second) throw Error("duplicate passage id " + p.passage_id);
    ws.passage_ids.push_back(p.passage_id);
    ws.passage_tokens.push_back(ws.vocab.encode_text(p.text));
  }
  for (const auto& q : ws.queries) {
    for (const auto& g : q.gold_passage_ids)
      if (!ws.passage_pos.count(g)) throw Error("query " + q.query_id + " has unknown gold passage " + g);
    ws.query_tokens.push_back(ws.vocab.encode_text(q.text));
  }
  return ws;
}

Workspace make_workspace(std::vector<corpus::Passage> passages, std::vector<QueryRecord> queries) {
  std::vector<std::string> texts;
  for (const auto& p : passages) texts.push_back(p.text);
  for (const auto& q : queries) texts.push_back(q.text);
  auto vocab = encoder::Vocab::build(texts);
  return make_workspace(std::move(passages), std::move(queries), std::move(vocab));
}

bool Scope::contains(const QueryRecord& q) const {
  switch (kind) {
    case Kind::NonTemporal: return !q.temporal();
    case Kind::Temporal: return q.temporal();
    case Kind::One: return q.specifier() == specifier;
    case Kind::All: return true;
  }
  return false;
}

std::string Scope::name() const {
  switch (kind) {
    case Kind::NonTemporal: return "nontemporal";
    case Kind::Temporal: return "temporal";
    case Kind::One: return std::string(timeparse::specifier_name(specifier));
    case Kind::All: return "all";
  }
  return "?";
}

std::vector<std::size_t> select_queries(const Workspace& ws, Split split, Scope scope) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ws.queries.size(); ++i)
    if (ws.queries[i].split == split && scope.contains(ws.queries[i])) out.push_back(i);
  return out;
}

namespace {

// Entity of a passage: generated doc ids start with "e<index>-".
std::size_t entity_group(const std::string& doc_id) {
  if (doc_id.size() > 1 && doc_id[0] == 'e') {
    std::size_t v = 0, i = 1;
    for (; i < doc_id.size() && doc_id[i] >= '0' && doc_id[i] <= '9'; ++i) v = v * 10 + (doc_id[i] - '0');
    if (i > 1) return v;
  }
  return static_cast<std::size_t>(fnv1a64(doc_id));
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::vector<std::vector<TokenId>> tokens_of(const Workspace& ws, std::span<const std::size_t> idx) {
  std::vector<std::vector<TokenId>> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(ws.query_tokens[i]);
  return out;
}

}  // namespace

std::vector<train::TrainExample> make_examples(const Workspace& ws, std::span<const std::size_t> queries) {
  std::vector<train::TrainExample> out;
  for (auto qi : queries) {
    const auto& q = ws.queries[qi];
    for (const auto& g : q.gold_passage_ids) {
      const std::size_t p = ws.passage_index(g);
      out.push_back({ws.query_tokens[qi], ws.passage_tokens[p], q.query_id, entity_group(ws.passages[p].doc_id)});
    }
  }
  return out;
}

train::DevSet make_dev_set(const Workspace& ws, std::span<const std::size_t> queries) {
  train::DevSet dev;
  dev.passages = ws.passage_tokens;
  for (auto qi : queries) {
    train::DevQuery dq;
    dq.tokens = ws.query_tokens[qi];
    for (const auto& g : ws.queries[qi].gold_passage_ids) dq.gold.push_back(ws.passage_index(g));
    dev.queries.push_back(std::move(dq));
  }
  return dev;
}

std::string checkpoint_name(const std::string& method, const std::string& scope, std::uint64_t seed, int step) {
  return method + "-" + scope + "-s" + std::to_string(seed) + "-step" + std::to_string(step);
}

std::vector<train::TrainExample> crop_pairs(const Workspace& ws, int per_passage, std::uint64_t seed) {
  std::vector<train::TrainExample> out;
  std::mt19937_64 rng(seed ^ 0x63726f7073ULL);
  auto crop = [&](const std::vector<TokenId>& t) {
    const std::size_t n = t.size();
    const std::size_t len = std::uniform_int_distribution<std::size_t>((n + 1) / 2, n)(rng);
    const std::size_t start = std::uniform_int_distribution<std::size_t>(0, n - len)(rng);
    return std::vector<TokenId>(t.begin() + static_cast<std::ptrdiff_t>(start),
                                t.begin() + static_cast<std::ptrdiff_t>(start + len));
  };
  for (int r = 0; r < per_passage; ++r)
    for (std::size_t i = 0; i < ws.passages.size(); ++i) {
      const auto& t = ws.passage_tokens[i];
      if (t.empty()) continue;
      out.push_back({crop(t), crop(t), ws.passage_ids[i], entity_group(ws.passages[i].doc_id)});
    }
  return out;
}

train::TrainResult pretrain_base(const Workspace& ws, const ExperimentConfig& cfg) {
  auto init = EncoderParams::init(ws.vocab.size(), cfg.dim, cfg.pretrain.seed, ws.vocab.hash());
  auto tr = select_queries(ws, Split::Train, Scope::nontemporal());
  auto dv = select_queries(ws, Split::Dev, Scope::nontemporal());
  if (tr.empty()) throw Error("no non-temporal training queries");
  auto examples = make_examples(ws, tr);
  auto crops = crop_pairs(ws, cfg.pretrain_crops, cfg.pretrain.seed);
  examples.insert(examples.end(), crops.begin(), crops.end());
  return train::train(init, examples, make_dev_set(ws, dv), cfg.pretrain);
}

train::TrainResult finetune(const Workspace& ws, const EncoderParams& base, Scope scope, train::Mode mode,
                            const ExperimentConfig& cfg) {
  auto tr = select_queries(ws, Split::Train, scope);
  auto dv = select_queries(ws, Split::Dev, scope);
  if (tr.empty()) throw Error("no training queries for scope " + scope.name());
  train::TrainConfig tc = cfg.finetune;
  tc.mode = mode;
  auto examples = make_examples(ws, tr);
  return train::train(base, examples, make_dev_set(ws, dv), tc);
}

train::RouterParams fit_router(const Workspace& ws, const EncoderParams& vanilla, const ExperimentConfig& cfg) {
  auto temporal = select_queries(ws, Split::Train, Scope::temporal());
  auto nontemporal = select_queries(ws, Split::Train, Scope::nontemporal());
  return train::train_router(tokens_of(ws, temporal), tokens_of(ws, nontemporal), vanilla, cfg.router);
}

std::vector<Specifier> merge_order(const Workspace& ws) {
  std::map<Specifier, std::size_t> counts;
  for (auto s : timeparse::kAllSpecifiers) counts[s] = select_queries(ws, Split::Train, Scope::one(s)).size();
  std::vector<Specifier> order(timeparse::kAllSpecifiers.begin(), timeparse::kAllSpecifiers.end());
  std::stable_sort(order.begin(), order.end(), [&](Specifier a, Specifier b) { return counts[a] > counts[b]; });
  return order;
}

RetrievalRun run_single(const Workspace& ws, const Index& index, const EncoderParams& params,
                        std::span<const std::size_t> queries, int k) {
  RetrievalRun run;
  run.strategy = retrieval::Strategy::Single;
  run.k = k;
  for (auto qi : queries)
    run.results[ws.queries[qi].query_id] = retrieval::search(index, encoder::encode(params, ws.query_tokens[qi]), k);
  return run;
}

RetrievalRun run_ensemble(const Workspace& ws, std::span<const Retriever> models, std::span<const std::size_t> queries,
                          int k) {
  RetrievalRun run;
  run.strategy = retrieval::Strategy::Ensemble;
  run.k = k;
  for (auto qi : queries)
    run.results[ws.queries[qi].query_id] = retrieval::ensemble_search(models, ws.query_tokens[qi], k);
  return run;
}

RetrievalRun run_routed(const Workspace& ws, const train::RouterParams& router, const Retriever& vanilla,
                        const Retriever& tuned, std::span<const std::size_t> queries, int k, double* tuned_share) {
  RetrievalRun run;
  run.strategy = retrieval::Strategy::Routed;
  run.k = k;
  std::size_t to_tuned = 0;
  for (auto qi : queries) {
    auto r = retrieval::routed_search(router, vanilla, tuned, ws.query_tokens[qi], k);
    to_tuned += r.routed_to_tuned ? 1 : 0;
    run.results[ws.queries[qi].query_id] = std::move(r.hits);
  }
  if (tuned_share)
    *tuned_share = queries.empty() ? 0.0 : static_cast<double>(to_tuned) / static_cast<double>(queries.size());
  return run;
}

eval::MetricsReport evaluate_on_test(const Workspace& ws, const eval::Qrels& qrels, const RetrievalRun& temporal,
                                     const RetrievalRun& nontemporal, std::span<const int> ks) {
  std::map<std::string, std::pair<RetrievalRun, eval::Qrels>> runs;
  runs["temporal"] = {temporal, qrels};
  runs["nontemporal"] = {nontemporal, qrels};
  auto report = eval::evaluate_runs(runs, ks);
  report.per_specifier = eval::per_specifier_report(temporal, ws.queries, qrels, 20);
  report.per_specifier.nontemporal = eval::recall_at_k(nontemporal, qrels, 20);
  return report;
}

void write_curve_csv(const fs::path& path, const std::vector<CurvePoint>& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write: " + path.string());
  out << "merge_count,dataset,recall_at_20\n";
  for (const auto& c : curve) {
    out << c.merge_count << ",temporal," << fmt("%.6f", c.temporal_recall) << '\n';
    out << c.merge_count << ",nontemporal," << fmt("%.6f", c.nontemporal_recall) << '\n';
  }
}

ScoreDump dump_scores(const EncoderParams& params, const encoder::Vocab& vocab, std::string_view query,
                      std::string_view passage) {
  const auto qt = vocab.encode_text(query);
  const auto pt = vocab.encode_text(passage);
  if (qt.empty()) throw Error("empty input: query has no tokens");
  if (pt.empty()) throw Error("empty input: passage has no tokens");
  const auto q = encoder::encode(params, qt);
  const std::size_t d = params.dim();
  // u = W^T q, so q . W e = u . e.
  std::vector<double> u(d, 0.0);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c) u[c] += params.proj_w.at(r, c) * q[r];
  ScoreDump dump;
  const double inv_n = 1.0 / static_cast<double>(pt.size());
  for (auto t : pt) {
    double s = 0.0;
    auto row = params.embed.row(static_cast<std::size_t>(t));
    for (std::size_t c = 0; c < d; ++c) s += u[c] * row[c];
    dump.rows.push_back({vocab.token(t), s * inv_n});
  }
  double bias = 0.0;
  for (std::size_t c = 0; c < d; ++c) bias += q[c] * params.proj_b[c];
  dump.rows.push_back({"[BIAS]", bias});
  dump.total = encoder::similarity(q, encoder::encode(params, pt));
  return dump;
}

std::string score_dump_csv(const ScoreDump& dump) {
  std::ostringstream out;
  out << "position,token,score\n";
  for (std::size_t i = 0; i < dump.rows.size(); ++i)
    out << i << ',' << dump.rows[i].token << ',' << fmt("%.17g", dump.rows[i].score) << '\n';
  out << "total,," << fmt("%.17g", dump.total) << '\n';
  return out.str();
}

const eval::MetricsReport& ExperimentResult::method(const std::string& name) const {
  for (const auto& [n, r] : methods)
    if (n == name) return r;
  throw Error("no method named " + name);
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write: " + path.string());
  out << text;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const fs::path& out_dir, const Logger& log) {
  cfg.validate();
  auto say = [&](const std::string& m) {
    if (log) log(m);
  };
  const bool write = !out_dir.empty();
  fs::path corpus_dir, ckpt_dir, run_dir;
  if (write) {
    corpus_dir = out_dir / cfg.corpus_dir;
    ckpt_dir = out_dir / cfg.checkpoint_dir;
    run_dir = out_dir / cfg.run_dir;
    for (const auto& d : {corpus_dir, ckpt_dir, run_dir}) fs::create_directories(d);
  }

  say("generating corpus");
  auto corpus = corpus::generate_corpus(cfg.corpus);
  if (write) {
    corpus::write_passages_jsonl(corpus_dir / "passages.jsonl", corpus.passages);
    corpus::write_queries_jsonl(corpus_dir / "queries.jsonl", corpus.queries);
  }
  const Workspace ws = make_workspace(std::move(corpus.passages), std::move(corpus.queries));
  if (write) ws.vocab.save(corpus_dir / "vocab.txt");
  const auto qrels = eval::qrels_from_queries(ws.queries);
  const auto test_t = select_queries(ws, Split::Test, Scope::temporal());
  const auto test_n = select_queries(ws, Split::Test, Scope::nontemporal());
  const int k = std::max(20, *std::max_element(cfg.ks.begin(), cfg.ks.end()));

  auto save = [&](const std::string& method, const std::string& scope, const train::TrainResult& tr) {
    if (!write) return;
    const auto stem = checkpoint_name(method, scope, cfg.seed, tr.best_step);
    encoder::save_checkpoint(tr.params, ckpt_dir / (stem + ".ckpt"));
    train::write_trace_csv(run_dir / (stem + ".trace.csv"), tr.trace);
  };

  ExperimentResult result;
  std::map<std::string, Index> indexes;
  auto evaluate = [&](const std::string& name, const EncoderParams& p) {
    Index& idx = indexes[name] = retrieval::build_index(p, ws.passage_ids, ws.passage_tokens);
    auto rt = run_single(ws, idx, p, test_t, k);
    auto rn = run_single(ws, idx, p, test_n, k);
    return std::make_pair(std::move(rt), std::move(rn));
  };
  auto record = [&](const std::string& name, const RetrievalRun& rt, const RetrievalRun& rn) {
    auto rep = evaluate_on_test(ws, qrels, rt, rn, cfg.ks);
    if (write) {
      RetrievalRun both = rt;
      both.results.insert(rn.results.begin(), rn.results.end());
      retrieval::write_trec_run(run_dir / (name + ".run"), both);
      eval::write_specifier_csv(run_dir / (name + ".per_specifier.csv"), rep.per_specifier);
    }
    say(name + ": temporal R@20 " + fmt("%.4f", rep.cells.at("temporal").at("Recall@20")) +
        ", nontemporal R@20 " + fmt("%.4f", rep.cells.at("nontemporal").at("Recall@20")));
    result.methods.emplace_back(name, std::move(rep));
  };

  say("pretraining base model");
  const auto base_tr = pretrain_base(ws, cfg);
  save("vanilla", "nontemporal", base_tr);
  const EncoderParams& vanilla = base_tr.params;
  auto vanilla_runs = evaluate("Vanilla", vanilla);
  record("Vanilla", vanilla_runs.first, vanilla_runs.second);

  say("fine-tuning on all temporal queries");
  const auto ft = finetune(ws, vanilla, Scope::temporal(), train::Mode::Full, cfg);
  save("ft", "temporal", ft);
  auto ft_runs = evaluate("FT", ft.params);
  record("FT", ft_runs.first, ft_runs.second);

  const auto ft_reg = finetune(ws, vanilla, Scope::temporal(), train::Mode::FullRegularized, cfg);
  save("ftreg", "temporal", ft_reg);
  auto reg_runs = evaluate("FT+Reg", ft_reg.params);
  record("FT+Reg", reg_runs.first, reg_runs.second);

  const auto lora = finetune(ws, vanilla, Scope::temporal(), train::Mode::Lora, cfg);
  save("lora", "temporal", lora);
  auto lora_runs = evaluate("LoRA", lora.params);
  record("LoRA", lora_runs.first, lora_runs.second);

  say("routing");
  const auto router = fit_router(ws, vanilla, cfg);
  if (write) train::save_router(router, ckpt_dir / (checkpoint_name("router", "all", cfg.seed, 0) + ".router"));
  {
    const Retriever rv{&vanilla, &indexes.at("Vanilla")};
    const Retriever rt{&ft.params, &indexes.at("FT")};
    auto a = run_routed(ws, router, rv, rt, test_t, k, &result.routed_tuned_share_temporal);
    auto b = run_routed(ws, router, rv, rt, test_n, k, &result.routed_tuned_share_nontemporal);
    record("Routing", a, b);
  }

  say("training specifier models");
  result.order = merge_order(ws);
  std::vector<EncoderParams> members;
  std::vector<std::string> member_names;
  for (auto s : result.order) {
    const auto tr = finetune(ws, vanilla, Scope::one(s), train::Mode::Full, cfg);
    const std::string name(timeparse::specifier_name(s));
    save("spec", name, tr);
    Index idx = retrieval::build_index(tr.params, ws.passage_ids, ws.passage_tokens);
    auto run = run_single(ws, idx, tr.params, test_t, k);
    result.specialists[s] = eval::per_specifier_report(run, ws.queries, qrels, 20);
    result.specialists[s].nontemporal = eval::recall_at_k(run_single(ws, idx, tr.params, test_n, k), qrels, 20);
    indexes["spec-" + name] = std::move(idx);
    members.push_back(tr.params);
    member_names.push_back(name);
    say("  " + name + ": best step " + std::to_string(tr.best_step) + "/" + std::to_string(tr.total_steps) +
        ", dev top-1 " + fmt("%.4f", tr.best_dev_top1));
  }

  {
    std::vector<Retriever> models;
    for (std::size_t i = 0; i < members.size(); ++i)
      models.push_back({&members[i], &indexes.at("spec-" + member_names[i])});
    auto a = run_ensemble(ws, models, test_t, k);
    auto b = run_ensemble(ws, models, test_n, k);
    record("Ensembling", a, b);
  }

  say("merging");
  const auto prefixes = merge::merge_sequence(members);
  for (std::size_t j = 0; j < prefixes.size(); ++j) {
    const auto& p = prefixes[j];
    Index idx = retrieval::build_index(p, ws.passage_ids, ws.passage_tokens);
    const auto rt = run_single(ws, idx, p, test_t, k);
    const auto rn = run_single(ws, idx, p, test_n, k);
    result.curve.push_back(
        {static_cast<int>(j + 1), eval::recall_at_k(rt, qrels, 20), eval::recall_at_k(rn, qrels, 20)});
    if (write)
      encoder::save_checkpoint(p, ckpt_dir / (checkpoint_name("merge" + std::to_string(j + 1), "prefix", cfg.seed, 0) +
                                              ".ckpt"));
    if (j + 1 == prefixes.size()) {
      if (write)
        encoder::save_checkpoint(p, ckpt_dir / (checkpoint_name("tsm", "all", cfg.seed, 0) + ".ckpt"));
      record("TSM", rt, rn);
    }
  }
  const EncoderParams& tsm = prefixes.back();

  result.tsm_report = merge::make_merge_report(vanilla, member_names, members, tsm);
  if (!result.tsm_report.convexity_holds())
    throw Error("norm convexity violated: merged change exceeds mean member change");
  result.weight_changes.emplace_back("FT", merge::weight_change(vanilla, ft.params));
  result.weight_changes.emplace_back("FT+Reg", merge::weight_change(vanilla, ft_reg.params));
  result.weight_changes.emplace_back("LoRA", merge::weight_change(vanilla, lora.params));
  for (std::size_t i = 0; i < members.size(); ++i)
    result.weight_changes.emplace_back(member_names[i], result.tsm_report.members[i].change);
  result.weight_changes.emplace_back("TSM", result.tsm_report.merged);

  if (write) {
    write_curve_csv(run_dir / "merge_curve.csv", result.curve);
    merge::write_weight_change_csv(run_dir / "weight_change.csv", result.tsm_report, "TSM");
    write_text(run_dir / "merge_report.txt", merge::format_merge_report(result.tsm_report));
    auto table = eval::compare_methods(result.methods);
    write_text(run_dir / "comparison.txt", table.to_text());
    write_text(run_dir / "comparison.csv", table.to_csv());
    write_text(run_dir / "summary.txt", format_result(result));
  }
  return result;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("spearman: length mismatch");
  auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t t = i; t <= j; ++t) r[idx[t]] = 0.5 * static_cast<double>(i + j) + 1.0;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += rx[i], my += ry[i];
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

bool DirectionalChecks::forgetting() const {
  return ft_nontemporal <= base_nontemporal - 0.05 && ft_temporal >= base_temporal + 0.10;
}
bool DirectionalChecks::balance() const {
  return tsm_temporal >= base_temporal + 0.10 && tsm_nontemporal >= ft_nontemporal + 0.05;
}
bool DirectionalChecks::curve_rises() const { return curve_rho > 0.5; }
bool DirectionalChecks::coverage() const {
  return cells_total > 0 && static_cast<double>(cells_satisfied) >= 0.8 * static_cast<double>(cells_total);
}

DirectionalChecks directional_checks(const ExperimentResult& r) {
  DirectionalChecks c;
  auto r20 = [&](const std::string& m, const std::string& ds) { return r.method(m).cells.at(ds).at("Recall@20"); };
  c.base_temporal = r20("Vanilla", "temporal");
  c.base_nontemporal = r20("Vanilla", "nontemporal");
  c.ft_temporal = r20("FT", "temporal");
  c.ft_nontemporal = r20("FT", "nontemporal");
  c.tsm_temporal = r20("TSM", "temporal");
  c.tsm_nontemporal = r20("TSM", "nontemporal");
  std::vector<double> counts, recalls;
  for (const auto& p : r.curve) {
    counts.push_back(p.merge_count);
    recalls.push_back(p.temporal_recall);
  }
  c.curve_rho = spearman(counts, recalls);
  const auto& tsm = r.method("TSM").per_specifier.by_specifier;
  for (const auto& [home, b] : r.specialists)
    for (const auto& [group, v] : b.by_specifier) {
      if (group == home || !tsm.count(group)) continue;
      ++c.cells_total;
      if (tsm.at(group) >= v) ++c.cells_satisfied;
    }
  return c;
}

static std::string fmt_right(std::string s, std::size_t w) {
  if (s.size() < w) s.insert(0, w - s.size(), ' ');
  return s;
}

std::string format_result(const ExperimentResult& r) {
  std::ostringstream out;
  out << eval::compare_methods(r.methods).to_text() << '\n';

  out << "Recall@20 by specifier (temporal test set)\n";
  auto width = [](Specifier s) { return std::max<std::size_t>(timeparse::specifier_name(s).size(), 7) + 1; };
  out << std::string(14, ' ');
  for (auto s : timeparse::kAllSpecifiers) out << fmt_right(std::string(timeparse::specifier_name(s)), width(s));
  out << " nontemporal\n";
  auto row = [&](const std::string& name, const eval::SpecifierBreakdown& b) {
    std::string n = name;
    n.resize(14, ' ');
    out << n;
    for (auto s : timeparse::kAllSpecifiers) {
      auto it = b.by_specifier.find(s);
      out << fmt_right(it == b.by_specifier.end() ? "-" : fmt("%.2f", 100.0 * it->second), width(s));
    }
    out << (b.nontemporal ? fmt("%12.2f", 100.0 * *b.nontemporal) : std::string(12, ' ')) << '\n';
  };
  for (const auto& [name, rep] : r.methods) row(name, rep.per_specifier);
  for (const auto& [s, b] : r.specialists) row("spec:" + std::string(timeparse::specifier_name(s)), b);
  out << '\n';

  out << "Merge sequence (";
  for (std::size_t i = 0; i < r.order.size(); ++i) out << (i ? ", " : "") << timeparse::specifier_name(r.order[i]);
  out << ")\nmerge_count  temporal_R@20  nontemporal_R@20\n";
  for (const auto& c : r.curve)
    out << fmt("%11.0f", c.merge_count) << fmt("%15.2f", 100.0 * c.temporal_recall)
        << fmt("%18.2f", 100.0 * c.nontemporal_recall) << '\n';
  out << '\n';

  out << "Weight change vs base\n";
  for (const auto& [name, wc] : r.weight_changes) {
    std::string n = name;
    n.resize(12, ' ');
    out << n << fmt("%.6f", wc.total) << '\n';
  }
  out << "member mean " << fmt("%.6f", r.tsm_report.member_mean) << '\n';
  out << "routed to tuned: temporal " << fmt("%.3f", r.routed_tuned_share_temporal) << ", nontemporal "
      << fmt("%.3f", r.routed_tuned_share_nontemporal) << '\n';
  return out.str();
}

}  // namespace tempmerge::experiment
