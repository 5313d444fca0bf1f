// tempmerge: corpus generation, training, merging, retrieval and evaluation.
// Exit codes: 0 success, 1 usage error, 2 data or validation error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tempmerge/corpuslab.hpp"
#include "tempmerge/encoder.hpp"
#include "tempmerge/error.hpp"
#include "tempmerge/evalkit.hpp"
#include "tempmerge/experiment.hpp"
#include "tempmerge/manifest.hpp"
#include "tempmerge/mergekit.hpp"
#include "tempmerge/retrieval.hpp"
#include "tempmerge/text.hpp"
#include "tempmerge/trainlab.hpp"

namespace fs = std::filesystem;
using namespace tempmerge;
using experiment::ExperimentConfig;
using experiment::Scope;
using experiment::Workspace;
using timeparse::Specifier;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write: " + path.string());
  out << text;
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

ExperimentConfig load_config(const std::string& path) {
  return manifest::resolve(path.empty() ? std::nullopt : std::optional<fs::path>(path));
}

Workspace load_workspace(const ExperimentConfig& cfg) {
  const auto dir = cfg.corpus_dir;
  for (const char* f : {"passages.jsonl", "queries.jsonl", "vocab.txt"})
    if (!fs::exists(dir / f)) throw Error("missing " + (dir / f).string() + " (run gen-corpus first)");
  return experiment::make_workspace(corpus::read_passages_jsonl(dir / "passages.jsonl"),
                                    corpus::read_queries_jsonl(dir / "queries.jsonl"),
                                    encoder::Vocab::load(dir / "vocab.txt"));
}

encoder::EncoderParams load_model(const fs::path& path, const Workspace* ws = nullptr) {
  auto p = encoder::load_checkpoint(path);
  if (ws && p.vocab_hash != ws->vocab.hash())
    throw Error(path.string() + " was trained with a different vocabulary");
  return p;
}

Specifier parse_specifier(const std::string& name) {
  auto s = timeparse::specifier_from_name(name);
  if (!s) throw UsageError("unknown specifier '" + name + "'");
  return *s;
}

Scope parse_scope(const std::string& name) {
  if (name == "all") return Scope::all();
  if (name == "temporal") return Scope::temporal();
  if (name == "nontemporal") return Scope::nontemporal();
  return Scope::one(parse_specifier(name));
}

corpus::Split parse_split(const std::string& name) {
  auto s = corpus::split_from_name(name);
  if (!s) throw UsageError("unknown split '" + name + "'");
  return *s;
}

std::vector<int> parse_ks(const std::string& text, const std::vector<int>& fallback) {
  if (text.empty()) return fallback;
  std::vector<int> ks;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      ks.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw UsageError("--ks expects a comma list of integers");
    }
    if (ks.back() < 1) throw UsageError("--ks values must be >= 1");
  }
  return ks;
}

// --- gen-corpus ---------------------------------------------------------------

void cmd_gen_corpus(const ExperimentConfig& cfg) {
  auto c = corpus::generate_corpus(cfg.corpus);
  fs::create_directories(cfg.corpus_dir);
  corpus::write_passages_jsonl(cfg.corpus_dir / "passages.jsonl", c.passages);
  corpus::write_queries_jsonl(cfg.corpus_dir / "queries.jsonl", c.queries);
  eval::write_qrels(cfg.corpus_dir / "qrels.txt", eval::qrels_from_queries(c.queries));
  const auto ws = experiment::make_workspace(c.passages, c.queries);
  ws.vocab.save(cfg.corpus_dir / "vocab.txt");

  std::map<std::string, std::array<std::size_t, 3>> counts;
  std::vector<std::string> rows;
  for (auto s : timeparse::kAllSpecifiers) rows.emplace_back(timeparse::specifier_name(s));
  rows.emplace_back("nontemporal");
  for (const auto& q : c.queries) {
    const std::string row = q.constraint ? std::string(timeparse::specifier_name(q.constraint->specifier)) : "nontemporal";
    ++counts[row][static_cast<std::size_t>(q.split)];
  }
  std::printf("%-12s %7s %7s %7s\n", "specifier", "train", "dev", "test");
  std::array<std::size_t, 3> total{};
  for (const auto& r : rows) {
    const auto& n = counts[r];
    std::printf("%-12s %7zu %7zu %7zu\n", r.c_str(), n[0], n[1], n[2]);
    for (int i = 0; i < 3; ++i) total[i] += n[i];
  }
  std::printf("%-12s %7zu %7zu %7zu\n", "total", total[0], total[1], total[2]);
  std::printf("passages %zu, vocabulary %zu, written to %s\n", c.passages.size(), ws.vocab.size(),
              cfg.corpus_dir.string().c_str());
}

// --- train --------------------------------------------------------------------

struct TrainArgs {
  std::string specifier;
  bool vanilla = false, pooled = false, lora = false, router = false, regularized = false;
  std::string base, out;
};

void cmd_train(const ExperimentConfig& cfg, const TrainArgs& a) {
  const int picked = (a.vanilla ? 1 : 0) + (a.pooled ? 1 : 0) + (a.lora ? 1 : 0) + (a.router ? 1 : 0) +
                     (a.specifier.empty() ? 0 : 1);
  if (picked != 1) throw UsageError("train takes exactly one of --vanilla, --specifier, --pooled, --lora, --router");
  if (a.regularized && !a.pooled) throw UsageError("--regularized applies to --pooled only");
  if (!a.vanilla && a.base.empty()) throw UsageError("--base <checkpoint> is required");
  const auto ws = load_workspace(cfg);
  fs::create_directories(cfg.checkpoint_dir);
  fs::create_directories(cfg.run_dir);

  if (a.router) {
    const auto base = load_model(a.base, &ws);
    const auto r = experiment::fit_router(ws, base, cfg);
    const fs::path out = a.out.empty()
                             ? cfg.checkpoint_dir / (experiment::checkpoint_name("router", "all", cfg.seed, 0) + ".router")
                             : fs::path(a.out);
    ensure_parent(out);
    train::save_router(r, out);
    std::printf("router %s\n", out.string().c_str());
    return;
  }

  train::TrainResult tr;
  std::string method, scope;
  std::optional<std::uint64_t> base_hash;
  if (a.vanilla) {
    tr = experiment::pretrain_base(ws, cfg);
    method = "vanilla";
    scope = "nontemporal";
  } else {
    const auto base = load_model(a.base, &ws);
    base_hash = encoder::checkpoint_hash(base);
    if (a.pooled) {
      const auto mode = a.regularized ? train::Mode::FullRegularized : train::Mode::Full;
      tr = experiment::finetune(ws, base, Scope::temporal(), mode, cfg);
      method = a.regularized ? "ftreg" : "ft";
      scope = "temporal";
    } else if (a.lora) {
      tr = experiment::finetune(ws, base, Scope::temporal(), train::Mode::Lora, cfg);
      method = "lora";
      scope = "temporal";
      if (encoder::checkpoint_hash(load_model(a.base)) != *base_hash) throw Error("base checkpoint changed on disk");
    } else {
      const auto s = parse_specifier(a.specifier);
      tr = experiment::finetune(ws, base, Scope::one(s), train::Mode::Full, cfg);
      method = "spec";
      scope = std::string(timeparse::specifier_name(s));
    }
  }
  const auto stem = experiment::checkpoint_name(method, scope, cfg.seed, tr.best_step);
  const fs::path out = a.out.empty() ? cfg.checkpoint_dir / (stem + ".ckpt") : fs::path(a.out);
  ensure_parent(out);
  encoder::save_checkpoint(tr.params, out);
  train::write_trace_csv(cfg.run_dir / (stem + ".trace.csv"), tr.trace);
  std::printf("checkpoint %s\n", out.string().c_str());
  std::printf("hash %s\n", hex64(encoder::checkpoint_hash(tr.params)).c_str());
  if (base_hash) std::printf("base hash %s\n", hex64(*base_hash).c_str());
  std::printf("best step %d of %d, dev top-1 %s\n", tr.best_step, tr.total_steps, fixed(tr.best_dev_top1).c_str());
}

// --- merge --------------------------------------------------------------------

void cmd_merge(const ExperimentConfig& cfg, const std::vector<std::string>& inputs, bool sequence,
               const std::string& base_path, const std::string& out, const std::string& out_dir) {
  if (inputs.empty()) throw UsageError("--inputs needs at least one checkpoint");
  std::vector<encoder::EncoderParams> models;
  std::vector<std::string> names;
  for (const auto& p : inputs) {
    models.push_back(load_model(p));
    names.push_back(fs::path(p).stem().string());
  }
  const fs::path dir = out_dir.empty() ? cfg.checkpoint_dir : fs::path(out_dir);
  encoder::EncoderParams merged;
  if (sequence) {
    if (!out.empty()) throw UsageError("--out does not apply to --sequence; use --out-dir");
    fs::create_directories(dir);
    const auto prefixes = merge::merge_sequence(models);
    for (std::size_t j = 0; j < prefixes.size(); ++j) {
      const auto path =
          dir / (experiment::checkpoint_name("merge" + std::to_string(j + 1), "prefix", cfg.seed, 0) + ".ckpt");
      encoder::save_checkpoint(prefixes[j], path);
      std::printf("%zu %s %s\n", j + 1, hex64(encoder::checkpoint_hash(prefixes[j])).c_str(), path.string().c_str());
    }
    merged = prefixes.back();
  } else {
    merged = merge::merge_average(models);
    const fs::path path =
        out.empty() ? dir / (experiment::checkpoint_name("tsm", "all", cfg.seed, 0) + ".ckpt") : fs::path(out);
    ensure_parent(path);
    encoder::save_checkpoint(merged, path);
    std::printf("%s %s\n", hex64(encoder::checkpoint_hash(merged)).c_str(), path.string().c_str());
  }
  if (!base_path.empty()) {
    const auto report = merge::make_merge_report(load_model(base_path), names, models, merged);
    std::fputs(merge::format_merge_report(report).c_str(), stdout);
    if (!report.convexity_holds()) throw Error("norm convexity violated");
  }
}

// --- index / search -----------------------------------------------------------

void cmd_index(const ExperimentConfig& cfg, const std::string& model, const std::string& out) {
  const auto ws = load_workspace(cfg);
  const auto params = load_model(model, &ws);
  const auto index = retrieval::build_index(params, ws.passage_ids, ws.passage_tokens);
  const fs::path path = out.empty() ? cfg.run_dir / (fs::path(model).stem().string() + ".index") : fs::path(out);
  ensure_parent(path);
  retrieval::save_index(index, path);
  std::printf("indexed %zu passages, model %s, %s\n", index.size(), hex64(index.model_hash).c_str(),
              path.string().c_str());
}

struct SearchArgs {
  std::string strategy = "single";
  int k = 20;
  std::string split = "test", scope = "all";
  std::vector<std::string> models;
  std::string index, router, vanilla, tuned, out;
};

retrieval::Index index_for(const Workspace& ws, const encoder::EncoderParams& p) {
  return retrieval::build_index(p, ws.passage_ids, ws.passage_tokens);
}

void cmd_search(const ExperimentConfig& cfg, const SearchArgs& a) {
  auto strategy = retrieval::strategy_from_name(a.strategy);
  if (!strategy) throw UsageError("--strategy must be single, ensemble or routed");
  if (a.k < 1) throw UsageError("--k must be >= 1");
  const auto ws = load_workspace(cfg);
  const auto queries = experiment::select_queries(ws, parse_split(a.split), parse_scope(a.scope));
  if (queries.empty()) throw Error("no queries in split '" + a.split + "' and scope '" + a.scope + "'");

  retrieval::RetrievalRun run;
  std::string note;
  switch (*strategy) {
    case retrieval::Strategy::Single: {
      if (a.models.size() != 1) throw UsageError("single search takes exactly one --model");
      const auto p = load_model(a.models[0], &ws);
      const auto idx = a.index.empty() ? index_for(ws, p) : retrieval::load_index(a.index);
      if (idx.model_hash != encoder::checkpoint_hash(p)) throw Error("index was built from a different model");
      if (idx.passage_ids != ws.passage_ids) throw Error("index passages do not match the corpus");
      run = experiment::run_single(ws, idx, p, queries, a.k);
      break;
    }
    case retrieval::Strategy::Ensemble: {
      if (a.models.size() < 2) throw UsageError("ensemble search takes two or more --model");
      std::vector<encoder::EncoderParams> params;
      for (const auto& m : a.models) params.push_back(load_model(m, &ws));
      std::vector<retrieval::Index> idx;
      for (const auto& p : params) idx.push_back(index_for(ws, p));
      std::vector<retrieval::Retriever> rs;
      for (std::size_t i = 0; i < params.size(); ++i) rs.push_back({&params[i], &idx[i]});
      run = experiment::run_ensemble(ws, rs, queries, a.k);
      break;
    }
    case retrieval::Strategy::Routed: {
      if (a.router.empty() || a.vanilla.empty() || a.tuned.empty())
        throw UsageError("routed search needs --router, --vanilla and --tuned");
      const auto router = train::load_router(a.router);
      const auto pv = load_model(a.vanilla, &ws);
      const auto pt = load_model(a.tuned, &ws);
      const auto iv = index_for(ws, pv);
      const auto it = index_for(ws, pt);
      double share = 0.0;
      run = experiment::run_routed(ws, router, {&pv, &iv}, {&pt, &it}, queries, a.k, &share);
      note = ", routed to tuned " + fixed(share, 3);
      break;
    }
  }
  const fs::path path = a.out.empty() ? cfg.run_dir / (a.strategy + ".run") : fs::path(a.out);
  ensure_parent(path);
  retrieval::write_trec_run(path, run);
  std::printf("%zu queries, k %d%s, %s\n", run.results.size(), a.k, note.c_str(), path.string().c_str());
}

// --- eval ---------------------------------------------------------------------

void cmd_eval(const ExperimentConfig& cfg, const std::string& run_path, const std::string& qrels_path,
              const std::string& ks_text, const std::string& queries_path, const std::string& csv) {
  const auto run = retrieval::read_trec_run(run_path);
  const auto qrels = eval::read_qrels(qrels_path);
  const auto ks = parse_ks(ks_text, cfg.ks);

  std::vector<corpus::QueryRecord> queries;
  const fs::path qp = queries_path.empty() ? cfg.corpus_dir / "queries.jsonl" : fs::path(queries_path);
  if (!queries_path.empty() || fs::exists(qp)) queries = corpus::read_queries_jsonl(qp);

  std::map<std::string, std::pair<retrieval::RetrievalRun, eval::Qrels>> datasets;
  if (queries.empty()) {
    datasets["all"] = {run, qrels};
  } else {
    std::set<std::string> temporal, nontemporal;
    for (const auto& q : queries) (q.constraint ? temporal : nontemporal).insert(q.query_id);
    auto t = eval::restrict_run(run, temporal);
    auto n = eval::restrict_run(run, nontemporal);
    if (!t.results.empty()) datasets["temporal"] = {t, qrels};
    if (!n.results.empty()) datasets["nontemporal"] = {n, qrels};
    if (datasets.empty()) throw Error("run has no queries from " + qp.string());
  }
  const auto report = eval::evaluate_runs(datasets, ks);
  std::printf("%-12s %-10s %s\n", "dataset", "metric", "value");
  for (const auto& [ds, cells] : report.cells)
    for (const auto& [metric, v] : cells) std::printf("%-12s %-10s %s\n", ds.c_str(), metric.c_str(), fixed(v).c_str());
  if (!queries.empty() && datasets.count("temporal")) {
    auto b = eval::per_specifier_report(datasets["temporal"].first, queries, qrels, 20);
    if (datasets.count("nontemporal")) b.nontemporal = eval::recall_at_k(datasets["nontemporal"].first, qrels, 20);
    for (const auto& [s, v] : b.by_specifier)
      std::printf("%-12s %-10s %s\n", std::string(timeparse::specifier_name(s)).c_str(), "Recall@20", fixed(v).c_str());
    if (!csv.empty()) {
      ensure_parent(csv);
      eval::write_specifier_csv(csv, b);
    }
  } else if (!csv.empty()) {
    throw Error("--csv needs temporal queries in the run and a queries file");
  }
}

// --- analyses -----------------------------------------------------------------

void cmd_analyze_weights(const std::string& base_path, const std::vector<std::string>& inputs,
                         const std::string& merged_path, const std::string& out) {
  if (inputs.empty()) throw UsageError("--models needs at least one checkpoint");
  const auto base = load_model(base_path);
  std::vector<encoder::EncoderParams> models;
  std::vector<std::string> names;
  for (const auto& p : inputs) {
    models.push_back(load_model(p));
    names.push_back(fs::path(p).stem().string());
  }
  const auto merged = merged_path.empty() ? merge::merge_average(models) : load_model(merged_path);
  const auto report = merge::make_merge_report(base, names, models, merged);
  const std::string merged_name = merged_path.empty() ? "merged" : fs::path(merged_path).stem().string();
  if (!out.empty()) {
    ensure_parent(out);
    merge::write_weight_change_csv(out, report, merged_name);
  }
  std::fputs(merge::format_merge_report(report).c_str(), stdout);
  if (!report.convexity_holds()) throw Error("norm convexity violated");
}

void cmd_dump_scores(const ExperimentConfig& cfg, const std::string& model, const std::string& query,
                     std::string passage, const std::string& passage_id, const std::string& out) {
  if (passage.empty() == passage_id.empty()) throw UsageError("give exactly one of --passage and --passage-id");
  const auto ws = load_workspace(cfg);
  if (!passage_id.empty()) passage = ws.passages[ws.passage_index(passage_id)].text;
  const auto params = load_model(model, &ws);
  const auto csv = experiment::score_dump_csv(experiment::dump_scores(params, ws.vocab, query, passage));
  if (out.empty())
    std::fputs(csv.c_str(), stdout);
  else
    write_file(out, csv);
}

void cmd_experiment(const ExperimentConfig& cfg, const std::string& out, bool quiet) {
  auto log = [quiet](const std::string& m) {
    if (!quiet) std::fprintf(stderr, "%s\n", m.c_str());
  };
  const auto r = experiment::run_experiment(cfg, out, log);
  std::fputs(experiment::format_result(r).c_str(), stdout);
  const auto d = experiment::directional_checks(r);
  std::printf("\nforgetting %s, balance %s, curve rho %.3f, coverage %d/%d\n", d.forgetting() ? "yes" : "no",
              d.balance() ? "yes" : "no", d.curve_rho, d.cells_satisfied, d.cells_total);
  if (!out.empty()) write_file(fs::path(out) / "manifest.txt", manifest::format(cfg));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tempmerge: time-specifier model merging lab"};
  app.require_subcommand(1);
  std::string config;
  app.add_option("--config", config, "experiment manifest (key = value lines)");

  auto* gen = app.add_subcommand("gen-corpus", "generate the synthetic corpus and qrels");
  gen->add_option("--config", config, "experiment manifest");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "pretrain, fine-tune or fit the router");
  tr->add_option("--config", config, "experiment manifest");
  tr->add_flag("--vanilla", ta.vanilla, "pretrain the base model");
  tr->add_option("--specifier", ta.specifier, "fine-tune on one specifier's queries");
  tr->add_flag("--pooled", ta.pooled, "fine-tune on all temporal queries");
  tr->add_flag("--regularized", ta.regularized, "with --pooled: weight decay and dropout");
  tr->add_flag("--lora", ta.lora, "LoRA fine-tune on all temporal queries");
  tr->add_flag("--router", ta.router, "fit the temporal/non-temporal query router");
  tr->add_option("--base", ta.base, "base checkpoint");
  tr->add_option("--out", ta.out, "output path");

  std::vector<std::string> merge_inputs;
  bool sequence = false;
  std::string merge_base, merge_out, merge_out_dir;
  auto* mg = app.add_subcommand("merge", "average checkpoints");
  mg->add_option("--config", config, "experiment manifest");
  mg->add_option("--inputs", merge_inputs, "checkpoints, in merge order")->required();
  mg->add_flag("--sequence", sequence, "emit every prefix merge");
  mg->add_option("--base", merge_base, "base checkpoint; prints the weight-change report");
  mg->add_option("--out", merge_out, "output checkpoint");
  mg->add_option("--out-dir", merge_out_dir, "output directory");

  std::string index_model, index_out;
  auto* ix = app.add_subcommand("index", "encode the corpus");
  ix->add_option("--config", config, "experiment manifest");
  ix->add_option("--model", index_model, "checkpoint")->required();
  ix->add_option("--out", index_out, "index file");

  SearchArgs sa;
  auto* se = app.add_subcommand("search", "retrieve for a query set and write a TREC run");
  se->add_option("--config", config, "experiment manifest");
  se->add_option("--strategy", sa.strategy, "single, ensemble or routed")->capture_default_str();
  se->add_option("--k", sa.k, "hits per query")->capture_default_str();
  se->add_option("--split", sa.split, "train, dev or test")->capture_default_str();
  se->add_option("--scope", sa.scope, "all, temporal, nontemporal or a specifier")->capture_default_str();
  se->add_option("--model", sa.models, "checkpoint(s)");
  se->add_option("--index", sa.index, "prebuilt index (single)");
  se->add_option("--router", sa.router, "router file (routed)");
  se->add_option("--vanilla", sa.vanilla, "vanilla checkpoint (routed)");
  se->add_option("--tuned", sa.tuned, "fine-tuned checkpoint (routed)");
  se->add_option("--out", sa.out, "run file");

  std::string ev_run, ev_qrels, ev_ks, ev_queries, ev_csv;
  auto* ev = app.add_subcommand("eval", "score a run against qrels");
  ev->add_option("--config", config, "experiment manifest");
  ev->add_option("--run", ev_run, "TREC run file")->required();
  ev->add_option("--qrels", ev_qrels, "qrels file")->required();
  ev->add_option("--ks", ev_ks, "cutoffs, e.g. 5,20");
  ev->add_option("--queries", ev_queries, "queries.jsonl for the dataset split");
  ev->add_option("--csv", ev_csv, "per-specifier Recall@20 CSV");

  std::string aw_base, aw_merged, aw_out;
  std::vector<std::string> aw_models;
  auto* aw = app.add_subcommand("analyze-weights", "weight change of checkpoints against a base");
  aw->add_option("--config", config, "experiment manifest");
  aw->add_option("--base", aw_base, "base checkpoint")->required();
  aw->add_option("--models", aw_models, "fine-tuned checkpoints")->required();
  aw->add_option("--merged", aw_merged, "merged checkpoint (default: average of --models)");
  aw->add_option("--out", aw_out, "CSV path");

  std::string ds_model, ds_query, ds_passage, ds_passage_id, ds_out;
  auto* ds = app.add_subcommand("dump-scores", "per-token score contributions as CSV");
  ds->add_option("--config", config, "experiment manifest");
  ds->add_option("--model", ds_model, "checkpoint")->required();
  ds->add_option("--query", ds_query, "query text")->required();
  ds->add_option("--passage", ds_passage, "passage text");
  ds->add_option("--passage-id", ds_passage_id, "corpus passage id");
  ds->add_option("--out", ds_out, "CSV path (default stdout)");

  std::string ex_out;
  bool ex_quiet = false;
  auto* ex = app.add_subcommand("experiment", "run the whole pipeline and print the tables");
  ex->add_option("--config", config, "experiment manifest");
  ex->add_option("--out", ex_out, "write every artifact below this directory");
  ex->add_flag("--quiet", ex_quiet, "no progress log");

  auto* pc = app.add_subcommand("print-config", "print the resolved manifest");
  pc->add_option("--config", config, "experiment manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    const auto cfg = load_config(config);
    if (*gen) cmd_gen_corpus(cfg);
    else if (*tr) cmd_train(cfg, ta);
    else if (*mg) cmd_merge(cfg, merge_inputs, sequence, merge_base, merge_out, merge_out_dir);
    else if (*ix) cmd_index(cfg, index_model, index_out);
    else if (*se) cmd_search(cfg, sa);
    else if (*ev) cmd_eval(cfg, ev_run, ev_qrels, ev_ks, ev_queries, ev_csv);
    else if (*aw) cmd_analyze_weights(aw_base, aw_models, aw_merged, aw_out);
    else if (*ds) cmd_dump_scores(cfg, ds_model, ds_query, ds_passage, ds_passage_id, ds_out);
    else if (*ex) cmd_experiment(cfg, ex_out, ex_quiet);
    else if (*pc) std::fputs(manifest::format(cfg).c_str(), stdout);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
