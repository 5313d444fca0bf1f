#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "tempmerge/encoder.hpp"
#include "tempmerge/evalkit.hpp"
#include "tempmerge/retrieval.hpp"
#include "tempmerge/text.hpp"

namespace fs = std::filesystem;
using namespace tempmerge;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(TEMPMERGE_BIN) + " " + args + " 2>&1";
  Result r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

Result ok(const std::string& args) {
  auto r = run(args);
  INFO(args, "\n", r.out);
  REQUIRE(r.code == 0);
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Value of the first line starting with `key` ("hash ..." -> "...").
std::string field(const std::string& out, const std::string& key) {
  std::istringstream in(out);
  std::string line;
  while (std::getline(in, line))
    if (line.rfind(key + " ", 0) == 0) return line.substr(key.size() + 1);
  return {};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

const char* kSpecifiers[] = {"from_to", "in", "between", "before", "after", "in_late", "in_early"};

struct Workdir {
  fs::path dir;
  std::string cfg;

  explicit Workdir(const std::string& name) : dir(fs::temp_directory_path() / name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream out(dir / "tiny.txt");
    out << "seed = 5\n"
           "corpus.entity_count = 12\n"
           "corpus.queries_per_specifier = 20\n"
           "corpus.nontemporal_query_count = 40\n"
           "corpus.split_scale = 0.02\n"
           "corpus.nontemporal_train_count = 200\n"
           "corpus.nontemporal_dev_count = 40\n"
           "pretrain.epochs = 2\n"
           "finetune.epochs = 1\n"
        << "paths.corpus_dir = " << (dir / "corpus").string() << "\n"
        << "paths.checkpoint_dir = " << (dir / "ckpt").string() << "\n"
        << "paths.run_dir = " << (dir / "runs").string() << "\n";
    cfg = "--config " + (dir / "tiny.txt").string();
  }
  ~Workdir() { fs::remove_all(dir); }
  std::string path(const std::string& rel) const { return (dir / rel).string(); }
};

}  // namespace

TEST_CASE("gen-corpus is deterministic and its table adds up") {
  Workdir w("tempmerge_cli_gen");
  const auto first = ok("gen-corpus " + w.cfg);
  const auto files = {"passages.jsonl", "queries.jsonl", "qrels.txt", "vocab.txt"};
  std::map<std::string, std::string> before;
  for (const char* f : files) before[f] = slurp(w.dir / "corpus" / f);
  ok("gen-corpus " + w.cfg);
  for (const char* f : files) {
    CHECK(!before[f].empty());
    CHECK(slurp(w.dir / "corpus" / f) == before[f]);
  }

  std::size_t sum[3] = {0, 0, 0}, total[3] = {0, 0, 0};
  for (const auto& l : lines(first.out)) {
    std::istringstream in(l);
    std::string name;
    std::size_t a, b, c;
    if (!(in >> name >> a >> b >> c)) continue;
    if (name == "total") {
      total[0] = a, total[1] = b, total[2] = c;
    } else {
      sum[0] += a, sum[1] += b, sum[2] += c;
    }
  }
  CHECK(total[2] > 0);
  for (int i = 0; i < 3; ++i) CHECK(sum[i] == total[i]);
  CHECK(lines(slurp(w.dir / "corpus" / "queries.jsonl")).size() == total[0] + total[1] + total[2]);
}

TEST_CASE("train, merge, search and eval through the CLI") {
  Workdir w("tempmerge_cli_pipeline");
  ok("gen-corpus " + w.cfg);

  const auto van = ok("train --vanilla " + w.cfg);
  const auto base = field(van.out, "checkpoint");
  const auto base_hash = field(van.out, "hash");
  REQUIRE(fs::exists(base));
  CHECK(fs::path(base).filename().string().rfind("vanilla-nontemporal-s5-step", 0) == 0);

  std::vector<std::string> specs;
  std::set<std::string> hashes;
  for (const char* s : kSpecifiers) {
    const auto r = ok("train " + w.cfg + " --specifier " + s + " --base " + base);
    CHECK(field(r.out, "base hash") == base_hash);
    specs.push_back(field(r.out, "checkpoint"));
    hashes.insert(field(r.out, "hash"));
  }
  CHECK(hashes.size() == 7);
  CHECK(!hashes.count(base_hash));

  const auto pooled = ok("train " + w.cfg + " --pooled --base " + base);
  CHECK(!hashes.count(field(pooled.out, "hash")));
  CHECK(field(pooled.out, "hash") != base_hash);

  const auto base_bytes = slurp(base);
  const auto lora = ok("train " + w.cfg + " --lora --base " + base);
  CHECK(slurp(base) == base_bytes);
  CHECK(field(lora.out, "base hash") == base_hash);
  CHECK(field(lora.out, "hash") != base_hash);

  std::string inputs;
  for (const auto& s : specs) inputs += " " + s;
  const auto seq = ok("merge " + w.cfg + " --sequence --out-dir " + w.path("seq") + " --inputs" + inputs);
  const auto seq_lines = lines(seq.out);
  REQUIRE(seq_lines.size() == 7);
  for (int j = 1; j <= 7; ++j) CHECK(fs::exists(w.dir / "seq" / ("merge" + std::to_string(j) + "-prefix-s5-step0.ckpt")));
  const auto full = ok("merge " + w.cfg + " --out " + w.path("tsm.ckpt") + " --base " + base + " --inputs" + inputs);
  const auto full_hash = lines(full.out).front().substr(0, 16);
  CHECK(seq_lines.back().substr(2, 16) == full_hash);
  CHECK(full.out.find("convexity = ok") != std::string::npos);
  CHECK(seq_lines.front().substr(2, 16) ==
        hex64(encoder::checkpoint_hash(encoder::load_checkpoint(specs.front()))));

  // A run that ranks each query's relevant passages first scores 1 everywhere.
  const auto qrels = eval::read_qrels(w.dir / "corpus" / "qrels.txt");
  retrieval::RetrievalRun oracle;
  oracle.k = 20;
  for (const auto& [qid, rel] : qrels) {
    int rank = 0;
    for (const auto& pid : rel) oracle.results[qid].push_back({pid, 1.0 - 0.01 * rank, rank + 1}), ++rank;
  }
  retrieval::write_trec_run(w.dir / "oracle.run", oracle);
  const auto ev = ok("eval " + w.cfg + " --run " + w.path("oracle.run") + " --qrels " + w.path("corpus/qrels.txt"));
  int values = 0;
  for (const auto& l : lines(ev.out)) {
    std::istringstream in(l);
    std::string ds, metric, value;
    if (!(in >> ds >> metric >> value) || ds == "dataset") continue;
    CHECK(value == "1.0000");
    ++values;
  }
  CHECK(values >= 8 + 7);

  // Search writes a run that survives a read/write round trip.
  ok("index " + w.cfg + " --model " + w.path("tsm.ckpt") + " --out " + w.path("tsm.index"));
  const auto s = ok("search " + w.cfg + " --model " + w.path("tsm.ckpt") + " --index " + w.path("tsm.index") +
                    " --scope temporal --out " + w.path("tsm.run"));
  const auto run1 = retrieval::read_trec_run(w.dir / "tsm.run");
  CHECK(run1.k == 20);
  CHECK(!run1.results.empty());
  retrieval::write_trec_run(w.dir / "tsm2.run", run1);
  CHECK(slurp(w.dir / "tsm.run") == slurp(w.dir / "tsm2.run"));
  const auto e2 = ok("eval " + w.cfg + " --run " + w.path("tsm.run") + " --qrels " + w.path("corpus/qrels.txt") +
                     " --csv " + w.path("spec.csv"));
  CHECK(slurp(w.dir / "spec.csv").rfind("specifier,recall_at_20\n", 0) == 0);

  ok("search " + w.cfg + " --strategy ensemble --model " + specs[0] + " --model " + specs[1] + " --k 5 --out " +
     w.path("ens.run"));
  CHECK(retrieval::read_trec_run(w.dir / "ens.run").strategy == retrieval::Strategy::Ensemble);
  const auto router = ok("train " + w.cfg + " --router --base " + base + " --out " + w.path("r.router"));
  const auto routed = ok("search " + w.cfg + " --strategy routed --router " + w.path("r.router") + " --vanilla " +
                         base + " --tuned " + field(pooled.out, "checkpoint") + " --out " + w.path("routed.run"));
  CHECK(routed.out.find("routed to tuned") != std::string::npos);

  // Weight analysis of the base against itself is all zeros.
  ok("analyze-weights --base " + base + " --models " + base + " --out " + w.path("wc.csv"));
  const auto wc = lines(slurp(w.dir / "wc.csv"));
  REQUIRE(wc.size() == 1 + 2 * 4);
  CHECK(wc[0] == "model,tensor,magnitude");
  for (std::size_t i = 1; i < wc.size(); ++i) CHECK(wc[i].substr(wc[i].rfind(',') + 1) == "0");
  const auto aw = ok("analyze-weights --base " + base + " --models" + inputs + " --merged " + w.path("tsm.ckpt"));
  CHECK(aw.out.find("convexity = ok") != std::string::npos);

  const std::string dump = "dump-scores " + w.cfg + " --model " + base + " --query \"Where did someone live in 1990?\"";
  const auto passage_id = lines(slurp(w.dir / "corpus" / "qrels.txt")).front();
  const auto pid = passage_id.substr(passage_id.find(" 0 ") + 3, passage_id.rfind(' ') - passage_id.find(" 0 ") - 3);
  const auto d1 = ok(dump + " --passage-id " + pid);
  const auto d2 = ok(dump + " --passage-id " + pid);
  CHECK(d1.out == d2.out);
  CHECK(d1.out.rfind("position,token,score\n", 0) == 0);
  CHECK(run(dump + " --passage \"   \"").code == 2);
}

TEST_CASE("exit codes separate usage errors from runtime failures") {
  Workdir w("tempmerge_cli_codes");
  CHECK(run("--help").code == 0);
  CHECK(run("print-config " + w.cfg).code == 0);
  CHECK(run("no-such-command").code == 1);
  CHECK(run("merge").code == 1);
  CHECK(run("train " + w.cfg).code == 1);
  CHECK(run("train " + w.cfg + " --pooled").code == 1);
  CHECK(run("search " + w.cfg + " --strategy fuzzy").code == 1);

  const auto missing = run("eval --run " + w.path("nope.run") + " --qrels " + w.path("nope.qrels"));
  CHECK(missing.code == 2);
  CHECK(missing.out.find("nope.run") != std::string::npos);
  CHECK(run("merge --inputs " + w.path("nope.ckpt")).code == 2);
  CHECK(run("print-config --config " + w.path("missing.txt")).code == 2);
  {
    std::ofstream bad(w.dir / "bad.txt");
    bad << "unknown.key = 1\n";
  }
  const auto bad = run("print-config --config " + w.path("bad.txt"));
  CHECK(bad.code == 2);
  CHECK(bad.out.find("unknown key") != std::string::npos);
}
