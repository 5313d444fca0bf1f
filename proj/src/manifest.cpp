#include "tempmerge/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

#include "tempmerge/error.hpp"

namespace tempmerge::manifest {

namespace {

using experiment::ExperimentConfig;

struct Field {
  std::string key;
  std::function<void(std::string_view)> set;
  std::function<std::string()> get;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw Error("not a number: '" + std::string(v) + "'");
  return out;
}

bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error("not a boolean: '" + std::string(v) + "'");
}

std::string show(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <typename T>
Field integer(std::string key, T& ref) {
  return {std::move(key), [&ref](std::string_view v) { ref = parse_number<T>(v); },
          [&ref] { return std::to_string(ref); }};
}

Field real(std::string key, double& ref) {
  return {std::move(key), [&ref](std::string_view v) { ref = parse_number<double>(v); }, [&ref] { return show(ref); }};
}

void add_train_fields(std::vector<Field>& f, const std::string& prefix, train::TrainConfig& t) {
  f.push_back(real(prefix + "learning_rate", t.learning_rate));
  f.push_back(integer(prefix + "epochs", t.epochs));
  f.push_back(integer(prefix + "batch_size", t.batch_size));
  f.push_back(real(prefix + "temperature", t.temperature));
  f.push_back(integer(prefix + "negatives", t.negatives));
  f.push_back(real(prefix + "weight_decay", t.weight_decay));
  f.push_back(real(prefix + "dropout_rate", t.dropout_rate));
  f.push_back(integer(prefix + "eval_every", t.eval_every));
  f.push_back({prefix + "batching",
               [&t](std::string_view v) {
                 if (v == "grouped")
                   t.batching = train::Batching::Grouped;
                 else if (v == "shuffled")
                   t.batching = train::Batching::Shuffled;
                 else
                   throw Error("batching must be grouped or shuffled");
               },
               [&t] { return std::string(t.batching == train::Batching::Grouped ? "grouped" : "shuffled"); }});
  f.push_back(integer(prefix + "group_run", t.group_run));
  f.push_back(integer(prefix + "lora_rank", t.lora_rank));
  f.push_back(real(prefix + "lora_alpha", t.lora_alpha));
  f.push_back(real(prefix + "beta1", t.beta1));
  f.push_back(real(prefix + "beta2", t.beta2));
  f.push_back(real(prefix + "adam_eps", t.adam_eps));
}

std::vector<Field> fields(ExperimentConfig& c) {
  std::vector<Field> f;
  f.push_back(integer("seed", c.seed));
  f.push_back(integer("dim", c.dim));
  f.push_back({"ks",
               [&c](std::string_view v) {
                 c.ks.clear();
                 while (!v.empty()) {
                   auto comma = v.find(',');
                   c.ks.push_back(parse_number<int>(trim(v.substr(0, comma))));
                   v = comma == std::string_view::npos ? std::string_view{} : v.substr(comma + 1);
                 }
               },
               [&c] {
                 std::string s;
                 for (std::size_t i = 0; i < c.ks.size(); ++i) s += (i ? "," : "") + std::to_string(c.ks[i]);
                 return s;
               }});
  auto& k = c.corpus;
  f.push_back(integer("corpus.entity_count", k.entity_count));
  f.push_back(integer("corpus.facts_per_entity", k.facts_per_entity));
  f.push_back(integer("corpus.bio_facts_per_entity", k.bio_facts_per_entity));
  f.push_back(integer("corpus.min_year", k.min_year));
  f.push_back(integer("corpus.max_year", k.max_year));
  f.push_back(integer("corpus.queries_per_specifier", k.queries_per_specifier));
  f.push_back(integer("corpus.nontemporal_query_count", k.nontemporal_query_count));
  f.push_back(real("corpus.split_scale", k.split_scale));
  f.push_back({"corpus.augment", [&k](std::string_view v) { k.augment = parse_bool(v); },
               [&k] { return std::string(k.augment ? "true" : "false"); }});
  f.push_back(integer("corpus.nontemporal_train_count", k.nontemporal_train_count));
  f.push_back(integer("corpus.nontemporal_dev_count", k.nontemporal_dev_count));
  f.push_back(integer("corpus.chunk_size", k.chunk_size));
  add_train_fields(f, "pretrain.", c.pretrain);
  f.push_back(integer("pretrain.crops", c.pretrain_crops));
  add_train_fields(f, "finetune.", c.finetune);
  f.push_back(integer("router.hidden", c.router.hidden));
  f.push_back(real("router.learning_rate", c.router.learning_rate));
  f.push_back(integer("router.epochs", c.router.epochs));
  f.push_back(integer("router.batch_size", c.router.batch_size));
  auto path_field = [](std::string key, std::filesystem::path& p) {
    return Field{std::move(key), [&p](std::string_view v) { p = std::string(v); }, [&p] { return p.string(); }};
  };
  f.push_back(path_field("paths.corpus_dir", c.corpus_dir));
  f.push_back(path_field("paths.checkpoint_dir", c.checkpoint_dir));
  f.push_back(path_field("paths.run_dir", c.run_dir));
  return f;
}

}  // namespace

ExperimentConfig parse(std::string_view text, std::string_view source) {
  ExperimentConfig cfg;
  auto table = fields(cfg);
  std::set<std::string> seen;
  std::size_t lineno = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;
    const std::string where = std::string(source) + ":" + std::to_string(lineno) + ": ";
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(where + "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));
    auto it = std::find_if(table.begin(), table.end(), [&](const Field& fd) { return fd.key == key; });
    if (it == table.end()) throw Error(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw Error(where + "duplicate key '" + key + "'");
    try {
      it->set(value);
    } catch (const Error& e) {
      throw Error(where + key + ": " + e.what());
    }
  }
  cfg.apply_seed(cfg.seed);
  return cfg;
}

ExperimentConfig load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open manifest: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::string format(const ExperimentConfig& cfg) {
  ExperimentConfig copy = cfg;
  std::string out;
  for (const auto& f : fields(copy)) out += f.key + " = " + f.get() + "\n";
  return out;
}

std::optional<std::uint64_t> seed_from_env() {
  const char* v = std::getenv("TEMPMERGE_SEED");
  if (!v || !*v) return std::nullopt;
  try {
    return parse_number<std::uint64_t>(v);
  } catch (const Error&) {
    throw Error("TEMPMERGE_SEED must be an unsigned integer, got '" + std::string(v) + "'");
  }
}

ExperimentConfig resolve(const std::optional<std::filesystem::path>& path) {
  ExperimentConfig cfg = path ? load(*path) : ExperimentConfig{};
  cfg.apply_seed(cfg.seed);
  if (auto s = seed_from_env()) cfg.apply_seed(*s);
  cfg.validate();
  return cfg;
}

}  // namespace tempmerge::manifest
