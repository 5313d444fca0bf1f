#include "tempmerge/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tempmerge/error.hpp"

namespace tempmerge::eval {

namespace {

void check_coverage(const RetrievalRun& run, const Qrels& qrels) {
  std::vector<std::string> missing;
  for (const auto& [qid, hits] : run.results)
    if (!qrels.count(qid)) missing.push_back(qid);
  if (missing.empty()) return;
  std::string msg = "run queries missing from qrels:";
  for (std::size_t i = 0; i < missing.size() && i < 10; ++i) msg += " " + missing[i];
  if (missing.size() > 10) msg += " ... (" + std::to_string(missing.size()) + " total)";
  throw Error(msg);
}

template <typename PerQuery>
double macro_average(const RetrievalRun& run, const Qrels& qrels, PerQuery&& f) {
  check_coverage(run, qrels);
  if (run.results.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [qid, hits] : run.results) sum += f(hits, qrels.at(qid));
  return sum / static_cast<double>(run.results.size());
}

std::string fmt(double v, const char* spec = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

Qrels qrels_from_queries(std::span<const corpus::QueryRecord> queries) {
  Qrels q;
  for (const auto& r : queries) q[r.query_id].insert(r.gold_passage_ids.begin(), r.gold_passage_ids.end());
  return q;
}

void write_qrels(const std::filesystem::path& path, const Qrels& qrels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write qrels: " + path.string());
  for (const auto& [qid, rel] : qrels)
    for (const auto& pid : rel) out << qid << " 0 " << pid << " 1\n";
}

Qrels read_qrels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open qrels: " + path.string());
  Qrels q;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string qid, iter, pid;
    int rel = 0;
    if (!(ss >> qid >> iter >> pid >> rel)) throw Error(path.string() + ":" + std::to_string(lineno) + ": malformed qrels line");
    if (rel > 0) q[qid].insert(pid);
  }
  return q;
}

double recall_of(std::span<const ScoredHit> hits, const std::set<std::string>& relevant, int k) {
  if (relevant.empty()) throw Error("recall: empty relevant set");
  const std::size_t top = std::min(hits.size(), static_cast<std::size_t>(std::max(k, 0)));
  std::set<std::string> found;
  for (std::size_t i = 0; i < top; ++i)
    if (relevant.count(hits[i].passage_id)) found.insert(hits[i].passage_id);
  return static_cast<double>(found.size()) / static_cast<double>(relevant.size());
}

double ndcg_of(std::span<const ScoredHit> hits, const std::set<std::string>& relevant, int k) {
  if (relevant.empty()) throw Error("ndcg: empty relevant set");
  const std::size_t top = std::min(hits.size(), static_cast<std::size_t>(std::max(k, 0)));
  double dcg = 0.0;
  for (std::size_t i = 0; i < top; ++i)
    if (relevant.count(hits[i].passage_id)) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  double idcg = 0.0;
  const std::size_t ideal = std::min(relevant.size(), static_cast<std::size_t>(std::max(k, 0)));
  for (std::size_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return idcg > 0 ? dcg / idcg : 0.0;
}

double recall_at_k(const RetrievalRun& run, const Qrels& qrels, int k) {
  return macro_average(run, qrels, [k](const auto& hits, const auto& rel) { return recall_of(hits, rel, k); });
}

double ndcg_at_k(const RetrievalRun& run, const Qrels& qrels, int k) {
  return macro_average(run, qrels, [k](const auto& hits, const auto& rel) { return ndcg_of(hits, rel, k); });
}

RetrievalRun restrict_run(const RetrievalRun& run, const std::set<std::string>& query_ids) {
  RetrievalRun out;
  out.strategy = run.strategy;
  out.k = run.k;
  for (const auto& [qid, hits] : run.results)
    if (query_ids.count(qid)) out.results.emplace(qid, hits);
  return out;
}

SpecifierBreakdown per_specifier_report(const RetrievalRun& run, std::span<const corpus::QueryRecord> queries,
                                        const Qrels& qrels, int k) {
  std::map<Specifier, std::set<std::string>> groups;
  std::set<std::string> nontemporal;
  for (const auto& q : queries) {
    if (!run.results.count(q.query_id)) continue;
    if (auto s = q.specifier())
      groups[*s].insert(q.query_id);
    else
      nontemporal.insert(q.query_id);
  }
  SpecifierBreakdown b;
  for (const auto& [s, ids] : groups) b.by_specifier[s] = recall_at_k(restrict_run(run, ids), qrels, k);
  if (!nontemporal.empty()) b.nontemporal = recall_at_k(restrict_run(run, nontemporal), qrels, k);
  return b;
}

void write_specifier_csv(const std::filesystem::path& path, const SpecifierBreakdown& b) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write: " + path.string());
  out << "specifier,recall_at_20\n";
  for (auto s : timeparse::kAllSpecifiers) {
    auto it = b.by_specifier.find(s);
    if (it != b.by_specifier.end()) out << timeparse::specifier_name(s) << ',' << fmt(it->second, "%.6f") << '\n';
  }
  if (b.nontemporal) out << "nontemporal," << fmt(*b.nontemporal, "%.6f") << '\n';
}

std::string metric_name(std::string_view metric, int k) { return std::string(metric) + "@" + std::to_string(k); }

MetricsReport evaluate_runs(const std::map<std::string, std::pair<RetrievalRun, Qrels>>& runs,
                            std::span<const int> ks) {
  MetricsReport r;
  for (const auto& [dataset, rq] : runs) {
    auto& cell = r.cells[dataset];
    for (int k : ks) cell[metric_name("Recall", k)] = recall_at_k(rq.first, rq.second, k);
    for (int k : ks) cell[metric_name("nDCG", k)] = ndcg_at_k(rq.first, rq.second, k);
  }
  return r;
}

bool ComparisonTable::is_best(std::size_t method, const std::string& dataset, const std::string& metric) const {
  auto d = best.find(dataset);
  if (d == best.end()) return false;
  auto m = d->second.find(metric);
  if (m == d->second.end()) return false;
  return std::find(m->second.begin(), m->second.end(), method) != m->second.end();
}

ComparisonTable compare_methods(std::span<const std::pair<std::string, MetricsReport>> reports) {
  if (reports.empty()) throw Error("compare_methods: no reports");
  ComparisonTable t;
  const auto& first = reports.front().second.cells;
  for (const auto& [ds, metrics] : first) {
    t.datasets.push_back(ds);
    if (t.metrics.empty())
      for (const auto& [m, v] : metrics) t.metrics.push_back(m);
  }
  for (const auto& [name, rep] : reports) {
    if (rep.cells.size() != t.datasets.size()) throw Error("compare_methods: ragged datasets for " + name);
    for (const auto& ds : t.datasets) {
      auto it = rep.cells.find(ds);
      if (it == rep.cells.end()) throw Error("compare_methods: " + name + " lacks dataset " + ds);
      if (it->second.size() != t.metrics.size()) throw Error("compare_methods: ragged metrics for " + name);
      for (const auto& m : t.metrics)
        if (!it->second.count(m)) throw Error("compare_methods: " + name + " lacks " + m + " on " + ds);
    }
    t.methods.push_back(name);
    t.values.push_back(rep.cells);
    std::map<std::string, double> avg;
    for (const auto& m : t.metrics) {
      double sum = 0.0;
      for (const auto& ds : t.datasets) sum += rep.cells.at(ds).at(m);
      avg[m] = sum / static_cast<double>(t.datasets.size());
    }
    t.averages.push_back(std::move(avg));
  }
  auto mark = [&](const std::string& column, const std::string& metric, auto value_of) {
    double hi = -1e300;
    for (std::size_t i = 0; i < t.methods.size(); ++i) hi = std::max(hi, value_of(i));
    for (std::size_t i = 0; i < t.methods.size(); ++i)
      if (value_of(i) == hi) t.best[column][metric].push_back(i);
  };
  for (const auto& ds : t.datasets)
    for (const auto& m : t.metrics) mark(ds, m, [&](std::size_t i) { return t.values[i].at(ds).at(m); });
  for (const auto& m : t.metrics) mark("Average", m, [&](std::size_t i) { return t.averages[i].at(m); });
  return t;
}

std::string ComparisonTable::to_text() const {
  std::size_t name_w = 6;
  for (const auto& m : methods) name_w = std::max(name_w, m.size());
  std::vector<std::string> columns = datasets;
  columns.push_back("Average");
  std::ostringstream out;
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  const std::size_t cell_w = 12;
  out << pad("Method", name_w);
  for (const auto& c : columns)
    for (const auto& m : metrics) out << " | " << pad(c + " " + m, std::max(cell_w, c.size() + m.size() + 1));
  out << '\n';
  for (std::size_t i = 0; i < methods.size(); ++i) {
    out << pad(methods[i], name_w);
    for (const auto& c : columns)
      for (const auto& m : metrics) {
        const double v = c == "Average" ? averages[i].at(m) : values[i].at(c).at(m);
        std::string cell = fmt(100.0 * v, "%.2f") + (is_best(i, c, m) ? "*" : "");
        out << " | " << pad(cell, std::max(cell_w, c.size() + m.size() + 1));
      }
    out << '\n';
  }
  return out.str();
}

std::string ComparisonTable::to_csv() const {
  std::ostringstream out;
  out << "method,dataset,metric,value,best\n";
  for (std::size_t i = 0; i < methods.size(); ++i) {
    for (const auto& ds : datasets)
      for (const auto& m : metrics)
        out << methods[i] << ',' << ds << ',' << m << ',' << fmt(values[i].at(ds).at(m), "%.6f") << ','
            << (is_best(i, ds, m) ? 1 : 0) << '\n';
    for (const auto& m : metrics)
      out << methods[i] << ",Average," << m << ',' << fmt(averages[i].at(m), "%.6f") << ','
          << (is_best(i, "Average", m) ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace tempmerge::eval
