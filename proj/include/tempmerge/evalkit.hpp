#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tempmerge/corpuslab.hpp"
#include "tempmerge/retrieval.hpp"

namespace tempmerge::eval {

using retrieval::RetrievalRun;
using retrieval::ScoredHit;
using timeparse::Specifier;

// query_id -> relevant passage ids (binary relevance).
using Qrels = std::map<std::string, std::set<std::string>>;

Qrels qrels_from_queries(std::span<const corpus::QueryRecord> queries);
// TREC qrels lines: "query_id 0 passage_id 1".
void write_qrels(const std::filesystem::path& path, const Qrels& qrels);
Qrels read_qrels(const std::filesystem::path& path);

// Per-query terms. Hits are taken in rank order; only the first k count.
double recall_of(std::span<const ScoredHit> hits, const std::set<std::string>& relevant, int k);
double ndcg_of(std::span<const ScoredHit> hits, const std::set<std::string>& relevant, int k);

// Macro averages over the run's queries. Throws Error listing run queries that
// are missing from the qrels.
double recall_at_k(const RetrievalRun& run, const Qrels& qrels, int k);
double ndcg_at_k(const RetrievalRun& run, const Qrels& qrels, int k);

RetrievalRun restrict_run(const RetrievalRun& run, const std::set<std::string>& query_ids);

struct SpecifierBreakdown {
  std::map<Specifier, double> by_specifier;  // groups without queries are absent
  std::optional<double> nontemporal;
};

SpecifierBreakdown per_specifier_report(const RetrievalRun& run, std::span<const corpus::QueryRecord> queries,
                                        const Qrels& qrels, int k = 20);

void write_specifier_csv(const std::filesystem::path& path, const SpecifierBreakdown& b);

std::string metric_name(std::string_view metric, int k);  // "Recall@20", "nDCG@5"

// Metric values of one method: dataset -> metric -> value.
struct MetricsReport {
  std::map<std::string, std::map<std::string, double>> cells;
  SpecifierBreakdown per_specifier;  // Recall@20 by specifier
};

// Recall@k and nDCG@k for each dataset's run.
MetricsReport evaluate_runs(const std::map<std::string, std::pair<RetrievalRun, Qrels>>& runs,
                            std::span<const int> ks = std::vector<int>{5, 20});

struct ComparisonTable {
  std::vector<std::string> methods;
  std::vector<std::string> datasets;
  std::vector<std::string> metrics;
  // values[m][dataset][metric]; averages[m][metric] = mean over datasets.
  std::vector<std::map<std::string, std::map<std::string, double>>> values;
  std::vector<std::map<std::string, double>> averages;
  // best[dataset or "Average"][metric] -> method indices holding the maximum.
  std::map<std::string, std::map<std::string, std::vector<std::size_t>>> best;

  bool is_best(std::size_t method, const std::string& dataset, const std::string& metric) const;
  std::string to_text() const;  // aligned, best values starred
  std::string to_csv() const;
};

// Throws Error when reports cover different datasets or metrics.
ComparisonTable compare_methods(std::span<const std::pair<std::string, MetricsReport>> reports);

}  // namespace tempmerge::eval
