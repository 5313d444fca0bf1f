// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "support.hpp"
#include "tempmerge/corpuslab.hpp"
#include "tempmerge/encoder.hpp"
#include "tempmerge/evalkit.hpp"
#include "tempmerge/experiment.hpp"
#include "tempmerge/mergekit.hpp"
#include "tempmerge/retrieval.hpp"
#include "tempmerge/timeparse.hpp"
#include "tempmerge/trainlab.hpp"

using namespace tempmerge;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances and thresholds.
constexpr double kGradRelTol = 1e-4;
constexpr double kGradSeconds = 30.0;
constexpr double kGradFloor = 1e-7;  // |fd| + |analytic| below this counts as zero
constexpr double kFdStep = 1e-6;
constexpr int kGradDraws = 100;
constexpr double kLn6Tol = 1e-12;
constexpr double kMergeTol = 1e-12;
constexpr double kMetricTol = 0.0;  // exact
constexpr double kNdcgRank2Tol = 1e-12;
constexpr int kRandomInstances = 1000;
constexpr double kRhoThreshold = 0.5;
constexpr double kCoverageShare = 0.8;
constexpr std::uint64_t kSeeds[] = {0, 1, 2};
constexpr double kExperimentMinutes = 10.0;

int failures = 0;
std::map<int, std::string> lines_by_id;  // printed in criterion order at the end

void report(int id, bool pass, const std::string& what) {
  lines_by_id[id] = std::string(pass ? "PASS" : "FAIL") + " c" + std::to_string(id) + " " + what;
  std::fprintf(stderr, "%s\n", lines_by_id[id].c_str());
  if (!pass) ++failures;
}

std::string num(double v, const char* f = "%.3g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12}); }

// --- c1 --------------------------------------------------------------------

double nce_draw_error(int draw) {
  std::mt19937_64 rng(1000 + draw);
  const std::size_t vocab = 20 + draw % 30, dim = draw % 4 == 0 ? 32 : 3 + draw % 6;
  auto p = support::random_params(vocab, dim, 1000 + draw);
  train::TrainConfig cfg;
  cfg.seed = static_cast<std::uint64_t>(draw);
  cfg.temperature = 0.5 + 0.25 * (draw % 4);
  cfg.negatives = 1 + draw % 5;
  cfg.mode = std::array{train::Mode::Full, train::Mode::FullRegularized, train::Mode::Lora}[draw % 3];
  cfg.dropout_rate = 0.2;

  std::vector<train::TrainExample> batch(static_cast<std::size_t>(cfg.negatives + 1 + draw % 4));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    batch[i].query = support::random_tokens(rng, vocab, 1, 6);
    batch[i].positive = support::random_tokens(rng, vocab, 1, 6);
  }
  std::optional<encoder::LoraAdapter> ad;
  if (cfg.mode == train::Mode::Lora) {
    ad = encoder::LoraAdapter::init(dim, std::min<std::size_t>(4, dim), 8.0, draw);
    std::normal_distribution<double> n(0.0, 0.3);
    for (auto& v : ad->b.data) v = n(rng);
  }
  encoder::LoraAdapter* adp = ad ? &*ad : nullptr;
  const std::uint64_t step = static_cast<std::uint64_t>(draw % 7);
  const auto g = train::loss_gradients(p, adp, batch, cfg, step);

  double worst = 0.0;
  auto probe = [&](std::vector<double>& values, const std::vector<double>& grad) {
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, values.size() - 1)(rng);
    const double orig = values[i];
    values[i] = orig + kFdStep;
    const double up = train::batch_loss(p, adp, batch, cfg, step);
    values[i] = orig - kFdStep;
    const double down = train::batch_loss(p, adp, batch, cfg, step);
    values[i] = orig;
    const double fd = (up - down) / (2 * kFdStep);
    if (std::abs(fd) + std::abs(grad[i]) > kGradFloor) worst = std::max(worst, rel_err(fd, grad[i]));
  };
  for (int k = 0; k < 12; ++k) {
    if (adp) {
      if (k % 2) probe(adp->a.data, g.lora_a.data);
      else probe(adp->b.data, g.lora_b.data);
    } else if (k % 3 == 0) {
      // Bias the embedding probe toward rows the batch actually uses.
      const auto t = static_cast<std::size_t>(batch[static_cast<std::size_t>(k) % batch.size()].query[0]);
      const std::size_t c = std::uniform_int_distribution<std::size_t>(0, dim - 1)(rng);
      const double orig = p.embed.at(t, c);
      p.embed.at(t, c) = orig + kFdStep;
      const double up = train::batch_loss(p, adp, batch, cfg, step);
      p.embed.at(t, c) = orig - kFdStep;
      const double down = train::batch_loss(p, adp, batch, cfg, step);
      p.embed.at(t, c) = orig;
      const double fd = (up - down) / (2 * kFdStep);
      if (std::abs(fd) + std::abs(g.embed.at(t, c)) > kGradFloor) worst = std::max(worst, rel_err(fd, g.embed.at(t, c)));
    } else if (k % 3 == 1) {
      probe(p.proj_w.data, g.proj_w.data);
    } else {
      probe(p.proj_b, g.proj_b);
    }
  }
  return worst;
}

double router_draw_error(int draw) {
  std::mt19937_64 rng(2000 + draw);
  const std::size_t dim = draw % 4 == 0 ? 32 : 4 + draw % 5;
  auto r = train::RouterParams::init(dim, 4 + draw % 13, draw);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<train::LabeledEmbedding> batch(8 + draw % 9);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    batch[i].label = static_cast<int>(i % 2);
    for (std::size_t j = 0; j < dim; ++j) batch[i].x.push_back(n(rng) + (batch[i].label ? 0.5 : -0.5));
  }
  const auto g = train::router_gradients(r, batch);
  double worst = 0.0;
  auto probe = [&](std::vector<double>& v, const std::vector<double>& grad) {
    for (int k = 0; k < 3; ++k) {
      const std::size_t i = std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng);
      const double o = v[i];
      v[i] = o + kFdStep;
      const double up = train::router_loss(r, batch);
      v[i] = o - kFdStep;
      const double down = train::router_loss(r, batch);
      v[i] = o;
      const double fd = (up - down) / (2 * kFdStep);
      if (std::abs(fd) + std::abs(grad[i]) > kGradFloor) worst = std::max(worst, rel_err(fd, grad[i]));
    }
  };
  probe(r.w1.data, g.w1.data);
  probe(r.b1, g.b1);
  probe(r.w2.data, g.w2.data);
  probe(r.b2, g.b2);
  return worst;
}

void criterion_gradients() {
  const auto t0 = Clock::now();
  double nce = 0.0, router = 0.0;
  for (int d = 0; d < kGradDraws; ++d) {
    nce = std::max(nce, nce_draw_error(d));
    router = std::max(router, router_draw_error(d));
  }
  const double secs = seconds_since(t0);
  report(1, nce < kGradRelTol && router < kGradRelTol && secs < kGradSeconds,
         "gradient check: " + std::to_string(kGradDraws) + " InfoNCE + " + std::to_string(kGradDraws) +
             " router draws, worst rel err " + num(nce) + " / " + num(router) + " (tol " + num(kGradRelTol) + "), " +
             num(secs, "%.2f") + " s");
}

// --- c2 --------------------------------------------------------------------

void criterion_ln6() {
  const double ln6 = std::log(6.0);
  const encoder::Embedding q{{0.3, -1.2, 2.0}}, p{{1.0, 0.5, -0.25}};
  const std::vector<encoder::Embedding> negs(5, p);
  const double direct = train::info_nce_loss(q, p, negs, 1.0);

  // Same case through batch_loss: six identical examples, five cyclic negatives.
  const auto params = support::random_params(10, 4, 7);
  train::TrainConfig cfg;
  cfg.negatives = 5;
  std::vector<train::TrainExample> batch(6);
  for (auto& e : batch) {
    e.query = {1, 2};
    e.positive = {3, 4, 5};
  }
  const double batched = train::batch_loss(params, nullptr, batch, cfg);
  const double err = std::max(std::abs(direct - ln6), std::abs(batched - ln6));
  report(2, err <= kLn6Tol,
         "InfoNCE uniform case: " + num(direct, "%.15f") + " vs ln 6 = " + num(ln6, "%.15f") + ", max err " + num(err));
}

// --- c3 --------------------------------------------------------------------

double max_abs_diff(const encoder::EncoderParams& a, const encoder::EncoderParams& b) {
  double worst = 0.0;
  const auto ta = a.tensors(), tb = b.tensors();
  for (std::size_t t = 0; t < ta.size(); ++t)
    for (std::size_t i = 0; i < ta[t].values.size(); ++i)
      worst = std::max(worst, std::abs(ta[t].values[i] - tb[t].values[i]));
  return worst;
}

void criterion_merge_algebra() {
  std::mt19937_64 rng(3);
  double idem = 0.0, perm = 0.0, sym = 0.0, seq = 0.0;
  for (int draw = 0; draw < 200; ++draw) {
    const std::size_t vocab = 10 + draw % 20, dim = 2 + draw % 7, k = 1 + draw % 9;
    std::vector<encoder::EncoderParams> ms;
    for (std::size_t i = 0; i < k; ++i) ms.push_back(support::random_params(vocab, dim, draw * 16 + i, 2.0));

    const std::vector<encoder::EncoderParams> copies(k, ms[0]);
    idem = std::max(idem, max_abs_diff(merge::merge_average(copies), ms[0]));

    const auto m = merge::merge_average(ms);
    auto shuffled = ms;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    perm = std::max(perm, max_abs_diff(merge::merge_average(shuffled), m));

    auto neg = ms[0];
    for (auto t : neg.tensors())
      for (auto& v : t.values) v = -v;
    const std::vector<encoder::EncoderParams> pair = {ms[0], neg};
    const auto zero = merge::merge_average(pair);
    for (const auto& t : zero.tensors())
      for (double v : t.values) sym = std::max(sym, std::abs(v));

    const auto prefixes = merge::merge_sequence(ms);
    for (std::size_t j = 1; j <= k; ++j)
      seq = std::max(seq, max_abs_diff(prefixes[j - 1],
                                       merge::merge_average(std::span<const encoder::EncoderParams>(ms).first(j))));
  }
  const double worst = std::max({idem, perm, sym, seq});
  report(3, worst <= kMergeTol,
         "merge algebra over 200 draws: idempotence " + num(idem) + ", permutation " + num(perm) + ", symmetry " +
             num(sym) + ", sequence " + num(seq) + " (tol " + num(kMergeTol) + ")");
}

// --- c5 --------------------------------------------------------------------

// Direct reading of the definitions, with the ideal ranking built explicitly.
double recall_brute(const std::vector<retrieval::ScoredHit>& hits, const std::set<std::string>& rel, int k) {
  int found = 0;
  for (int i = 0; i < k && i < static_cast<int>(hits.size()); ++i) found += rel.count(hits[i].passage_id) ? 1 : 0;
  return static_cast<double>(found) / static_cast<double>(rel.size());
}

double ndcg_brute(const std::vector<retrieval::ScoredHit>& hits, const std::set<std::string>& rel, int k) {
  auto dcg = [k](const std::vector<int>& gains) {
    double s = 0.0;
    for (int i = 0; i < k && i < static_cast<int>(gains.size()); ++i)
      if (gains[i]) s += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    return s;
  };
  std::vector<int> gains;
  for (const auto& h : hits) gains.push_back(rel.count(h.passage_id) ? 1 : 0);
  const std::vector<int> ideal(rel.size(), 1);
  return dcg(gains) / dcg(ideal);
}

void criterion_metrics() {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int t = 0; t < kRandomInstances; ++t) {
    const int pool = std::uniform_int_distribution<int>(1, 40)(rng);
    std::vector<std::string> ids;
    for (int i = 0; i < pool; ++i) ids.push_back("p" + std::to_string(i));
    std::shuffle(ids.begin(), ids.end(), rng);
    std::vector<retrieval::ScoredHit> hits;
    const int n = std::uniform_int_distribution<int>(0, pool)(rng);
    for (int i = 0; i < n; ++i) hits.push_back({ids[i], -static_cast<double>(i), i + 1});
    std::shuffle(ids.begin(), ids.end(), rng);
    const int nrel = std::uniform_int_distribution<int>(1, std::min(pool, 8))(rng);
    const std::set<std::string> rel(ids.begin(), ids.begin() + nrel);
    const int k = std::uniform_int_distribution<int>(1, 30)(rng);
    worst = std::max(worst, std::abs(eval::recall_of(hits, rel, k) - recall_brute(hits, rel, k)));
    worst = std::max(worst, std::abs(eval::ndcg_of(hits, rel, k) - ndcg_brute(hits, rel, k)));
  }
  const std::vector<retrieval::ScoredHit> rank2 = {{"x", 2.0, 1}, {"gold", 1.0, 2}, {"y", 0.5, 3}};
  const double r2 = eval::ndcg_of(rank2, {"gold"}, 10);
  const double r2_err = std::abs(r2 - 1.0 / std::log2(3.0));
  report(5, worst <= kMetricTol && r2_err <= kNdcgRank2Tol,
         "metric oracles: " + std::to_string(kRandomInstances) + " instances, max diff " + num(worst) +
             "; rank-2 nDCG " + num(r2, "%.15f") + ", err " + num(r2_err));
}

// --- c6 --------------------------------------------------------------------

void criterion_search() {
  std::mt19937_64 rng(6);
  int agree = 0, ties = 0;
  for (int t = 0; t < kRandomInstances; ++t) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 60)(rng);
    const std::size_t d = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
    retrieval::Index idx;
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int p : perm) idx.passage_ids.push_back("d" + std::to_string(p));
    idx.embeddings = encoder::Matrix(n, d);
    std::uniform_int_distribution<int> small(-2, 2);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const bool integral = t % 2 == 0;  // integer entries make exact ties common
    for (auto& x : idx.embeddings.data) x = integral ? small(rng) : gauss(rng);
    encoder::Embedding q;
    for (std::size_t j = 0; j < d; ++j) q.values.push_back(t % 100 == 0 ? 0.0 : integral ? small(rng) : gauss(rng));
    const int k = std::uniform_int_distribution<int>(1, 70)(rng);

    const auto scores = retrieval::score_all(idx, q);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return scores[a] != scores[b] ? scores[a] > scores[b] : idx.passage_ids[a] < idx.passage_ids[b];
    });
    std::vector<retrieval::ScoredHit> want;
    for (std::size_t r = 0; r < std::min<std::size_t>(n, static_cast<std::size_t>(k)); ++r)
      want.push_back({idx.passage_ids[order[r]], scores[order[r]], static_cast<int>(r + 1)});
    for (std::size_t r = 1; r < want.size(); ++r) ties += want[r].score == want[r - 1].score ? 1 : 0;
    agree += retrieval::search(idx, q, k) == want ? 1 : 0;
  }
  report(6, agree == kRandomInstances,
         "search exactness: " + std::to_string(agree) + "/" + std::to_string(kRandomInstances) +
             " triples match the full-sort oracle (" + std::to_string(ties) + " tied adjacent pairs)");
}

// --- c7 --------------------------------------------------------------------

void criterion_parser() {
  std::size_t checked = 0, recovered = 0, nontemporal = 0, clean = 0;
  std::map<timeparse::Specifier, std::size_t> per;
  for (auto seed : kSeeds) {
    experiment::ExperimentConfig cfg;
    cfg.apply_seed(seed);
    const auto c = corpus::generate_corpus(cfg.corpus);
    for (const auto& q : c.queries) {
      const auto parsed = timeparse::parse_query(q.text);
      if (q.constraint) {
        ++checked;
        if (parsed && *parsed == *q.constraint) {
          ++recovered;
          ++per[q.constraint->specifier];
        }
      } else {
        ++nontemporal;
        clean += parsed ? 0 : 1;
      }
    }
  }
  report(7, recovered == checked && clean == nontemporal && per.size() == 7,
         "parser round-trip: " + std::to_string(recovered) + "/" + std::to_string(checked) +
             " temporal queries recovered across " + std::to_string(per.size()) + " specifiers; " +
             std::to_string(clean) + "/" + std::to_string(nontemporal) + " non-temporal queries unparsed");
}

// --- c8 --------------------------------------------------------------------

void criterion_ensemble() {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> gauss(0.0, 3.0);
  std::uniform_real_distribution<double> log_scale(-3.0, 3.0), shift(-1000.0, 1000.0);
  int agree = 0;
  for (int t = 0; t < kRandomInstances; ++t) {
    const std::size_t m = 2 + t % 5, n = 2 + t % 60;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("p" + std::to_string(i));
    std::vector<std::vector<double>> raw(m, std::vector<double>(n));
    for (auto& v : raw)
      for (auto& x : v) x = gauss(rng);
    if (t % 10 == 0) std::fill(raw[1].begin(), raw[1].end(), 4.2);  // degenerate member
    auto moved = raw;
    const std::size_t which = t % m;
    const double a = std::pow(10.0, log_scale(rng)), b = shift(rng);
    for (auto& x : moved[which]) x = a * x + b;
    const int k = static_cast<int>(n);
    const auto before = retrieval::ensemble_rank(ids, raw, k), after = retrieval::ensemble_rank(ids, moved, k);
    bool same = before.size() == after.size();
    for (std::size_t i = 0; same && i < before.size(); ++i) same = before[i].passage_id == after[i].passage_id;
    agree += same ? 1 : 0;
  }
  report(8, agree == kRandomInstances,
         "ensemble affine invariance: " + std::to_string(agree) + "/" + std::to_string(kRandomInstances) +
             " rankings unchanged");
}

// --- c4, c9-c12 ----------------------------------------------------------------

void directional() {
  struct Seeded {
    std::uint64_t seed;
    experiment::DirectionalChecks d;
    bool convex;
    double merged, member_mean, minutes;
  };
  std::vector<Seeded> runs;
  for (auto seed : kSeeds) {
    experiment::ExperimentConfig cfg;
    cfg.apply_seed(seed);
    const auto t0 = Clock::now();
    std::fprintf(stderr, "experiment seed %llu ...\n", static_cast<unsigned long long>(seed));
    const auto r = experiment::run_experiment(cfg);
    const double minutes = seconds_since(t0) / 60.0;
    runs.push_back({seed, experiment::directional_checks(r), r.tsm_report.convexity_holds(), r.tsm_report.merged.total,
                    r.tsm_report.member_mean, minutes});
    const auto& d = runs.back().d;
    std::fprintf(stderr,
                 "  seed %llu: base %.3f/%.3f FT %.3f/%.3f TSM %.3f/%.3f rho %.3f cells %d/%d, %.2f min\n",
                 static_cast<unsigned long long>(seed), d.base_temporal, d.base_nontemporal, d.ft_temporal,
                 d.ft_nontemporal, d.tsm_temporal, d.tsm_nontemporal, d.curve_rho, d.cells_satisfied, d.cells_total,
                 minutes);
  }
  const int n = static_cast<int>(runs.size());
  auto count = [&](auto pred) { return static_cast<int>(std::count_if(runs.begin(), runs.end(), pred)); };
  auto per_seed = [&](auto text) {
    std::string s;
    for (const auto& r : runs) s += (s.empty() ? "" : "; ") + ("s" + std::to_string(r.seed) + " " + text(r));
    return s;
  };
  double slowest = 0.0;
  for (const auto& r : runs) slowest = std::max(slowest, r.minutes);

  const int convex = count([](const Seeded& r) { return r.convex; });
  report(4, convex == n,
         "norm convexity in " + std::to_string(convex) + "/" + std::to_string(n) + " experiments: " +
             per_seed([](const Seeded& r) { return num(r.merged, "%.4f") + " <= " + num(r.member_mean, "%.4f"); }));

  const int forgetting = count([](const Seeded& r) { return r.d.forgetting(); });
  report(9, forgetting == n,
         "forgetting in " + std::to_string(forgetting) + "/" + std::to_string(n) + " seeds (required all): " +
             per_seed([](const Seeded& r) {
               return "nontemporal " + num(100 * (r.d.ft_nontemporal - r.d.base_nontemporal), "%+.1f") +
                      " temporal " + num(100 * (r.d.ft_temporal - r.d.base_temporal), "%+.1f");
             }) +
             "; slowest experiment " + num(slowest, "%.2f") + " min (target " + num(kExperimentMinutes, "%.0f") +
             ")");

  const int balance = count([](const Seeded& r) { return r.d.balance(); });
  report(10, 2 * balance > n,
         "TSM balance in " + std::to_string(balance) + "/" + std::to_string(n) + " seeds (required majority): " +
             per_seed([](const Seeded& r) {
               return "temporal vs base " + num(100 * (r.d.tsm_temporal - r.d.base_temporal), "%+.1f") +
                      ", nontemporal vs FT " + num(100 * (r.d.tsm_nontemporal - r.d.ft_nontemporal), "%+.1f");
             }));

  const int rising = count([](const Seeded& r) { return r.d.curve_rho > kRhoThreshold; });
  report(11, rising >= 2,
         "merge curve rho > " + num(kRhoThreshold, "%.1f") + " in " + std::to_string(rising) + "/" +
             std::to_string(n) + " seeds (required 2): " +
             per_seed([](const Seeded& r) { return "rho " + num(r.d.curve_rho, "%.3f"); }));

  const int covered = count([](const Seeded& r) {
    return r.d.cells_total > 0 && r.d.cells_satisfied >= kCoverageShare * r.d.cells_total;
  });
  report(12, covered == n,
         "TSM coverage >= " + num(100 * kCoverageShare, "%.0f") + "% of off-home cells in " + std::to_string(covered) +
             "/" + std::to_string(n) + " seeds (required all): " + per_seed([](const Seeded& r) {
               return std::to_string(r.d.cells_satisfied) + "/" + std::to_string(r.d.cells_total);
             }));
}

}  // namespace

int main() {
  try {
    criterion_gradients();
    criterion_ln6();
    criterion_merge_algebra();
    criterion_metrics();
    criterion_search();
    criterion_parser();
    criterion_ensemble();
    directional();
  } catch (const std::exception& e) {
    for (const auto& [id, line] : lines_by_id) std::printf("%s\n", line.c_str());
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 1;
  }
  for (const auto& [id, line] : lines_by_id) std::printf("%s\n", line.c_str());
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
