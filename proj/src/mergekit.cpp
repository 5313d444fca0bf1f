#include "tempmerge/mergekit.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tempmerge/error.hpp"

namespace tempmerge::merge {

namespace {

void check_compatible(const EncoderParams& a, const EncoderParams& b) {
  if (a.vocab_hash != b.vocab_hash) throw Error("merge: vocabulary hash mismatch");
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].rows != tb[i].rows || ta[i].cols != tb[i].cols)
      throw Error("merge: shape mismatch in tensor " + std::string(ta[i].name) + " (" + std::to_string(ta[i].rows) +
                  "x" + std::to_string(ta[i].cols) + " vs " + std::to_string(tb[i].rows) + "x" +
                  std::to_string(tb[i].cols) + ")");
  }
}

double pairwise_sum(const std::vector<std::span<const double>>& members, std::size_t idx, std::size_t lo,
                    std::size_t hi) {
  if (hi - lo == 1) return members[lo][idx];
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(members, idx, lo, mid) + pairwise_sum(members, idx, mid, hi);
}

}  // namespace

EncoderParams merge_average(std::span<const EncoderParams> models) {
  if (models.empty()) throw Error("merge: need at least one model");
  for (const auto& m : models) {
    m.validate();
    check_compatible(models.front(), m);
  }
  EncoderParams out = models.front();
  const double k = static_cast<double>(models.size());
  auto out_t = out.tensors();
  for (std::size_t t = 0; t < out_t.size(); ++t) {
    std::vector<std::span<const double>> members;
    for (const auto& m : models) members.push_back(m.tensors()[t].values);
    for (std::size_t i = 0; i < out_t[t].values.size(); ++i)
      out_t[t].values[i] = pairwise_sum(members, i, 0, members.size()) / k;
  }
  return out;
}

std::vector<EncoderParams> merge_sequence(std::span<const EncoderParams> models) {
  if (models.empty()) throw Error("merge: empty model sequence");
  std::vector<EncoderParams> out;
  for (std::size_t j = 1; j <= models.size(); ++j) out.push_back(merge_average(models.first(j)));
  return out;
}

WeightChange weight_change(const EncoderParams& base, const EncoderParams& tuned) {
  const auto tb = base.tensors();
  const auto tt = tuned.tensors();
  WeightChange wc;
  for (std::size_t t = 0; t < tb.size(); ++t) {
    if (tb[t].rows != tt[t].rows || tb[t].cols != tt[t].cols)
      throw Error("weight_change: shape mismatch in tensor " + std::string(tb[t].name));
    double ss = 0.0;
    for (std::size_t i = 0; i < tb[t].values.size(); ++i) {
      const double diff = tt[t].values[i] - tb[t].values[i];
      ss += diff * diff;
    }
    const double norm = std::sqrt(ss);
    wc.per_tensor.push_back({std::string(tb[t].name), norm});
    wc.total += norm;
  }
  return wc;
}

bool MergeReport::convexity_holds() const { return merged.total <= member_mean * (1.0 + 1e-12) + 1e-300; }

MergeReport make_merge_report(const EncoderParams& base, std::span<const std::string> names,
                              std::span<const EncoderParams> members, const EncoderParams& merged) {
  if (names.size() != members.size()) throw Error("merge report: names and members differ in length");
  if (members.empty()) throw Error("merge report: no members");
  MergeReport r;
  for (std::size_t i = 0; i < members.size(); ++i) {
    r.members.push_back({names[i], weight_change(base, members[i])});
    r.member_mean += r.members.back().change.total;
  }
  r.member_mean /= static_cast<double>(members.size());
  r.merged = weight_change(base, merged);
  return r;
}

std::string format_merge_report(const MergeReport& report) {
  std::ostringstream out;
  char buf[64];
  out << "members = " << report.members.size() << '\n';
  for (const auto& m : report.members) {
    std::snprintf(buf, sizeof buf, "%.10g", m.change.total);
    out << "member." << m.name << ".weight_change = " << buf << '\n';
  }
  std::snprintf(buf, sizeof buf, "%.10g", report.member_mean);
  out << "member_mean_weight_change = " << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.10g", report.merged.total);
  out << "merged_weight_change = " << buf << '\n';
  for (const auto& t : report.merged.per_tensor) {
    std::snprintf(buf, sizeof buf, "%.10g", t.norm);
    out << "merged." << t.tensor << " = " << buf << '\n';
  }
  out << "convexity = " << (report.convexity_holds() ? "ok" : "VIOLATED") << '\n';
  return out.str();
}

void write_weight_change_csv(const std::filesystem::path& path, const MergeReport& report,
                             const std::string& merged_name) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write: " + path.string());
  out << "model,tensor,magnitude\n";
  char buf[64];
  auto rows = [&](const std::string& name, const WeightChange& wc) {
    for (const auto& t : wc.per_tensor) {
      std::snprintf(buf, sizeof buf, "%.10g", t.norm);
      out << name << ',' << t.tensor << ',' << buf << '\n';
    }
    std::snprintf(buf, sizeof buf, "%.10g", wc.total);
    out << name << ",total," << buf << '\n';
  };
  for (const auto& m : report.members) rows(m.name, m.change);
  rows(merged_name, report.merged);
}

}  // namespace tempmerge::merge
