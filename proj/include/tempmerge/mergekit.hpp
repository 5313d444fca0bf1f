#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tempmerge/encoder.hpp"

namespace tempmerge::merge {

using encoder::EncoderParams;

// Element-wise arithmetic mean of the members. Each entry is summed in
// pairwise (tree) order, then divided by the member count. Throws Error naming
// the first tensor whose shape differs, or on a vocabulary-hash mismatch.
EncoderParams merge_average(std::span<const EncoderParams> models);

// Prefix merges: element j is merge_average of the first j+1 models.
std::vector<EncoderParams> merge_sequence(std::span<const EncoderParams> models);

struct TensorChange {
  std::string tensor;
  double norm = 0.0;  // Frobenius norm of (tuned - base)
};

struct WeightChange {
  double total = 0.0;  // sum of per-tensor norms
  std::vector<TensorChange> per_tensor;
};

WeightChange weight_change(const EncoderParams& base, const EncoderParams& tuned);

struct MemberChange {
  std::string name;
  WeightChange change;
};

struct MergeReport {
  std::vector<MemberChange> members;
  WeightChange merged;
  double member_mean = 0.0;

  // weight_change(base, merge) <= mean_i weight_change(base, member_i), which
  // holds tensor by tensor through the triangle inequality. Rounding slack is
  // one part in 1e12.
  bool convexity_holds() const;
};

MergeReport make_merge_report(const EncoderParams& base, std::span<const std::string> names,
                              std::span<const EncoderParams> members, const EncoderParams& merged);

// "key = value" lines.
std::string format_merge_report(const MergeReport& report);
// model,tensor,magnitude rows; the merged model is labelled `merged_name`.
void write_weight_change_csv(const std::filesystem::path& path, const MergeReport& report,
                             const std::string& merged_name = "merged");

}  // namespace tempmerge::merge
