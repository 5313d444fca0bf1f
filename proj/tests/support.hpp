#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "tempmerge/encoder.hpp"

namespace support {

using tempmerge::encoder::EncoderParams;
using tempmerge::encoder::TokenId;

// Random encoder with a non-trivial projection and bias.
inline EncoderParams random_params(std::size_t vocab, std::size_t dim, std::uint64_t seed, double scale = 0.5) {
  auto p = EncoderParams::init(vocab, dim, seed, 0);
  std::mt19937_64 rng(seed * 7919 + 1);
  std::normal_distribution<double> n(0.0, scale);
  for (auto& v : p.proj_w.data) v += n(rng);
  for (auto& v : p.proj_b) v = n(rng);
  return p;
}

inline std::vector<TokenId> random_tokens(std::mt19937_64& rng, std::size_t vocab, int min_len, int max_len) {
  std::uniform_int_distribution<int> len(min_len, max_len);
  std::uniform_int_distribution<int> tok(0, static_cast<int>(vocab) - 1);
  std::vector<TokenId> out(static_cast<std::size_t>(len(rng)));
  for (auto& t : out) t = static_cast<TokenId>(tok(rng));
  return out;
}

}  // namespace support
