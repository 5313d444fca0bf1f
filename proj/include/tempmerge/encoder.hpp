#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tempmerge::encoder {

using TokenId = std::int32_t;

// Token <-> id map built once from the corpus. Ids 0 and 1 are reserved for
// padding and unknown tokens; the remaining tokens are sorted so the map is a
// pure function of the token set.
class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;

  static Vocab build(std::span<const std::string> texts);
  static Vocab from_tokens(std::vector<std::string> tokens);  // index = id, specials included
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }

  // Token ids of text; unknown words map to kUnk, padding is never emitted.
  std::vector<TokenId> encode_text(std::string_view text) const;

  // One token per line, id = line number.
  std::string serialize() const;
  std::uint64_t hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

struct TensorView {
  std::string_view name;
  std::size_t rows;
  std::size_t cols;
  std::span<double> values;
};

struct ConstTensorView {
  std::string_view name;
  std::size_t rows;
  std::size_t cols;
  std::span<const double> values;
};

// Parameters of the encoder f(tokens) = proj_w * mean(embed[tokens]) + proj_b.
struct EncoderParams {
  Matrix embed;                 // [V x d]
  Matrix proj_w;                // [d x d]
  std::vector<double> proj_b;   // [d]
  std::uint64_t vocab_hash = 0;

  std::size_t vocab_size() const { return embed.rows; }
  std::size_t dim() const { return embed.cols; }

  // Embedding rows ~ N(0, 1/d), identity projection, zero bias.
  static EncoderParams init(std::size_t vocab_size, std::size_t dim, std::uint64_t seed, std::uint64_t vocab_hash);

  std::vector<TensorView> tensors();
  std::vector<ConstTensorView> tensors() const;

  // Throws Error naming the first inconsistent shape or non-finite entry.
  void validate() const;

  bool operator==(const EncoderParams&) const = default;
};

// Low-rank update of proj_w: W_eff = W + (alpha / rank) * B * A.
struct LoraAdapter {
  std::string target = "proj_w";
  std::size_t rank = 0;
  double alpha = 0.0;
  Matrix a;  // [r x d]
  Matrix b;  // [d x r], zero at initialization

  double scale() const { return alpha / static_cast<double>(rank); }
  static LoraAdapter init(std::size_t dim, std::size_t rank, double alpha, std::uint64_t seed);
  void validate(std::size_t dim) const;
};

struct Embedding {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  bool operator==(const Embedding&) const = default;
};

// Mean of the embedding rows of `tokens`. Throws on empty input or ids >= V.
std::vector<double> mean_pool(const EncoderParams& params, std::span<const TokenId> tokens);

// proj_w, or proj_w + scale * B * A when an adapter is given.
Matrix effective_projection(const EncoderParams& params, const LoraAdapter* adapter);

Embedding encode(const EncoderParams& params, const LoraAdapter* adapter, std::span<const TokenId> tokens);
inline Embedding encode(const EncoderParams& params, std::span<const TokenId> tokens) {
  return encode(params, nullptr, tokens);
}

// Applies W_eff and the bias to an already pooled vector.
Embedding project(const Matrix& w_eff, const std::vector<double>& bias, std::span<const double> pooled);

// Plain dot product.
double similarity(const Embedding& q, const Embedding& d);

EncoderParams materialize_lora(const EncoderParams& params, const LoraAdapter& adapter);

// Binary checkpoint: "TMCKPT\0\0", u32 version, u64 V, u64 d, u64 vocab hash,
// then embed, proj_w, proj_b as row-major little-endian f64.
inline constexpr std::uint32_t kCheckpointVersion = 1;
std::string serialize_checkpoint(const EncoderParams& params);
EncoderParams deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams load_checkpoint(const std::filesystem::path& path);
// FNV-1a over the serialized checkpoint bytes.
std::uint64_t checkpoint_hash(const EncoderParams& params);

}  // namespace tempmerge::encoder
