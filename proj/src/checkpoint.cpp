#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "tempmerge/encoder.hpp"
#include "tempmerge/error.hpp"
#include "tempmerge/text.hpp"

namespace tempmerge::encoder {

namespace {

constexpr char kMagic[8] = {'T', 'M', 'C', 'K', 'P', 'T', '\0', '\0'};

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

template <typename T>
void put(std::string& out, T v) {
  v = to_little(v);
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get(std::string_view field) {
    if (bytes_.size() - pos_ < sizeof(T)) throw Error("checkpoint: truncated while reading " + std::string(field));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_little(v);
  }

  void doubles(std::span<double> out, std::string_view field) {
    const std::size_t need = out.size() * sizeof(double);
    if (bytes_.size() - pos_ < need) throw Error("checkpoint: truncated while reading " + std::string(field));
    for (auto& x : out) {
      x = get<double>(field);
      if (!std::isfinite(x)) throw Error("checkpoint: non-finite value in " + std::string(field));
    }
  }

  std::string_view take(std::size_t n, std::string_view field) {
    if (bytes_.size() - pos_ < n) throw Error("checkpoint: truncated while reading " + std::string(field));
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const EncoderParams& params) {
  params.validate();
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, params.vocab_size());
  put<std::uint64_t>(out, params.dim());
  put<std::uint64_t>(out, params.vocab_hash);
  for (const auto& t : params.tensors())
    for (double x : t.values) put<double>(out, x);
  return out;
}

EncoderParams deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(sizeof kMagic, "magic") != std::string_view(kMagic, sizeof kMagic))
    throw Error("checkpoint: bad magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw Error("checkpoint: unsupported version (found " + std::to_string(version) + ", expected " +
                std::to_string(kCheckpointVersion) + ")");
  const auto vocab = r.get<std::uint64_t>("vocab_size");
  const auto dim = r.get<std::uint64_t>("dim");
  const auto vhash = r.get<std::uint64_t>("vocab_hash");
  if (vocab == 0 || dim == 0) throw Error("checkpoint: bad shape (vocab_size and dim must be >= 1)");
  const std::uint64_t payload = (vocab * dim + dim * dim + dim) * sizeof(double);
  if (vocab > (1ULL << 32) || dim > (1ULL << 16) || payload != r.remaining()) {
    if (payload > r.remaining()) throw Error("checkpoint: truncated (shape " + std::to_string(vocab) + "x" +
                                             std::to_string(dim) + " needs more data)");
    throw Error("checkpoint: bad shape (trailing bytes after tensors)");
  }
  EncoderParams p;
  p.vocab_hash = vhash;
  p.embed = Matrix(vocab, dim);
  p.proj_w = Matrix(dim, dim);
  p.proj_b.assign(dim, 0.0);
  r.doubles(p.embed.data, "embed");
  r.doubles(p.proj_w.data, "proj_w");
  r.doubles(p.proj_b, "proj_b");
  return p;
}

void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

EncoderParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

std::uint64_t checkpoint_hash(const EncoderParams& params) { return fnv1a64(serialize_checkpoint(params)); }

}  // namespace tempmerge::encoder
