#include "minimax/rng.hpp"

#include <cmath>
#include <numbers>

namespace minimax::rng {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// 53-bit uniform strictly inside (0, 1).
inline double to_unit(std::uint32_t a, std::uint32_t b) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(a) << 32) | b) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 0x632BE59BD9B4E019ull));
  return h;
}

CounterStream::CounterStream(std::uint64_t seed, Stream stream)
    : CounterStream(seed, static_cast<std::uint32_t>(stream)) {}

CounterStream::CounterStream(std::uint64_t seed, std::uint32_t stream)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, stream_(stream) {}

std::array<std::uint32_t, 4> CounterStream::block(std::uint64_t index, std::uint32_t j) const {
  return philox4x32({j, static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), stream_},
                    key_);
}

void CounterStream::normals(std::uint64_t index, std::span<double> out) const {
  const std::size_t n = out.size();
  for (std::size_t k = 0; 2 * k < n; ++k) {
    const auto w = block(index, static_cast<std::uint32_t>(k));
    const double radius = std::sqrt(-2.0 * std::log(to_unit(w[0], w[1])));
    const double angle = 2.0 * std::numbers::pi * to_unit(w[2], w[3]);
    out[2 * k] = radius * std::cos(angle);
    if (2 * k + 1 < n) out[2 * k + 1] = radius * std::sin(angle);
  }
}

void CounterStream::uniforms(std::uint64_t index, std::span<double> out) const {
  const std::size_t n = out.size();
  // Separate block range from normals() so the two never share words.
  constexpr std::uint32_t kOffset = 0x80000000u;
  for (std::size_t k = 0; 2 * k < n; ++k) {
    const auto w = block(index, kOffset + static_cast<std::uint32_t>(k));
    out[2 * k] = to_unit(w[0], w[1]);
    if (2 * k + 1 < n) out[2 * k + 1] = to_unit(w[2], w[3]);
  }
}

}  // namespace minimax::rng
