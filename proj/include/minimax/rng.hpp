#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>

namespace minimax::rng {

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Mixes a master seed with a path of integers into a new 64-bit seed.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

/// Stream tags; keep distinct so design, noise and target draws never overlap.
enum class Stream : std::uint32_t {
  kWidth = 1,
  kDesign = 2,
  kNoise = 3,
  kTarget = 4,
  kDirection = 5,
  kSupport = 6,
};

/// Counter-based generator: the values drawn for logical index `index` depend
/// only on (seed, stream, index), never on call order or thread.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, Stream stream);
  CounterStream(std::uint64_t seed, std::uint32_t stream);

  /// Standard normal variates for `index` (Box-Muller on Philox output).
  void normals(std::uint64_t index, std::span<double> out) const;
  /// Uniform variates in the open interval (0, 1) for `index`.
  void uniforms(std::uint64_t index, std::span<double> out) const;

 private:
  std::array<std::uint32_t, 4> block(std::uint64_t index, std::uint32_t j) const;

  std::array<std::uint32_t, 2> key_;
  std::uint32_t stream_;
};

}  // namespace minimax::rng
