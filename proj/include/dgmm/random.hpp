#pragma once

#include <cstdint>
#include <numbers>
#include <random>

#include "dgmm/errors.hpp"
#include "dgmm/linalg.hpp"

namespace dgmm {

// Seeded random stream. The engine is std::mt19937_64 (bit-exact across
// conforming implementations); normal draws use the cosine branch of
// Box-Muller with exactly two 53-bit uniforms per draw, so any seed replays
// the same sequence regardless of platform or toolchain. The sine partner is
// discarded to keep the draw count a pure function of the call sequence.
class RngState {
 public:
  explicit RngState(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  // Raw engine outputs consumed so far (the stream position).
  std::uint64_t position() const { return position_; }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * kInv53; }

  std::uint64_t next_u64() { return next(); }

  // Integer uniform on [0, n) by rejection; unbiased.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw InvalidArgument("uniform_index: n must be >= 1");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % n;
  }

  double gaussian() {
    // u1 in (0, 1] so the log is finite; u2 in [0, 1).
    const double u1 = (static_cast<double>(next() >> 11) + 1.0) * kInv53;
    const double u2 = static_cast<double>(next() >> 11) * kInv53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  Vector gaussian_vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = gaussian();
    return v;
  }

  // Row-major fill so a matrix draw equals the equivalent flat vector draw.
  Matrix gaussian_matrix(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = gaussian();
    return m;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_index(i)]);
    }
  }

 private:
  static constexpr double kInv53 = 1.0 / 9007199254740992.0;  // 2^-53

  std::uint64_t next() {
    ++position_;
    return engine_();
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::uint64_t position_ = 0;
};

// i.i.d. standard normal draws; advances the stream.
inline Vector standard_normal_draw(RngState& rng, Index n) {
  if (n < 1) throw InvalidArgument("standard_normal_draw: n must be >= 1");
  return rng.gaussian_vector(n);
}

// splitmix64 finalizer; derives independent per-unit-of-work seeds so
// parallel consumers (one RngState each) stay deterministic under any
// scheduling.
inline std::uint64_t derive_stream_seed(std::uint64_t seed,
                                        std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace dgmm
