#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace fpls {

// Deterministic random source. The mt19937_64 engine output is pinned bit for
// bit by the standard; the distributions are implemented here because the
// <random> distribution objects are not, and every seeded run has to be
// reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on (0, 1] with 53-bit resolution. Never returns 0, so log() of a
  // draw is always finite.
  double uniform01() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Exact for p a multiple of 2^-53 (draws are lattice points of that size).
  bool bernoulli(double p) { return uniform01() <= p; }

  // Standard normal via Box-Muller; the second draw of each pair is cached.
  double normal();

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Uniform over {0, ..., n-1}, unbiased (rejection above the last full
  // multiple of n).
  std::size_t uniform_index(std::size_t n);

  // s distinct indices from {0, ..., n-1} by partial Fisher-Yates. Result is
  // in draw order, not sorted.
  std::vector<int> sample_without_replacement(int n, int s);

  template <class T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[uniform_index(i)]);
    }
  }

  // Decorrelated child seed for stream `stream` (and optional salt) of a
  // master seed. splitmix64-based, so nearby inputs give unrelated outputs.
  static std::uint64_t derive(std::uint64_t master, std::uint64_t stream,
                              std::uint64_t salt = 0);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace fpls
