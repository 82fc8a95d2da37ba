#include "fpls/random.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fpls {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform01();
  const double u2 = uniform01();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::size_t Rng::uniform_index(std::size_t n) {
  if (n <= 1) return 0;
  // Largest value below which every residue class mod n is equally likely.
  const std::uint64_t max_u64 = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max_u64 - (max_u64 % n + 1) % n;
  std::uint64_t draw;
  do {
    draw = next_u64();
  } while (draw > limit);
  return static_cast<std::size_t>(draw % n);
}

std::vector<int> Rng::sample_without_replacement(int n, int s) {
  if (n < 0 || s < 0 || s > n) {
    throw std::invalid_argument("sample_without_replacement: need 0 <= s <= n");
  }
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < s; ++i) {
    const std::size_t j =
        static_cast<std::size_t>(i) + uniform_index(static_cast<std::size_t>(n - i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(s));
  return pool;
}

std::uint64_t Rng::derive(std::uint64_t master, std::uint64_t stream,
                          std::uint64_t salt) {
  std::uint64_t h = splitmix64(master ^ 0x6a09e667f3bcc909ULL);
  h = splitmix64(h ^ stream);
  h = splitmix64(h ^ salt);
  return h;
}

}  // namespace fpls
