#include "vropt/sampling.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace vropt {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

RngStream::RngStream(std::uint64_t seed) {
  std::uint64_t st = seed;
  for (auto& word : s_) word = splitmix64(st);
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_gaussian() {
  if (has_pending_gauss_) {
    has_pending_gauss_ = false;
    return pending_gauss_;
  }
  // u1 is shifted into (0, 1] so the log is always finite.
  const double u1 =
      static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = next_double();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  pending_gauss_ = r * std::sin(theta);
  has_pending_gauss_ = true;
  return r * std::cos(theta);
}

std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index) {
  std::uint64_t st = base_seed;
  const std::uint64_t h = splitmix64(st);
  std::uint64_t st2 = h ^ index;
  return splitmix64(st2);
}

RngStream RngStream::fork(std::uint64_t base_seed, std::uint64_t index) {
  return RngStream(derive_seed(base_seed, index));
}

std::size_t uniform_index(RngStream& rng, std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  // 2^64 mod n; draws below it would land in the truncated final block.
  const std::uint64_t threshold = (0ULL - bound) % bound;
  for (;;) {
    const std::uint64_t x = rng.next_u64();
    if (x >= threshold) return static_cast<std::size_t>(x % bound);
  }
}

std::vector<std::size_t> random_permutation(RngStream& rng, std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

std::vector<double> conditional_next_distribution(
    const std::vector<std::size_t>& prefix, std::size_t n) {
  if (prefix.size() >= n)
    throw std::invalid_argument(
        "conditional_next_distribution: prefix leaves no index to draw");
  std::vector<bool> used(n, false);
  for (std::size_t v : prefix) {
    if (v >= n)
      throw std::invalid_argument(
          "conditional_next_distribution: prefix entry out of range");
    if (used[v])
      throw std::invalid_argument(
          "conditional_next_distribution: duplicate prefix entry");
    used[v] = true;
  }
  const double mass = 1.0 / static_cast<double>(n - prefix.size());
  std::vector<double> law(n, 0.0);
  for (std::size_t v = 0; v < n; ++v)
    if (!used[v]) law[v] = mass;
  return law;
}

}  // namespace vropt
