#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace vropt {

// Deterministic random stream, identical on every platform.
//
// Stream contract (pinned; changing it invalidates recorded traces):
//   state    xoshiro256** (Blackman/Vigna), 256-bit state
//   seeding  the four state words are successive outputs of splitmix64
//            run from the 64-bit seed
//   doubles  next_double() maps the top 53 bits of next_u64() to [0, 1)
//   gaussian Box-Muller on two fresh uniforms, second value cached
//   fork     fork(base, k) reseeds with splitmix64 mixes of base and k so
//            concurrent runs get decorrelated streams from (base_seed, k)
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t next_u64();
  double next_double();
  double next_gaussian();

  static RngStream fork(std::uint64_t base_seed, std::uint64_t index);

 private:
  std::uint64_t s_[4];
  double pending_gauss_ = 0.0;
  bool has_pending_gauss_ = false;
};

// The seed RngStream::fork hands to run `index` under `base_seed`; exposed so
// run orchestration can record and replay per-run streams.
std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index);

// Unbiased draw from {0, ..., n-1} via rejection; throws std::invalid_argument
// when n == 0.
std::size_t uniform_index(RngStream& rng, std::size_t n);

// Fisher-Yates shuffle of the identity using uniform_index.
std::vector<std::size_t> random_permutation(RngStream& rng, std::size_t n);

// Law of the next index of a random permutation of {0, ..., n-1} given the
// indices already drawn: mass 1/(n - prefix.size()) on each unused index,
// zero on used ones.  Duplicate or out-of-range prefix entries throw
// std::invalid_argument.
std::vector<double> conditional_next_distribution(
    const std::vector<std::size_t>& prefix, std::size_t n);

}  // namespace vropt
