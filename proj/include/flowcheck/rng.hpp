#pragma once

#include <cstdint>
#include <random>

#include "flowcheck/matrix.hpp"

namespace flowcheck {

// Seeded random stream. Two streams with equal (seed, stream) produce bitwise
// identical sequences on every platform: the engine is the standard-pinned
// mt19937_64 and all distributions are generated here rather than through the
// (implementation-defined) <random> distribution classes. Parallel code takes
// one stream per job, keyed by stream id.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream), gen_(mix(seed, stream)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform draw strictly inside (0,1).
  double u01() { return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // Standard normal via inverse-CDF sampling.
  double normal();

  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  Vector normal_vector(int n);
  Vector u01_vector(int n);

  // In-place Fisher-Yates shuffle of index vector.
  void shuffle(std::vector<int>& idx);

private:
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t seed_, stream_;
  std::mt19937_64 gen_;
};

}  // namespace flowcheck
