#pragma once

#include <cstdint>

namespace sdid {

// Counter-based splittable generator built on the SplitMix64 finalizer.
// A stream is keyed by (seed, stream); draw k of a stream is a pure function
// of (seed, stream, k), so replications seeded as (seed, b) can run in any
// order, on any number of threads, and still produce identical results.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();

  // Uniform on (0,1), never exactly 0 or 1.
  double next_unit();

  // Standard normal via the inverse CDF (see normal_quantile below).
  double next_normal();

  // Uniform integer in [0, n); rejection sampling keeps it unbiased.
  int next_below(int n);

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

// Inverse standard normal CDF, Wichura's AS 241 rational approximation
// (absolute error well below 1e-9 over (0,1)). Throws sdid::Error outside (0,1).
double normal_quantile(double p);

}  // namespace sdid
