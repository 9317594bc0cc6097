#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace fairl {

// Counter-based generator: output i is a SplitMix64 finalisation of
// key + i * golden_gamma, where key is derived from (seed, stream).
// Streams are independent, so (seed, epoch) or (seed, step) keys give
// reproducible draws without sharing mutable state.
class Rng {
public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller; caches the second variate.
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p);

  void fill_normal(std::span<double> out);
  // Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream);

}  // namespace fairl
