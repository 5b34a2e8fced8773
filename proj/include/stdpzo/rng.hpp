#pragma once

#include <cstdint>
#include <random>

#include "stdpzo/core.hpp"

namespace stdpzo {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Deterministic random stream identified by (seed, stream id).
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. Variates are derived here rather than through <random>
// distributions, whose algorithms differ between standard libraries, so a
// given (seed, stream) yields the same samples on every platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  // Independent child stream; children of different ids never share a state.
  RngStream substream(std::uint64_t id) const;

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi);
  // Standard normal (Marsaglia polar method; the second variate is cached).
  double normal();

  RealVector uniform_vector(Eigen::Index d, double lo, double hi);
  RealVector normal_vector(Eigen::Index d, double sd = 1.0);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace stdpzo
