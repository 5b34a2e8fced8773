#pragma once

#include <cstdint>

#include "stdpzo/core.hpp"
#include "stdpzo/rng.hpp"

namespace stdpzo {

// Spike-timing noise U ~ Uniform([-A, A]^d); A is half the interspike interval.
struct NoiseConfig {
  double half_interval = 1.0;
  Eigen::Index dim = 1;

  void validate() const;
};

RealVector sample_uniform(const NoiseConfig& cfg, RngStream& rng);

// C(A) = 2A(e^{2A}+1) + 2 - 2e^{2A} = ∫_{-A}^{A} (e^A - e^x)(e^A - e^{-x}) dx.
double normalizer_c(double half_interval);

// (e^A - e^x)(e^A - e^{-x}), written as expm1(A - x) * expm1(A + x) so that it
// stays accurate for small A. Nonnegative on [-A, A], zero at the endpoints.
double timing_weight(double x, double half_interval);

// Density f_A(x) = C(A)^{-1} (e^A - e^x)(e^A - e^{-x}) on [-A, A].
class PerturbationDensity {
 public:
  explicit PerturbationDensity(double half_interval);

  double half_interval() const noexcept { return half_interval_; }
  double normalizer() const noexcept { return normalizer_; }
  // f_A(0), the maximum of the density.
  double peak() const noexcept { return peak_; }

  double operator()(double x) const;

  // Probability that one uniform proposal is accepted by sample_fa.
  double acceptance_probability() const noexcept {
    return 1.0 / (2.0 * half_interval_ * peak_);
  }

 private:
  double half_interval_;
  double normalizer_;
  double peak_;
};

double density_fa(double x, const PerturbationDensity& pd);

// Rejection sampler with a uniform proposal on [-A, A] and envelope f_A(0).
// If proposals is non-null it is incremented by the number of proposals used.
double sample_fa(const PerturbationDensity& pd, RngStream& rng,
                 std::uint64_t* proposals = nullptr);

}  // namespace stdpzo
