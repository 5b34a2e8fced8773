#include "stdpzo/perturbation.hpp"

#include <cmath>
#include <stdexcept>

namespace stdpzo {

void NoiseConfig::validate() const {
  if (!(half_interval > 0.0) || !std::isfinite(half_interval))
    throw std::invalid_argument("half_interval must be positive");
  if (dim < 1) throw std::invalid_argument("dim must be at least 1");
}

RealVector sample_uniform(const NoiseConfig& cfg, RngStream& rng) {
  cfg.validate();
  return rng.uniform_vector(cfg.dim, -cfg.half_interval, cfg.half_interval);
}

double normalizer_c(double half_interval) {
  if (!(half_interval > 0.0) || !std::isfinite(half_interval))
    throw std::invalid_argument("half_interval must be positive");
  const double x = 2.0 * half_interval;
  if (x >= 1.0) {
    const double e = std::exp(x);
    return x * (e + 1.0) + 2.0 - 2.0 * e;
  }
  // Same quantity as sum_{n>=3} (n-2) x^n / n!; every term is positive.
  double term = x * x * x / 6.0;  // x^n / n! at n = 3
  double sum = term;
  for (int n = 4; n < 40; ++n) {
    term *= x / n;
    const double add = (n - 2) * term;
    sum += add;
    if (add < sum * 1e-18) break;
  }
  return sum;
}

double timing_weight(double x, double half_interval) {
  return std::expm1(half_interval - x) * std::expm1(half_interval + x);
}

PerturbationDensity::PerturbationDensity(double half_interval)
    : half_interval_(half_interval), normalizer_(normalizer_c(half_interval)) {
  const double m = std::expm1(half_interval_);
  peak_ = m * m / normalizer_;
}

double PerturbationDensity::operator()(double x) const {
  if (!(std::abs(x) <= half_interval_)) return 0.0;
  return timing_weight(x, half_interval_) / normalizer_;
}

double density_fa(double x, const PerturbationDensity& pd) { return pd(x); }

double sample_fa(const PerturbationDensity& pd, RngStream& rng,
                 std::uint64_t* proposals) {
  const double a = pd.half_interval();
  for (;;) {
    const double x = rng.uniform(-a, a);
    const double u = rng.uniform01();
    if (proposals) ++*proposals;
    if (u * pd.peak() <= pd(x)) return x;
  }
}

}  // namespace stdpzo
