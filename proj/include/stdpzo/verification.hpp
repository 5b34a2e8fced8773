#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stdpzo/core.hpp"
#include "stdpzo/losses.hpp"
#include "stdpzo/optimizers.hpp"
#include "stdpzo/rng.hpp"

namespace stdpzo {

// Outcome of one Monte Carlo check. rel_err is |estimate − oracle| / |oracle|
// per coordinate, absent where the oracle is zero.
struct CheckReport {
  std::string name;
  std::uint64_t n = 0;
  std::uint64_t seed = 0;
  RealVector estimate;
  RealVector oracle;
  RealVector se;
  std::vector<std::optional<double>> rel_err;
  bool pass = false;
  // Additional estimates keyed by route name (e.g. "raw", "gradient", "quadrature").
  std::map<std::string, RealVector> routes;
  std::map<std::string, RealVector> route_se;
};

// {name, n, seed, estimate, oracle, se, rel_err, pass}
std::string report_to_json(const CheckReport& report, int indent = -1);
std::string reports_to_json(const std::vector<CheckReport>& reports, int indent = 2);

// How a check decides pass/fail on a nonzero oracle. Zero oracles always use
// the 3·SE band.
struct Agreement {
  enum class Kind { relative, standard_error };

  Kind kind = Kind::relative;
  double rel_tol = 0.05;
  double se_band = 3.0;

  static Agreement relative(double tol) { return {Kind::relative, tol, 3.0}; }
  static Agreement standard_error(double band = 3.0) {
    return {Kind::standard_error, 0.0, band};
  }
};

// Per-coordinate running mean and standard error.
class VectorMeanAccumulator {
 public:
  explicit VectorMeanAccumulator(Eigen::Index dim);

  void add(const RealVector& x);
  std::uint64_t count() const noexcept { return count_; }
  RealVector mean() const { return mean_; }
  RealVector standard_error() const;

 private:
  std::uint64_t count_ = 0;
  RealVector mean_;
  RealVector m2_;
};

// E[L(θ+ξ) ξ] = σ² E[∇L(θ+ξ)] for ξ ~ N(0, σ²I) and L = ‖y − ·‖², whose right
// side is −2σ²(y − θ).
CheckReport check_stein(const RealVector& theta, const RealVector& y,
                        double sigma2, std::uint64_t n, RngStream rng,
                        Agreement agreement = Agreement::relative(0.05));

struct Theorem1Options {
  double half_interval = 1.0;
  double alpha = 1.0;
  std::uint64_t n = 1'000'000;
  // Tensor-product quadrature route, available for d <= 3.
  bool quadrature = true;
  double quadrature_tol = 1e-12;
  Agreement agreement = Agreement::relative(0.02);
};

// Mean BNN step with L̄ = 0, three ways:
//   raw:        MC mean of α L(θ+U)(e^{−U} − e^{U})
//   gradient:   MC mean of −α e^{−A} ∇L(θ+U) ⊙ (e^A − e^U) ⊙ (e^A − e^{−U})
//   quadrature: the gradient form integrated over [−A, A]^d
// estimate = raw; oracle = quadrature (gradient when quadrature is off).
// Pairwise agreement of all available routes decides pass.
CheckReport check_theorem1(const LossFunction& loss, const RealVector& theta,
                           const SupervisedSample& sample,
                           const Theorem1Options& options, RngStream rng);

// −α e^{−A} C(A)/(2A) · E[∂_j L(θ + U^{(j)})], where U^{(j)} has its j-th entry
// drawn from f_A and the rest uniform, compared per coordinate against the
// raw-step mean of check_theorem1 within the combined 3·SE band.
CheckReport check_componentwise(const LossFunction& loss, const RealVector& theta,
                                const SupervisedSample& sample, double half_interval,
                                double alpha, std::uint64_t n, RngStream rng);

// E[L(θ_prev + U_prev)(e^{−U} − e^{U})] = 0 for independent U_prev, U.
CheckReport check_zero_mean_prev(const LossFunction& loss,
                                 const RealVector& theta_prev,
                                 const SupervisedSample& sample,
                                 double half_interval, std::uint64_t n,
                                 RngStream rng);

// Closed-form C(A) against quadrature of (e^A − e^x)(e^A − e^{−x}) on each A
// of the grid (relative tolerance), plus C(1) = 4 (absolute tolerance).
CheckReport check_normalizer(const std::vector<double>& grid,
                             double rel_tol = 1e-9, double exact_tol = 1e-12);

// ∫ f_A = 1 by quadrature on each A of the grid.
CheckReport check_density_normalization(const std::vector<double>& grid,
                                        double tol = 1e-9);

// Pearson chi-square of sample_fa draws over equal-width bins on [−A, A]
// against quadrature bin masses. estimate = statistic, oracle = critical
// value at `significance`; passes when the statistic is below it.
CheckReport check_density_chi_square(double half_interval, std::uint64_t n,
                                     int bins, double significance, RngStream rng);

struct SweepPoint {
  Eigen::Index d = 0;
  double variance = 0.0;
  double se = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::optional<double> slope;  // least-squares slope of log Var on log d
};

// Variance of coordinate 0 of σ^{−2} L(θ+ξ) ξ for L = ‖y − ·‖² with
// θ = 0 and y = residual · 1.
SweepPoint estimate_one_point_variance(Eigen::Index d, double sigma2,
                                       double residual, std::uint64_t n,
                                       RngStream& rng);

SweepResult variance_scaling_sweep(const std::vector<Eigen::Index>& dims,
                                   double sigma2, std::uint64_t n, RngStream rng,
                                   double residual = 1.0);

std::optional<double> fit_loglog_slope(const std::vector<SweepPoint>& points);

struct DivergenceConfig {
  Eigen::Index d = 100;
  double target = 0.0;       // y = target · 1
  double start = 1.0;        // θ_0 = start · 1
  double alpha = 1e-4;
  double gd_alpha = 0.1;
  double sigma2 = 1.0;
  std::uint64_t iterations = 200;
  std::uint64_t seed = 0;
  double divergence_factor = 10.0;
  double convergence_factor = 0.1;

  // Configuration shipped with the repository as a regression fixture.
  static DivergenceConfig pinned();
};

struct DivergenceResult {
  Trace one_point;
  Trace gd;
  double initial_loss = 0.0;
  double one_point_final = 0.0;
  double gd_final = 0.0;
  bool diverged = false;       // one_point final > divergence_factor · initial
  bool gd_converged = false;   // gd final < convergence_factor · initial
  bool gd_monotone = false;
};

DivergenceResult divergence_demo(const DivergenceConfig& config);

}  // namespace stdpzo
