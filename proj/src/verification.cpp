#include "stdpzo/verification.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>

#include "json.hpp"
#include "stdpzo/perturbation.hpp"
#include "stdpzo/quadrature.hpp"

namespace stdpzo {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kZeroOracle = 1e-12;

bool is_zero(double x) { return std::abs(x) <= kZeroOracle; }

ordered_json vector_json(const RealVector& v) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (std::isfinite(v[j]))
      out.push_back(v[j]);
    else
      out.push_back(nullptr);
  }
  return out;
}

ordered_json report_json(const CheckReport& r) {
  ordered_json doc;
  doc["name"] = r.name;
  doc["n"] = r.n;
  doc["seed"] = r.seed;
  doc["estimate"] = vector_json(r.estimate);
  doc["oracle"] = vector_json(r.oracle);
  doc["se"] = vector_json(r.se);
  ordered_json rel = ordered_json::array();
  for (const auto& e : r.rel_err) {
    if (e && std::isfinite(*e))
      rel.push_back(*e);
    else
      rel.push_back(nullptr);
  }
  doc["rel_err"] = rel;
  doc["pass"] = r.pass;
  return doc;
}

std::vector<std::optional<double>> relative_errors(const RealVector& estimate,
                                                   const RealVector& oracle) {
  std::vector<std::optional<double>> out(estimate.size());
  for (Eigen::Index j = 0; j < estimate.size(); ++j)
    if (!is_zero(oracle[j]))
      out[j] = std::abs(estimate[j] - oracle[j]) / std::abs(oracle[j]);
  return out;
}

// Estimate vs exact oracle, per coordinate.
bool agrees(const RealVector& estimate, const RealVector& se,
            const RealVector& oracle, const Agreement& rule) {
  for (Eigen::Index j = 0; j < estimate.size(); ++j) {
    const double diff = std::abs(estimate[j] - oracle[j]);
    if (is_zero(oracle[j]) || rule.kind == Agreement::Kind::standard_error) {
      if (!(diff <= rule.se_band * se[j])) return false;
    } else if (!(diff <= rule.rel_tol * std::abs(oracle[j]))) {
      return false;
    }
  }
  return true;
}

// ∫_{[−A,A]^d} f(u) du by nested adaptive quadrature.
double integrate_box(const std::function<double(const RealVector&)>& f,
                     Eigen::Index d, double a, double tol) {
  RealVector u = RealVector::Zero(d);
  std::function<double(Eigen::Index)> level = [&](Eigen::Index i) -> double {
    if (i == d) return f(u);
    return integrate(
               [&](double x) {
                 u[i] = x;
                 return level(i + 1);
               },
               -a, a, tol)
        .value;
  };
  return level(0);
}

}  // namespace

std::string report_to_json(const CheckReport& report, int indent) {
  return report_json(report).dump(indent);
}

std::string reports_to_json(const std::vector<CheckReport>& reports, int indent) {
  ordered_json doc = ordered_json::array();
  for (const auto& r : reports) doc.push_back(report_json(r));
  return doc.dump(indent);
}

VectorMeanAccumulator::VectorMeanAccumulator(Eigen::Index dim)
    : mean_(RealVector::Zero(dim)), m2_(RealVector::Zero(dim)) {}

void VectorMeanAccumulator::add(const RealVector& x) {
  ++count_;
  const RealVector delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_ += delta.cwiseProduct(x - mean_);
}

RealVector VectorMeanAccumulator::standard_error() const {
  if (count_ < 2) return RealVector::Constant(mean_.size(), std::numeric_limits<double>::infinity());
  const double n = static_cast<double>(count_);
  return (m2_ / (n - 1.0) / n).cwiseSqrt();
}

CheckReport check_stein(const RealVector& theta, const RealVector& y,
                        double sigma2, std::uint64_t n, RngStream rng,
                        Agreement agreement) {
  require_same_dim(theta, y, "check_stein");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
  if (n < 2) throw std::invalid_argument("check_stein needs n >= 2");
  const double sd = std::sqrt(sigma2);
  VectorMeanAccumulator acc(theta.size());
  RealVector xi(theta.size());
  for (std::uint64_t i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < xi.size(); ++j) xi[j] = sd * rng.normal();
    const double value = (y - theta - xi).squaredNorm();
    acc.add(value * xi);
  }
  CheckReport r;
  r.name = "stein";
  r.n = n;
  r.seed = rng.seed();
  r.estimate = acc.mean();
  r.se = acc.standard_error();
  r.oracle = -2.0 * sigma2 * (y - theta);
  r.rel_err = relative_errors(r.estimate, r.oracle);
  r.pass = agrees(r.estimate, r.se, r.oracle, agreement);
  return r;
}

CheckReport check_theorem1(const LossFunction& loss, const RealVector& theta,
                           const SupervisedSample& sample,
                           const Theorem1Options& options, RngStream rng) {
  const double a = options.half_interval;
  NoiseConfig{a, theta.size()}.validate();
  if (options.n < 2) throw std::invalid_argument("check_theorem1 needs n >= 2");
  const Eigen::Index d = theta.size();
  if (options.quadrature && d > 3)
    throw std::invalid_argument("check_theorem1: quadrature route needs d <= 3");

  const double alpha = options.alpha;
  const double scale = alpha * std::exp(-a);
  VectorMeanAccumulator raw(d), grad(d);
  RealVector weight(d);
  for (std::uint64_t i = 0; i < options.n; ++i) {
    const RealVector u = rng.uniform_vector(d, -a, a);
    const RealVector point = theta + u;
    raw.add((alpha * loss.evaluate(point, sample)) * timing_factor(u));
    for (Eigen::Index j = 0; j < d; ++j) weight[j] = timing_weight(u[j], a);
    grad.add(-scale * hadamard(loss_gradient(loss, point, sample), weight));
  }

  CheckReport r;
  r.name = "theorem1";
  r.n = options.n;
  r.seed = rng.seed();
  r.estimate = raw.mean();
  r.se = raw.standard_error();
  r.routes["raw"] = raw.mean();
  r.routes["gradient"] = grad.mean();
  r.route_se["raw"] = raw.standard_error();
  r.route_se["gradient"] = grad.standard_error();

  if (options.quadrature) {
    RealVector quad(d);
    const double volume = std::pow(2.0 * a, static_cast<double>(d));
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto integrand = [&](const RealVector& u) {
        return loss_gradient(loss, theta + u, sample)[j] * timing_weight(u[j], a);
      };
      quad[j] = -scale * integrate_box(integrand, d, a, options.quadrature_tol) / volume;
    }
    r.routes["quadrature"] = quad;
    r.route_se["quadrature"] = RealVector::Zero(d);
    r.oracle = quad;
  } else {
    r.oracle = grad.mean();
  }
  r.rel_err = relative_errors(r.estimate, r.oracle);

  // Every pair of routes must agree; for Monte Carlo pairs the band uses the
  // combined standard error.
  const Agreement& rule = options.agreement;
  bool pass = true;
  std::vector<std::string> names;
  for (const auto& [name, _] : r.routes) names.push_back(name);
  for (std::size_t p = 0; p < names.size(); ++p) {
    for (std::size_t q = p + 1; q < names.size(); ++q) {
      const RealVector& x = r.routes[names[p]];
      const RealVector& y = r.routes[names[q]];
      const RealVector band =
          (r.route_se[names[p]].array().square() + r.route_se[names[q]].array().square())
              .sqrt()
              .matrix();
      for (Eigen::Index j = 0; j < d; ++j) {
        const double diff = std::abs(x[j] - y[j]);
        if (is_zero(r.oracle[j])) {
          // Each Monte Carlo route sits within its own band of zero.
          if (!(std::abs(x[j]) <= rule.se_band * std::max(r.route_se[names[p]][j], kZeroOracle)))
            pass = false;
          if (!(std::abs(y[j]) <= rule.se_band * std::max(r.route_se[names[q]][j], kZeroOracle)))
            pass = false;
        } else if (rule.kind == Agreement::Kind::standard_error) {
          if (!(diff <= rule.se_band * band[j])) pass = false;
        } else if (!(diff <= rule.rel_tol * std::abs(r.oracle[j]))) {
          pass = false;
        }
      }
    }
  }
  r.pass = pass;
  return r;
}

CheckReport check_componentwise(const LossFunction& loss, const RealVector& theta,
                                const SupervisedSample& sample, double half_interval,
                                double alpha, std::uint64_t n, RngStream rng) {
  const double a = half_interval;
  const Eigen::Index d = theta.size();
  const PerturbationDensity density(a);
  const double scale = -alpha * std::exp(-a) * density.normalizer() / (2.0 * a);

  RngStream own = rng.substream(0);
  VectorMeanAccumulator acc(d);
  RealVector partials(d);
  for (std::uint64_t i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      RealVector u = own.uniform_vector(d, -a, a);
      u[j] = sample_fa(density, own);
      partials[j] = loss_gradient(loss, theta + u, sample)[j];
    }
    acc.add(scale * partials);
  }

  Theorem1Options t1;
  t1.half_interval = a;
  t1.alpha = alpha;
  t1.n = n;
  t1.quadrature = false;
  const CheckReport reference = check_theorem1(loss, theta, sample, t1, rng.substream(1));

  CheckReport r;
  r.name = "componentwise";
  r.n = n;
  r.seed = rng.seed();
  r.estimate = acc.mean();
  r.oracle = reference.estimate;
  const RealVector own_se = acc.standard_error();
  r.se = (own_se.array().square() + reference.se.array().square()).sqrt().matrix();
  r.routes["componentwise"] = r.estimate;
  r.routes["theorem1_raw"] = reference.estimate;
  r.route_se["componentwise"] = own_se;
  r.route_se["theorem1_raw"] = reference.se;
  r.rel_err = relative_errors(r.estimate, r.oracle);
  r.pass = true;
  for (Eigen::Index j = 0; j < d; ++j)
    if (!(std::abs(r.estimate[j] - r.oracle[j]) <= 3.0 * r.se[j])) r.pass = false;
  return r;
}

CheckReport check_zero_mean_prev(const LossFunction& loss,
                                 const RealVector& theta_prev,
                                 const SupervisedSample& sample,
                                 double half_interval, std::uint64_t n,
                                 RngStream rng) {
  const double a = half_interval;
  NoiseConfig{a, theta_prev.size()}.validate();
  if (n < 2) throw std::invalid_argument("check_zero_mean_prev needs n >= 2");
  const Eigen::Index d = theta_prev.size();
  VectorMeanAccumulator acc(d);
  for (std::uint64_t i = 0; i < n; ++i) {
    const RealVector u_prev = rng.uniform_vector(d, -a, a);
    const RealVector u = rng.uniform_vector(d, -a, a);
    acc.add(loss.evaluate(theta_prev + u_prev, sample) * timing_factor(u));
  }
  CheckReport r;
  r.name = "zero_mean_prev";
  r.n = n;
  r.seed = rng.seed();
  r.estimate = acc.mean();
  r.se = acc.standard_error();
  r.oracle = RealVector::Zero(d);
  r.rel_err = relative_errors(r.estimate, r.oracle);
  r.pass = agrees(r.estimate, r.se, r.oracle, Agreement::standard_error());
  return r;
}

CheckReport check_normalizer(const std::vector<double>& grid, double rel_tol,
                             double exact_tol) {
  CheckReport r;
  r.name = "normalizer";
  const auto m = static_cast<Eigen::Index>(grid.size());
  r.estimate.resize(m + 1);
  r.oracle.resize(m + 1);
  r.se = RealVector::Zero(m + 1);
  r.pass = true;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double a = grid[i];
    r.estimate[i] =
        integrate([a](double x) { return timing_weight(x, a); }, -a, a, 1e-12).value;
    r.oracle[i] = normalizer_c(a);
    if (!(std::abs(r.estimate[i] - r.oracle[i]) <= rel_tol * r.oracle[i])) r.pass = false;
  }
  r.estimate[m] = normalizer_c(1.0);
  r.oracle[m] = 4.0;
  if (!(std::abs(r.estimate[m] - 4.0) <= exact_tol)) r.pass = false;
  r.rel_err = relative_errors(r.estimate, r.oracle);
  return r;
}

CheckReport check_density_normalization(const std::vector<double>& grid, double tol) {
  CheckReport r;
  r.name = "density_normalization";
  const auto m = static_cast<Eigen::Index>(grid.size());
  r.estimate.resize(m);
  r.oracle = RealVector::Ones(m);
  r.se = RealVector::Zero(m);
  r.pass = true;
  for (Eigen::Index i = 0; i < m; ++i) {
    const PerturbationDensity pd(grid[i]);
    r.estimate[i] = integrate([&pd](double x) { return pd(x); }, -grid[i], grid[i], 1e-12).value;
    if (!(std::abs(r.estimate[i] - 1.0) <= tol)) r.pass = false;
  }
  r.rel_err = relative_errors(r.estimate, r.oracle);
  return r;
}

CheckReport check_density_chi_square(double half_interval, std::uint64_t n,
                                     int bins, double significance, RngStream rng) {
  if (bins < 2) throw std::invalid_argument("chi-square needs at least 2 bins");
  const PerturbationDensity pd(half_interval);
  const double a = half_interval;
  const double width = 2.0 * a / bins;
  std::vector<std::uint64_t> counts(bins, 0);
  for (std::uint64_t i = 0; i < n; ++i) {
    const double x = sample_fa(pd, rng);
    int b = static_cast<int>((x + a) / width);
    if (b >= bins) b = bins - 1;
    if (b < 0) b = 0;
    ++counts[b];
  }
  double stat = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double lo = -a + b * width;
    const double mass =
        integrate([&pd](double x) { return pd(x); }, lo, lo + width, 1e-13).value;
    const double expected = mass * static_cast<double>(n);
    const double diff = static_cast<double>(counts[b]) - expected;
    stat += diff * diff / expected;
  }
  const boost::math::chi_squared dist(bins - 1);
  CheckReport r;
  r.name = "density_chi_square";
  r.n = n;
  r.seed = rng.seed();
  r.estimate = RealVector::Constant(1, stat);
  r.oracle = RealVector::Constant(1, boost::math::quantile(boost::math::complement(dist, significance)));
  r.se = RealVector::Zero(1);
  r.rel_err = relative_errors(r.estimate, r.oracle);
  r.pass = stat <= r.oracle[0];
  return r;
}

SweepPoint estimate_one_point_variance(Eigen::Index d, double sigma2,
                                       double residual, std::uint64_t n,
                                       RngStream& rng) {
  if (d < 1) throw std::invalid_argument("sweep dimension must be >= 1");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
  if (n < 2) throw std::invalid_argument("sweep needs n >= 2");
  const double sd = std::sqrt(sigma2);
  std::vector<double> values(n);
  double mean = 0.0;
  for (std::uint64_t i = 0; i < n; ++i) {
    double loss = 0.0;
    double first = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double xi = sd * rng.normal();
      if (j == 0) first = xi;
      const double r = residual - xi;
      loss += r * r;
    }
    values[i] = loss * first / sigma2;
    mean += values[i];
  }
  mean /= static_cast<double>(n);
  double m2 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double c = (v - mean) * (v - mean);
    m2 += c;
    m4 += c * c;
  }
  const double nn = static_cast<double>(n);
  const double var = m2 / (nn - 1.0);
  const double fourth = m4 / nn;
  const double se = std::sqrt(std::max(0.0, fourth - var * var) / nn);
  return {d, var, se};
}

std::optional<double> fit_loglog_slope(const std::vector<SweepPoint>& points) {
  if (points.size() < 2) return std::nullopt;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : points) {
    const double x = std::log(static_cast<double>(p.d));
    const double y = std::log(p.variance);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = static_cast<double>(points.size());
  const double denom = m * sxx - sx * sx;
  if (denom == 0.0) return std::nullopt;
  return (m * sxy - sx * sy) / denom;
}

SweepResult variance_scaling_sweep(const std::vector<Eigen::Index>& dims,
                                   double sigma2, std::uint64_t n, RngStream rng,
                                   double residual) {
  SweepResult result;
  for (Eigen::Index d : dims) {
    RngStream sub = rng.substream(static_cast<std::uint64_t>(d));
    result.points.push_back(estimate_one_point_variance(d, sigma2, residual, n, sub));
  }
  result.slope = fit_loglog_slope(result.points);
  return result;
}

// Found by scanning (start, alpha) on seed 0; the 1-point run overflows near
// iteration 119 while gd with alpha 0.1 contracts by 0.8 per step.
DivergenceConfig DivergenceConfig::pinned() {
  DivergenceConfig c;
  c.d = 100;
  c.start = 3.0;
  c.alpha = 3e-4;
  c.gd_alpha = 0.1;
  c.seed = 0;
  return c;
}

DivergenceResult divergence_demo(const DivergenceConfig& config) {
  const Problem problem = Problem::least_squares(RealVector::Constant(config.d, config.target));
  RunConfig run;
  run.iterations = config.iterations;
  run.seed = config.seed;
  run.theta0 = RealVector::Constant(config.d, config.start);
  run.gaussian = GaussianNoiseConfig::canonical(config.sigma2);

  DivergenceResult out;
  out.initial_loss = problem.objective(*run.theta0);

  run.schedule = LearningRateSchedule::constant(config.alpha);
  run.methods = {Method::one_point};
  try {
    out.one_point = run_single(problem, run, Method::one_point, 0);
    out.one_point_final = out.one_point.empty() ? out.initial_loss : out.one_point.back().loss;
  } catch (const RunError& e) {
    // Overflow before the last iteration counts as divergence.
    out.one_point = e.rows();
    out.one_point_final = std::numeric_limits<double>::infinity();
  }

  run.schedule = LearningRateSchedule::constant(config.gd_alpha);
  run.methods = {Method::gradient_descent};
  out.gd = run_single(problem, run, Method::gradient_descent, 0);
  out.gd_final = out.gd.empty() ? out.initial_loss : out.gd.back().loss;

  out.diverged = out.one_point_final > config.divergence_factor * out.initial_loss;
  out.gd_converged = out.gd_final < config.convergence_factor * out.initial_loss;
  out.gd_monotone = true;
  for (std::size_t i = 1; i < out.gd.size(); ++i)
    if (out.gd[i].loss > out.gd[i - 1].loss) out.gd_monotone = false;
  return out;
}

}  // namespace stdpzo
