#include "stdpzo/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace stdpzo {

double least_squares_loss(const RealVector& theta, const RealVector& y) {
  require_same_dim(theta, y, "least_squares_loss");
  return (y - theta).squaredNorm();
}

RealVector least_squares_gradient(const RealVector& theta, const RealVector& y) {
  require_same_dim(theta, y, "least_squares_gradient");
  return -2.0 * (y - theta);
}

double linear_model_loss(const RealVector& theta, const SupervisedSample& s) {
  require_same_dim(theta, s.x, "linear_model_loss");
  const double r = s.y - s.x.dot(theta);
  return r * r;
}

RealVector linear_model_gradient(const RealVector& theta,
                                 const SupervisedSample& s) {
  require_same_dim(theta, s.x, "linear_model_gradient");
  return -2.0 * (s.y - s.x.dot(theta)) * s.x;
}

LeastSquaresLoss::LeastSquaresLoss(RealVector target)
    : target_(std::move(target)) {
  require_finite(target_, "least squares target");
}

double LeastSquaresLoss::evaluate(const RealVector& params,
                                  const SupervisedSample&) const {
  return least_squares_loss(params, target_);
}

std::optional<RealVector> LeastSquaresLoss::gradient(
    const RealVector& params, const SupervisedSample&) const {
  return least_squares_gradient(params, target_);
}

double LinearModelLoss::evaluate(const RealVector& params,
                                 const SupervisedSample& sample) const {
  return linear_model_loss(params, sample);
}

std::optional<RealVector> LinearModelLoss::gradient(
    const RealVector& params, const SupervisedSample& sample) const {
  return linear_model_gradient(params, sample);
}

QuarticLoss::QuarticLoss(RealVector center) : center_(std::move(center)) {}

double QuarticLoss::evaluate(const RealVector& params,
                             const SupervisedSample&) const {
  require_same_dim(params, center_, "quartic loss");
  return (params - center_).array().pow(4).sum();
}

std::optional<RealVector> QuarticLoss::gradient(const RealVector& params,
                                                const SupervisedSample&) const {
  require_same_dim(params, center_, "quartic loss");
  return RealVector(4.0 * (params - center_).array().cube());
}

RealVector finite_diff_gradient(const LossFunction& loss,
                                const RealVector& theta, double h,
                                const SupervisedSample& sample) {
  if (!(h > 0.0)) throw std::invalid_argument("finite difference step must be positive");
  RealVector grad(theta.size());
  RealVector probe = theta;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    probe[j] = theta[j] + h;
    const double up = loss.evaluate(probe, sample);
    probe[j] = theta[j] - h;
    const double down = loss.evaluate(probe, sample);
    probe[j] = theta[j];
    grad[j] = (up - down) / (2.0 * h);
  }
  return grad;
}

RealVector loss_gradient(const LossFunction& loss, const RealVector& theta,
                         const SupervisedSample& sample, double h) {
  if (auto g = loss.gradient(theta, sample)) return *std::move(g);
  return finite_diff_gradient(loss, theta, h, sample);
}

DataSpec DataSpec::linear_gaussian(RealVector theta_star, double noise_sd) {
  DataSpec spec{Kind::linear_gaussian, std::move(theta_star), noise_sd};
  spec.validate();
  return spec;
}

void DataSpec::validate() const {
  if (kind == Kind::linear_gaussian) {
    if (theta_star.size() == 0)
      throw std::invalid_argument("linear_gaussian needs a nonempty theta_star");
    require_finite(theta_star, "theta_star");
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd))
      throw std::invalid_argument("noise_sd must be nonnegative");
  }
}

DataStream::DataStream(DataSpec spec, RngStream rng)
    : spec_(std::move(spec)), rng_(std::move(rng)) {
  spec_.validate();
}

SupervisedSample DataStream::next() {
  SupervisedSample s;
  s.index = count_++;
  if (spec_.kind == DataSpec::Kind::linear_gaussian) {
    s.x = rng_.normal_vector(spec_.theta_star.size());
    s.y = s.x.dot(spec_.theta_star);
    if (spec_.noise_sd > 0.0) s.y += spec_.noise_sd * rng_.normal();
  }
  return s;
}

std::vector<SupervisedSample> generate_stream(DataStream& stream,
                                              std::size_t n) {
  std::vector<SupervisedSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(stream.next());
  return out;
}

}  // namespace stdpzo
