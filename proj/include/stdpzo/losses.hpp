#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stdpzo/core.hpp"
#include "stdpzo/rng.hpp"

namespace stdpzo {

// One observation (X_k, Y_k). Fixed-target problems carry an empty x.
struct SupervisedSample {
  RealVector x;
  double y = 0.0;
  std::uint64_t index = 0;
};

// Loss evaluated at already-perturbed parameters; perturbing is the
// optimizer's job. Implementations are stateless.
class LossFunction {
 public:
  virtual ~LossFunction() = default;

  virtual double evaluate(const RealVector& params,
                          const SupervisedSample& sample) const = 0;

  // Analytic gradient in params, if the loss has one.
  virtual std::optional<RealVector> gradient(
      const RealVector& /*params*/, const SupervisedSample& /*sample*/) const {
    return std::nullopt;
  }

  virtual std::string name() const = 0;
};

double least_squares_loss(const RealVector& theta, const RealVector& y);
RealVector least_squares_gradient(const RealVector& theta, const RealVector& y);

double linear_model_loss(const RealVector& theta, const SupervisedSample& s);
RealVector linear_model_gradient(const RealVector& theta,
                                 const SupervisedSample& s);

// ‖Y − θ‖²; the target lives in the loss, samples are ignored.
class LeastSquaresLoss final : public LossFunction {
 public:
  explicit LeastSquaresLoss(RealVector target);

  const RealVector& target() const noexcept { return target_; }

  double evaluate(const RealVector& params,
                  const SupervisedSample& sample) const override;
  std::optional<RealVector> gradient(
      const RealVector& params, const SupervisedSample& sample) const override;
  std::string name() const override { return "least_squares"; }

 private:
  RealVector target_;
};

// (y − ⟨x, θ⟩)² for the streamed sample.
class LinearModelLoss final : public LossFunction {
 public:
  double evaluate(const RealVector& params,
                  const SupervisedSample& sample) const override;
  std::optional<RealVector> gradient(
      const RealVector& params, const SupervisedSample& sample) const override;
  std::string name() const override { return "linear_model"; }
};

// Σ_j (θ_j − c_j)⁴. Non-quadratic test loss.
class QuarticLoss final : public LossFunction {
 public:
  explicit QuarticLoss(RealVector center);

  double evaluate(const RealVector& params,
                  const SupervisedSample& sample) const override;
  std::optional<RealVector> gradient(
      const RealVector& params, const SupervisedSample& sample) const override;
  std::string name() const override { return "quartic"; }

 private:
  RealVector center_;
};

class ConstantLoss final : public LossFunction {
 public:
  explicit ConstantLoss(double value) : value_(value) {}

  double evaluate(const RealVector&, const SupervisedSample&) const override {
    return value_;
  }
  std::optional<RealVector> gradient(const RealVector& params,
                                     const SupervisedSample&) const override {
    return RealVector::Zero(params.size());
  }
  std::string name() const override { return "constant"; }

 private:
  double value_;
};

// Central differences (L(θ + h e_j) − L(θ − h e_j)) / 2h per coordinate.
RealVector finite_diff_gradient(const LossFunction& loss,
                                const RealVector& theta, double h,
                                const SupervisedSample& sample = {});

// Analytic gradient when available, central differences otherwise.
RealVector loss_gradient(const LossFunction& loss, const RealVector& theta,
                         const SupervisedSample& sample, double h = 1e-6);

struct DataSpec {
  enum class Kind { fixed_target, linear_gaussian };

  Kind kind = Kind::fixed_target;
  RealVector theta_star;  // linear_gaussian only
  double noise_sd = 0.0;

  static DataSpec fixed_target() { return {}; }
  static DataSpec linear_gaussian(RealVector theta_star, double noise_sd);

  void validate() const;
};

// I.i.d. samples. linear_gaussian draws x with standard normal entries and
// y = ⟨x, θ*⟩ + N(0, noise_sd²). Single consumer.
class DataStream {
 public:
  DataStream(DataSpec spec, RngStream rng);

  const DataSpec& spec() const noexcept { return spec_; }
  SupervisedSample next();

 private:
  DataSpec spec_;
  RngStream rng_;
  std::uint64_t count_ = 0;
};

std::vector<SupervisedSample> generate_stream(DataStream& stream,
                                              std::size_t n);

}  // namespace stdpzo
