#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stdpzo/core.hpp"
#include "stdpzo/losses.hpp"
#include "stdpzo/perturbation.hpp"
#include "stdpzo/rng.hpp"
#include "stdpzo/schedule.hpp"

namespace stdpzo {

// ξ ~ N(0, σ² I_d), scaled by β in the 1-point estimate β L(θ+ξ) ξ.
struct GaussianNoiseConfig {
  double sigma2 = 1.0;
  double beta = 1.0;

  static GaussianNoiseConfig canonical(double sigma2) { return {sigma2, 1.0 / sigma2}; }
  void validate() const;
};

// Baseline L̄ subtracted from the realized loss. The weighted kinds use
// γ_ℓ ∝ e^{-λℓ} or ℓ^{-λ} over the newest min(M, available) losses,
// renormalized to sum to one.
struct AnticipatedLossStrategy {
  enum class Kind { previous, zero, exponential, polynomial };

  Kind kind = Kind::previous;
  std::size_t memory = 32;
  double lambda = 1.0;

  void validate() const;
  std::vector<double> weights(std::size_t available) const;
};

// Realized losses, newest first, holding at most `capacity` entries.
class LossHistory {
 public:
  explicit LossHistory(std::size_t capacity = 32);

  void push(double loss);
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  std::size_t capacity() const noexcept { return capacity_; }
  // lag 1 is the most recent loss.
  double at_lag(std::size_t lag) const { return values_.at(lag - 1); }

 private:
  std::size_t capacity_;
  std::deque<double> values_;
};

double anticipated_loss(const LossHistory& history,
                        const AnticipatedLossStrategy& strategy);

struct OptimizerState {
  RealVector theta;           // θ_k
  RealVector theta_previous;  // θ_{k-1}
  LossHistory history;
  std::uint64_t k = 0;
  RngStream rng;
};

// θ_0 = θ_{-1} = theta0, empty history.
OptimizerState make_state(RealVector theta0, RngStream rng,
                          std::size_t memory = 32);

// Pushes L(θ_{-1} + U_{-1}, X_{-1}, Y_{-1}) with a fresh U_{-1}.
void seed_history(OptimizerState& state, const LossFunction& loss,
                  const SupervisedSample& sample, const NoiseConfig& cfg);

class GradientUnavailable : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class GradientPolicy { analytic_only, allow_finite_difference };

// θ_{k+1} = θ_k − α_{k+1} ∇L(θ_k).
OptimizerState gd_step(OptimizerState state, const LossFunction& loss,
                       const SupervisedSample& sample,
                       const LearningRateSchedule& schedule,
                       GradientPolicy policy = GradientPolicy::allow_finite_difference);

// θ_{k+1} = θ_k − α_{k+1} β L(θ_k + ξ_k) ξ_k.
//
// Written in descent orientation. Substituting β L(θ+ξ) ξ for −∇L, read
// literally, ascends in expectation since E[β L(θ+ξ) ξ] = βσ² E[∇L(θ+ξ)].
OptimizerState one_point_zo_step(OptimizerState state, const LossFunction& loss,
                                 const SupervisedSample& sample,
                                 const LearningRateSchedule& schedule,
                                 const GaussianNoiseConfig& noise);

// Same step with an injected ξ (used by tests and the zero-noise checks).
OptimizerState one_point_zo_step_with_noise(OptimizerState state,
                                            const LossFunction& loss,
                                            const SupervisedSample& sample,
                                            const LearningRateSchedule& schedule,
                                            const GaussianNoiseConfig& noise,
                                            const RealVector& xi);

// Plasticity update in log-weight space:
//   θ_{k+1} = θ_k + α_{k+1} (L(θ_k + U_k) − L̄) (e^{−U_k} − e^{U_k}),
// U_k ~ Uniform([−A, A]^d). The realized loss is appended to the history.
OptimizerState bnn_zo_step(OptimizerState state, const LossFunction& loss,
                           const SupervisedSample& sample,
                           const LearningRateSchedule& schedule,
                           const NoiseConfig& cfg,
                           const AnticipatedLossStrategy& strategy);

OptimizerState bnn_zo_step_with_noise(OptimizerState state,
                                      const LossFunction& loss,
                                      const SupervisedSample& sample,
                                      const LearningRateSchedule& schedule,
                                      const AnticipatedLossStrategy& strategy,
                                      const RealVector& u);

// Strictly positive connection strengths.
class WeightVector {
 public:
  explicit WeightVector(RealVector values);

  static WeightVector from_log(const RealVector& theta);

  const RealVector& values() const noexcept { return values_; }
  Eigen::Index size() const noexcept { return values_.size(); }
  RealVector log() const { return values_.array().log().matrix(); }

 private:
  RealVector values_;
};

struct WeightState {
  WeightVector weights;
  LossHistory history;
  std::uint64_t k = 0;
  RngStream rng;
};

WeightState make_weight_state(WeightVector w0, RngStream rng,
                              std::size_t memory = 32);

void seed_history(WeightState& state, const LossFunction& loss,
                  const SupervisedSample& sample, const NoiseConfig& cfg);

class PositivityViolation : public std::runtime_error {
 public:
  PositivityViolation(Eigen::Index index, double multiplier);

  Eigen::Index index() const noexcept { return index_; }
  double multiplier() const noexcept { return multiplier_; }

 private:
  Eigen::Index index_;
  double multiplier_;
};

// abort: throw PositivityViolation. clamp: use max(multiplier, 1e-8).
enum class PositivityPolicy { abort, clamp };

inline constexpr double kPositivityClamp = 1e-8;

// w_{k+1} = w_k ⊙ (1 + α_{k+1} ΔL (e^{−U} − e^{U})), with the loss evaluated
// at the effective weights w_k ⊙ e^{U}.
WeightState bnn_multiplicative_step(WeightState state, const LossFunction& loss,
                                    const SupervisedSample& sample,
                                    const LearningRateSchedule& schedule,
                                    const NoiseConfig& cfg,
                                    const AnticipatedLossStrategy& strategy,
                                    PositivityPolicy policy = PositivityPolicy::abort);

WeightState bnn_multiplicative_step_with_noise(
    WeightState state, const LossFunction& loss, const SupervisedSample& sample,
    const LearningRateSchedule& schedule,
    const AnticipatedLossStrategy& strategy, const RealVector& u,
    PositivityPolicy policy = PositivityPolicy::abort);

// L(v) := inner(e^v). Turns a loss over effective weights into one over
// log-weights, so θ-space and w-space runs optimize the same function.
class ExpReparametrizedLoss final : public LossFunction {
 public:
  explicit ExpReparametrizedLoss(std::shared_ptr<const LossFunction> inner);

  double evaluate(const RealVector& params,
                  const SupervisedSample& sample) const override;
  std::optional<RealVector> gradient(
      const RealVector& params, const SupervisedSample& sample) const override;
  std::string name() const override { return "exp(" + inner_->name() + ")"; }

 private:
  std::shared_ptr<const LossFunction> inner_;
};

// L(v) := inner(log v) for positive v; the inverse adapter.
class LogReparametrizedLoss final : public LossFunction {
 public:
  explicit LogReparametrizedLoss(std::shared_ptr<const LossFunction> inner);

  double evaluate(const RealVector& params,
                  const SupervisedSample& sample) const override;
  std::string name() const override { return "log(" + inner_->name() + ")"; }

 private:
  std::shared_ptr<const LossFunction> inner_;
};

// ---------------------------------------------------------------------------
// Experiment driver

enum class Method { gradient_descent, one_point, bnn, bnn_multiplicative };

std::string to_string(Method m);
Method method_from_string(const std::string& name);

// Loss, data source and the noise-free objective recorded in traces.
class Problem {
 public:
  // ‖y − θ‖²; objective is the same function.
  static Problem least_squares(RealVector target);
  // Streamed (y − ⟨x, θ⟩)²; objective is the population risk
  // ‖θ − θ*‖² + noise_sd².
  static Problem linear_regression(RealVector theta_star, double noise_sd);

  const LossFunction& loss() const noexcept { return *loss_; }
  std::shared_ptr<const LossFunction> loss_ptr() const noexcept { return loss_; }
  const DataSpec& data() const noexcept { return data_; }
  Eigen::Index dim() const noexcept { return reference_.size(); }
  double objective(const RealVector& theta) const;

 private:
  Problem(std::shared_ptr<const LossFunction> loss, DataSpec data,
          RealVector reference, double offset);

  std::shared_ptr<const LossFunction> loss_;
  DataSpec data_;
  RealVector reference_;
  double offset_;
};

struct RunConfig {
  std::vector<Method> methods{Method::gradient_descent};
  std::uint64_t iterations = 100;
  std::uint64_t replicates = 1;
  std::uint64_t seed = 0;
  LearningRateSchedule schedule;
  double half_interval = 1.0;
  GaussianNoiseConfig gaussian;
  AnticipatedLossStrategy strategy;
  std::optional<RealVector> theta0;  // default: i.i.d. N(0, init_sd²)
  double init_sd = 1.0;
  PositivityPolicy positivity = PositivityPolicy::abort;
  unsigned parallel = 1;
  bool record_theta = false;

  void validate(const Problem& problem) const;
};

struct TraceRow {
  Method method;
  std::uint64_t replicate;
  std::uint64_t iter;
  double loss;
  double theta_norm;
  std::optional<RealVector> theta;
};

using Trace = std::vector<TraceRow>;

// A step failed; rows() holds every row produced before the failure.
class RunError : public std::runtime_error {
 public:
  RunError(Method method, std::uint64_t replicate, std::uint64_t iteration,
           const std::string& cause, Trace partial);

  Method method() const noexcept { return method_; }
  std::uint64_t replicate() const noexcept { return replicate_; }
  std::uint64_t iteration() const noexcept { return iteration_; }
  const std::string& cause() const noexcept { return cause_; }
  const Trace& rows() const noexcept { return rows_; }

 private:
  Method method_;
  std::uint64_t replicate_;
  std::uint64_t iteration_;
  std::string cause_;
  Trace rows_;
};

// Rows are ordered by method (config order), then replicate, then iteration
// 0..n (iteration 0 is the initial iterate; n = 0 yields no rows). Every
// method of a replicate sees the same θ_0 and the same data stream. Output
// is identical for any `parallel` setting.
Trace run_optimizer(const Problem& problem, const RunConfig& config);

// Single (method, replicate) run; building block of run_optimizer.
Trace run_single(const Problem& problem, const RunConfig& config, Method method,
                 std::uint64_t replicate);

RealVector initial_theta(const Problem& problem, const RunConfig& config,
                         std::uint64_t replicate);

}  // namespace stdpzo
