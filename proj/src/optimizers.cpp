#include "stdpzo/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>
#include <utility>

namespace stdpzo {

void GaussianNoiseConfig::validate() const {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    throw std::invalid_argument("sigma2 must be positive");
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw std::invalid_argument("beta must be positive");
}

void AnticipatedLossStrategy::validate() const {
  if (memory == 0) throw std::invalid_argument("memory must be at least 1");
  if ((kind == Kind::exponential || kind == Kind::polynomial) &&
      (!(lambda > 0.0) || !std::isfinite(lambda)))
    throw std::invalid_argument("lambda must be positive");
}

std::vector<double> AnticipatedLossStrategy::weights(std::size_t available) const {
  const std::size_t m = std::min(memory, available);
  std::vector<double> w(m, 0.0);
  if (m == 0) return w;
  switch (kind) {
    case Kind::zero:
      return std::vector<double>(m, 0.0);
    case Kind::previous:
      w[0] = 1.0;
      return w;
    case Kind::exponential:
      for (std::size_t l = 1; l <= m; ++l) w[l - 1] = std::exp(-lambda * l);
      break;
    case Kind::polynomial:
      for (std::size_t l = 1; l <= m; ++l)
        w[l - 1] = std::pow(static_cast<double>(l), -lambda);
      break;
  }
  double total = 0.0;
  for (double x : w) total += x;
  for (double& x : w) x /= total;
  return w;
}

LossHistory::LossHistory(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("history capacity must be at least 1");
}

void LossHistory::push(double loss) {
  values_.push_front(loss);
  while (values_.size() > capacity_) values_.pop_back();
}

double anticipated_loss(const LossHistory& history,
                        const AnticipatedLossStrategy& strategy) {
  strategy.validate();
  if (strategy.kind == AnticipatedLossStrategy::Kind::zero) return 0.0;
  if (history.empty())
    throw std::invalid_argument("anticipated loss needs a nonempty history");
  const auto w = strategy.weights(history.size());
  double sum = 0.0;
  for (std::size_t l = 1; l <= w.size(); ++l) sum += w[l - 1] * history.at_lag(l);
  return sum;
}

OptimizerState make_state(RealVector theta0, RngStream rng, std::size_t memory) {
  require_finite(theta0, "theta0");
  OptimizerState s{theta0, theta0, LossHistory(memory), 0, std::move(rng)};
  return s;
}

void seed_history(OptimizerState& state, const LossFunction& loss,
                  const SupervisedSample& sample, const NoiseConfig& cfg) {
  NoiseConfig c = cfg;
  c.dim = state.theta_previous.size();
  const RealVector u = sample_uniform(c, state.rng);
  state.history.push(loss.evaluate(state.theta_previous + u, sample));
}

namespace {

void advance(OptimizerState& state, RealVector next, const char* what) {
  require_finite(next, what);
  state.theta_previous = std::move(state.theta);
  state.theta = std::move(next);
  ++state.k;
}

}  // namespace

OptimizerState gd_step(OptimizerState state, const LossFunction& loss,
                       const SupervisedSample& sample,
                       const LearningRateSchedule& schedule,
                       GradientPolicy policy) {
  auto g = loss.gradient(state.theta, sample);
  if (!g) {
    if (policy == GradientPolicy::analytic_only)
      throw GradientUnavailable("gd_step: loss '" + loss.name() +
                                "' has no analytic gradient");
    g = finite_diff_gradient(loss, state.theta, 1e-6, sample);
  }
  const double alpha = schedule_rate(schedule, state.k + 1);
  RealVector next = state.theta - alpha * *g;
  advance(state, std::move(next), "gd_step");
  return state;
}

OptimizerState one_point_zo_step(OptimizerState state, const LossFunction& loss,
                                 const SupervisedSample& sample,
                                 const LearningRateSchedule& schedule,
                                 const GaussianNoiseConfig& noise) {
  noise.validate();
  const RealVector xi =
      state.rng.normal_vector(state.theta.size(), std::sqrt(noise.sigma2));
  return one_point_zo_step_with_noise(std::move(state), loss, sample, schedule,
                                      noise, xi);
}

OptimizerState one_point_zo_step_with_noise(OptimizerState state,
                                            const LossFunction& loss,
                                            const SupervisedSample& sample,
                                            const LearningRateSchedule& schedule,
                                            const GaussianNoiseConfig& noise,
                                            const RealVector& xi) {
  require_same_dim(state.theta, xi, "one_point_zo_step");
  const double alpha = schedule_rate(schedule, state.k + 1);
  const double value = loss.evaluate(state.theta + xi, sample);
  RealVector next = state.theta - (alpha * noise.beta * value) * xi;
  advance(state, std::move(next), "one_point_zo_step");
  return state;
}

OptimizerState bnn_zo_step(OptimizerState state, const LossFunction& loss,
                           const SupervisedSample& sample,
                           const LearningRateSchedule& schedule,
                           const NoiseConfig& cfg,
                           const AnticipatedLossStrategy& strategy) {
  NoiseConfig c = cfg;
  c.dim = state.theta.size();
  const RealVector u = sample_uniform(c, state.rng);
  return bnn_zo_step_with_noise(std::move(state), loss, sample, schedule,
                                strategy, u);
}

OptimizerState bnn_zo_step_with_noise(OptimizerState state,
                                      const LossFunction& loss,
                                      const SupervisedSample& sample,
                                      const LearningRateSchedule& schedule,
                                      const AnticipatedLossStrategy& strategy,
                                      const RealVector& u) {
  require_same_dim(state.theta, u, "bnn_zo_step");
  const double baseline = anticipated_loss(state.history, strategy);
  const double realized = loss.evaluate(state.theta + u, sample);
  const double alpha = schedule_rate(schedule, state.k + 1);
  RealVector next = state.theta + (alpha * (realized - baseline)) * timing_factor(u);
  advance(state, std::move(next), "bnn_zo_step");
  state.history.push(realized);
  return state;
}

WeightVector::WeightVector(RealVector values) : values_(std::move(values)) {
  for (Eigen::Index j = 0; j < values_.size(); ++j) {
    if (!(values_[j] > 0.0) || !std::isfinite(values_[j]))
      throw std::invalid_argument("weight " + std::to_string(j) +
                                  " must be positive and finite");
  }
}

WeightVector WeightVector::from_log(const RealVector& theta) {
  return WeightVector(exp_map(theta, ExpSign::positive));
}

WeightState make_weight_state(WeightVector w0, RngStream rng, std::size_t memory) {
  return WeightState{std::move(w0), LossHistory(memory), 0, std::move(rng)};
}

void seed_history(WeightState& state, const LossFunction& loss,
                  const SupervisedSample& sample, const NoiseConfig& cfg) {
  NoiseConfig c = cfg;
  c.dim = state.weights.size();
  const RealVector u = sample_uniform(c, state.rng);
  const RealVector effective =
      hadamard(state.weights.values(), exp_map(u, ExpSign::positive));
  state.history.push(loss.evaluate(effective, sample));
}

PositivityViolation::PositivityViolation(Eigen::Index index, double multiplier)
    : std::runtime_error("weight " + std::to_string(index) +
                         " would become nonpositive (multiplier " +
                         std::to_string(multiplier) + ")"),
      index_(index),
      multiplier_(multiplier) {}

WeightState bnn_multiplicative_step(WeightState state, const LossFunction& loss,
                                    const SupervisedSample& sample,
                                    const LearningRateSchedule& schedule,
                                    const NoiseConfig& cfg,
                                    const AnticipatedLossStrategy& strategy,
                                    PositivityPolicy policy) {
  NoiseConfig c = cfg;
  c.dim = state.weights.size();
  const RealVector u = sample_uniform(c, state.rng);
  return bnn_multiplicative_step_with_noise(std::move(state), loss, sample,
                                            schedule, strategy, u, policy);
}

WeightState bnn_multiplicative_step_with_noise(
    WeightState state, const LossFunction& loss, const SupervisedSample& sample,
    const LearningRateSchedule& schedule,
    const AnticipatedLossStrategy& strategy, const RealVector& u,
    PositivityPolicy policy) {
  const RealVector& w = state.weights.values();
  require_same_dim(w, u, "bnn_multiplicative_step");
  const double baseline = anticipated_loss(state.history, strategy);
  const double realized =
      loss.evaluate(hadamard(w, exp_map(u, ExpSign::positive)), sample);
  const double alpha = schedule_rate(schedule, state.k + 1);
  RealVector multiplier =
      RealVector::Ones(w.size()) + (alpha * (realized - baseline)) * timing_factor(u);
  for (Eigen::Index j = 0; j < multiplier.size(); ++j) {
    if (multiplier[j] > 0.0) continue;
    if (policy == PositivityPolicy::abort) throw PositivityViolation(j, multiplier[j]);
    multiplier[j] = kPositivityClamp;
  }
  state.weights = WeightVector(hadamard(w, multiplier));
  ++state.k;
  state.history.push(realized);
  return state;
}

ExpReparametrizedLoss::ExpReparametrizedLoss(
    std::shared_ptr<const LossFunction> inner)
    : inner_(std::move(inner)) {}

double ExpReparametrizedLoss::evaluate(const RealVector& params,
                                       const SupervisedSample& sample) const {
  return inner_->evaluate(exp_map(params, ExpSign::positive), sample);
}

std::optional<RealVector> ExpReparametrizedLoss::gradient(
    const RealVector& params, const SupervisedSample& sample) const {
  const RealVector w = exp_map(params, ExpSign::positive);
  auto g = inner_->gradient(w, sample);
  if (!g) return std::nullopt;
  return hadamard(*g, w);
}

LogReparametrizedLoss::LogReparametrizedLoss(
    std::shared_ptr<const LossFunction> inner)
    : inner_(std::move(inner)) {}

double LogReparametrizedLoss::evaluate(const RealVector& params,
                                       const SupervisedSample& sample) const {
  return inner_->evaluate(WeightVector(params).log(), sample);
}

// ---------------------------------------------------------------------------

std::string to_string(Method m) {
  switch (m) {
    case Method::gradient_descent: return "gd";
    case Method::one_point: return "one_point";
    case Method::bnn: return "bnn";
    case Method::bnn_multiplicative: return "bnn_multiplicative";
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  if (name == "gd") return Method::gradient_descent;
  if (name == "one_point") return Method::one_point;
  if (name == "bnn") return Method::bnn;
  if (name == "bnn_multiplicative") return Method::bnn_multiplicative;
  throw std::invalid_argument("unknown method '" + name + "'");
}

Problem::Problem(std::shared_ptr<const LossFunction> loss, DataSpec data,
                 RealVector reference, double offset)
    : loss_(std::move(loss)),
      data_(std::move(data)),
      reference_(std::move(reference)),
      offset_(offset) {}

Problem Problem::least_squares(RealVector target) {
  auto loss = std::make_shared<LeastSquaresLoss>(target);
  return Problem(std::move(loss), DataSpec::fixed_target(), std::move(target), 0.0);
}

Problem Problem::linear_regression(RealVector theta_star, double noise_sd) {
  auto data = DataSpec::linear_gaussian(theta_star, noise_sd);
  return Problem(std::make_shared<LinearModelLoss>(), std::move(data),
                 std::move(theta_star), noise_sd * noise_sd);
}

double Problem::objective(const RealVector& theta) const {
  return (theta - reference_).squaredNorm() + offset_;
}

void RunConfig::validate(const Problem& problem) const {
  if (methods.empty()) throw std::invalid_argument("methods must not be empty");
  if (replicates == 0) throw std::invalid_argument("replicates must be at least 1");
  schedule.validate();
  NoiseConfig{half_interval, problem.dim()}.validate();
  gaussian.validate();
  strategy.validate();
  if (theta0) {
    require_same_dim(*theta0, RealVector::Zero(problem.dim()), "theta0");
    require_finite(*theta0, "theta0");
  }
  if (!(init_sd >= 0.0) || !std::isfinite(init_sd))
    throw std::invalid_argument("init_sd must be nonnegative");
  if (parallel == 0) throw std::invalid_argument("parallel must be at least 1");
}

RunError::RunError(Method method, std::uint64_t replicate,
                   std::uint64_t iteration, const std::string& cause,
                   Trace partial)
    : std::runtime_error(to_string(method) + " replicate " +
                         std::to_string(replicate) + " failed at iteration " +
                         std::to_string(iteration) + ": " + cause),
      method_(method),
      replicate_(replicate),
      iteration_(iteration),
      cause_(cause),
      rows_(std::move(partial)) {}

namespace {

// Substream layout per replicate: 0 data, 1 initial point, 2 warm-up sample,
// 16 + method noise.
RngStream replicate_stream(const RunConfig& config, std::uint64_t replicate) {
  return RngStream(config.seed, 0).substream(replicate);
}

TraceRow make_row(Method method, std::uint64_t replicate, std::uint64_t iter,
                  const Problem& problem, const RealVector& theta, bool record) {
  TraceRow row{method, replicate, iter, problem.objective(theta), theta.norm(),
               std::nullopt};
  if (record) row.theta = theta;
  return row;
}

}  // namespace

RealVector initial_theta(const Problem& problem, const RunConfig& config,
                         std::uint64_t replicate) {
  if (config.theta0) return *config.theta0;
  RngStream rng = replicate_stream(config, replicate).substream(1);
  return rng.normal_vector(problem.dim(), config.init_sd);
}

Trace run_single(const Problem& problem, const RunConfig& config, Method method,
                 std::uint64_t replicate) {
  const RngStream base = replicate_stream(config, replicate);
  DataStream data(problem.data(), base.substream(0));
  RngStream noise = base.substream(16 + static_cast<std::uint64_t>(method));
  const RealVector theta0 = initial_theta(problem, config, replicate);
  const NoiseConfig noise_cfg{config.half_interval, problem.dim()};
  const LossFunction& loss = problem.loss();
  const std::size_t memory = config.strategy.memory;

  Trace rows;
  if (config.iterations == 0) return rows;
  rows.reserve(config.iterations + 1);
  rows.push_back(make_row(method, replicate, 0, problem, theta0, config.record_theta));

  std::uint64_t iter = 0;
  try {
    if (method == Method::bnn_multiplicative) {
      // Loss over effective weights w ⊙ e^U is L(log(w ⊙ e^U)) = L(θ + U).
      LogReparametrizedLoss weight_loss(problem.loss_ptr());
      WeightState state = make_weight_state(WeightVector::from_log(theta0),
                                            std::move(noise), memory);
      DataStream warmup(problem.data(), base.substream(2));
      seed_history(state, weight_loss, warmup.next(), noise_cfg);
      for (iter = 1; iter <= config.iterations; ++iter) {
        state = bnn_multiplicative_step(std::move(state), weight_loss, data.next(),
                                        config.schedule, noise_cfg,
                                        config.strategy, config.positivity);
        rows.push_back(make_row(method, replicate, iter, problem,
                                state.weights.log(), config.record_theta));
      }
      return rows;
    }

    OptimizerState state = make_state(theta0, std::move(noise), memory);
    if (method == Method::bnn) {
      DataStream warmup(problem.data(), base.substream(2));
      seed_history(state, loss, warmup.next(), noise_cfg);
    }
    for (iter = 1; iter <= config.iterations; ++iter) {
      const SupervisedSample sample = data.next();
      switch (method) {
        case Method::gradient_descent:
          state = gd_step(std::move(state), loss, sample, config.schedule);
          break;
        case Method::one_point:
          state = one_point_zo_step(std::move(state), loss, sample,
                                    config.schedule, config.gaussian);
          break;
        case Method::bnn:
          state = bnn_zo_step(std::move(state), loss, sample, config.schedule,
                              noise_cfg, config.strategy);
          break;
        case Method::bnn_multiplicative:
          break;
      }
      rows.push_back(make_row(method, replicate, iter, problem, state.theta,
                              config.record_theta));
    }
  } catch (const RunError&) {
    throw;
  } catch (const std::exception& e) {
    throw RunError(method, replicate, iter, e.what(), std::move(rows));
  }
  return rows;
}

Trace run_optimizer(const Problem& problem, const RunConfig& config) {
  config.validate(problem);

  struct Job {
    Method method;
    std::uint64_t replicate;
    Trace rows;
    std::exception_ptr error;
  };
  std::vector<Job> jobs;
  for (Method m : config.methods)
    for (std::uint64_t r = 0; r < config.replicates; ++r) jobs.push_back({m, r, {}, nullptr});

  auto run_job = [&](Job& job) {
    try {
      job.rows = run_single(problem, config, job.method, job.replicate);
    } catch (...) {
      job.error = std::current_exception();
    }
  };

  const std::size_t workers =
      std::min<std::size_t>(std::max(1u, config.parallel), jobs.size());
  if (workers <= 1) {
    for (auto& job : jobs) {
      run_job(job);
      if (job.error) break;
    }
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < jobs.size(); i += workers) run_job(jobs[i]);
      });
    }
    for (auto& th : pool) th.join();
  }

  Trace merged;
  for (auto& job : jobs) {
    if (job.error) {
      try {
        std::rethrow_exception(job.error);
      } catch (RunError& e) {
        Trace partial = std::move(merged);
        partial.insert(partial.end(), e.rows().begin(), e.rows().end());
        throw RunError(e.method(), e.replicate(), e.iteration(), e.cause(),
                       std::move(partial));
      }
    }
    merged.insert(merged.end(), std::make_move_iterator(job.rows.begin()),
                  std::make_move_iterator(job.rows.end()));
  }
  return merged;
}

}  // namespace stdpzo
