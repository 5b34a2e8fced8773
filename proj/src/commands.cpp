#include "stdpzo/commands.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"
#include "stdpzo/optimizers.hpp"
#include "stdpzo/perturbation.hpp"
#include "stdpzo/spiking.hpp"
#include "stdpzo/verification.hpp"

namespace stdpzo::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Strict view of one JSON object: unknown keys are rejected up front and every
// read names the offending field on failure.
class Fields {
 public:
  Fields(const json& obj, std::string where, std::set<std::string> allowed)
      : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ConfigError(where_ + " must be a JSON object");
    for (const auto& [key, _] : obj_.items())
      if (!allowed.count(key)) throw ConfigError("unknown field '" + path(key) + "'");
  }

  bool has(const std::string& key) const {
    return obj_.contains(key) && !obj_.at(key).is_null();
  }

  const json& raw(const std::string& key) const { return obj_.at(key); }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    if (!has(key)) return fallback;
    return read<T>(key);
  }

  template <typename T>
  T require(const std::string& key) const {
    if (!has(key)) throw ConfigError("missing field '" + path(key) + "'");
    return read<T>(key);
  }

  std::string path(const std::string& key) const {
    return where_.empty() ? key : where_ + "." + key;
  }

 private:
  template <typename T>
  T read(const std::string& key) const {
    try {
      return obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("field '" + path(key) + "' has the wrong type");
    }
  }

  const json& obj_;
  std::string where_;
};

json parse_config(const std::string& text) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return json::object();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

double positive(const Fields& f, const std::string& key, double fallback) {
  const double v = f.get<double>(key, fallback);
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(key + " must be positive");
  return v;
}

std::uint64_t resolve_seed(const Fields& f, const CommandOptions& o) {
  if (o.seed) return *o.seed;
  return f.get<std::uint64_t>("seed", 0);
}

std::string resolve_out(const Fields& f, const CommandOptions& o,
                        const std::string& fallback) {
  if (o.out) return *o.out;
  return f.get<std::string>("output", fallback);
}

RealVector to_vector(const std::vector<double>& v) {
  RealVector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

std::string num(double x) { return fmt::format("{}", x); }

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

// Rethrows library validation failures as configuration errors.
template <typename Fn>
void validating(Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

// ---------------------------------------------------------------------------
// verify

const std::vector<std::string> kAllChecks = {
    "normalizer",       "density",        "density_chi_square",
    "stein",            "stein_symmetric", "theorem1",
    "theorem1_symmetric", "theorem1_quartic", "componentwise",
    "zero_mean_prev",   "variance_sweep"};

struct VerifySettings {
  std::vector<std::string> checks = kAllChecks;
  std::uint64_t n = 1'000'000;
  std::uint64_t sweep_n = 100'000;
  std::uint64_t chi_square_n = 100'000;
  double half_interval = 1.0;
  double sigma2 = 1.0;
  double alpha = 1.0;
  std::uint64_t seed = 0;
  std::string output;
};

VerifySettings parse_verify(const CommandOptions& o) {
  const json doc = parse_config(o.config_text);
  const Fields f(doc, "", {"checks", "n", "sweep_n", "chi_square_n", "half_interval",
                           "sigma2", "alpha", "seed", "output"});
  VerifySettings s;
  s.checks = f.get<std::vector<std::string>>("checks", kAllChecks);
  for (const auto& c : s.checks)
    if (std::find(kAllChecks.begin(), kAllChecks.end(), c) == kAllChecks.end())
      throw ConfigError("unknown check '" + c + "'");
  s.n = f.get<std::uint64_t>("n", s.n);
  s.sweep_n = f.get<std::uint64_t>("sweep_n", s.sweep_n);
  s.chi_square_n = f.get<std::uint64_t>("chi_square_n", s.chi_square_n);
  if (s.n < 10'000) throw ConfigError("n must be at least 10000");
  if (s.sweep_n < 2 || s.chi_square_n < 2) throw ConfigError("sample sizes must be at least 2");
  s.half_interval = f.get<double>("half_interval", 1.0);
  if (!(s.half_interval > 0.0)) throw ConfigError("half_interval must be positive");
  s.sigma2 = positive(f, "sigma2", 1.0);
  s.alpha = positive(f, "alpha", 1.0);
  s.seed = resolve_seed(f, o);
  s.output = resolve_out(f, o, "verify_report.json");
  return s;
}

std::vector<CheckReport> run_check(const std::string& name, const VerifySettings& s,
                                   std::uint64_t stream) {
  const RngStream rng(s.seed, stream);
  const double a = s.half_interval;
  const std::vector<double> grid = {0.1, 0.5, 1.0, 2.0};
  const SupervisedSample none;
  if (name == "normalizer") return {check_normalizer(grid)};
  if (name == "density") return {check_density_normalization(grid)};
  if (name == "density_chi_square")
    return {check_density_chi_square(a, s.chi_square_n, 20, 1e-3, rng)};
  if (name == "stein") {
    RealVector y(5);
    y << 1.0, -1.5, 2.0, -1.0, 1.5;
    return {check_stein(RealVector::Zero(5), y, s.sigma2, s.n, rng)};
  }
  if (name == "stein_symmetric") {
    RealVector y(5);
    y << 1.0, -1.5, 2.0, -1.0, 1.5;
    auto r = check_stein(y, y, s.sigma2, s.n, rng);
    r.name = name;
    return {r};
  }
  Theorem1Options t1;
  t1.half_interval = a;
  t1.alpha = s.alpha;
  t1.n = s.n;
  if (name == "theorem1") {
    const LeastSquaresLoss loss(RealVector::Ones(1));
    return {check_theorem1(loss, RealVector::Zero(1), none, t1, rng)};
  }
  if (name == "theorem1_symmetric") {
    const LeastSquaresLoss loss(RealVector::Ones(1));
    auto r = check_theorem1(loss, RealVector::Ones(1), none, t1, rng);
    r.name = name;
    return {r};
  }
  if (name == "theorem1_quartic") {
    const QuarticLoss loss(RealVector::Zero(1));
    t1.agreement = Agreement::standard_error();
    auto r = check_theorem1(loss, RealVector::Ones(1), none, t1, rng);
    r.name = name;
    return {r};
  }
  if (name == "componentwise") {
    RealVector y(3);
    y << 1.0, -0.5, 0.25;
    const LeastSquaresLoss loss(y);
    return {check_componentwise(loss, RealVector::Zero(3), none, a, s.alpha, s.n, rng)};
  }
  if (name == "zero_mean_prev") {
    RealVector y(2);
    y << 1.0, -2.0;
    const LeastSquaresLoss ls(y);
    const QuarticLoss quartic(y);
    auto first = check_zero_mean_prev(ls, RealVector::Zero(2), none, a, s.n, rng.substream(0));
    auto second = check_zero_mean_prev(quartic, RealVector::Zero(2), none, a, s.n, rng.substream(1));
    first.name = "zero_mean_prev_least_squares";
    second.name = "zero_mean_prev_quartic";
    return {first, second};
  }
  // variance_sweep
  const auto sweep = variance_scaling_sweep({10, 32, 100, 316, 1000}, s.sigma2, s.sweep_n, rng);
  CheckReport r;
  r.name = "variance_sweep";
  r.n = s.sweep_n;
  r.seed = s.seed;
  r.estimate = RealVector::Constant(1, sweep.slope.value_or(std::nan("")));
  r.oracle = RealVector::Constant(1, 2.0);
  r.se = RealVector::Zero(1);
  r.rel_err = {std::abs(r.estimate[0] - 2.0) / 2.0};
  r.pass = sweep.slope && std::abs(*sweep.slope - 2.0) <= 0.3;
  return {r};
}

// ---------------------------------------------------------------------------
// optimize

struct OptimizeSettings {
  std::optional<Problem> problem;
  RunConfig run;
  std::string output;
};

Problem parse_problem(const json& doc, Eigen::Index default_dim) {
  const Fields f(doc, "problem", {"kind", "d", "target", "target_value", "theta_star", "noise_sd"});
  const auto kind = f.get<std::string>("kind", "least_squares");
  const auto d = f.get<Eigen::Index>("d", default_dim);
  if (kind == "least_squares") {
    RealVector target = f.has("target")
                            ? to_vector(f.require<std::vector<double>>("target"))
                            : RealVector::Constant(d, f.get<double>("target_value", 0.0));
    if (target.size() < 1) throw ConfigError("problem.d must be at least 1");
    return Problem::least_squares(std::move(target));
  }
  if (kind == "linear_regression") {
    RealVector theta_star = f.has("theta_star")
                                ? to_vector(f.require<std::vector<double>>("theta_star"))
                                : RealVector::Constant(d, f.get<double>("target_value", 1.0));
    const double noise_sd = f.get<double>("noise_sd", 0.0);
    if (!(noise_sd >= 0.0)) throw ConfigError("problem.noise_sd must be nonnegative");
    if (theta_star.size() < 1) throw ConfigError("problem.d must be at least 1");
    return Problem::linear_regression(std::move(theta_star), noise_sd);
  }
  throw ConfigError("unknown problem kind '" + kind + "'");
}

LearningRateSchedule parse_schedule(const json& doc) {
  const Fields f(doc, "schedule", {"kind", "alpha0", "exponent"});
  LearningRateSchedule s;
  const auto kind = f.get<std::string>("kind", "constant");
  if (kind == "constant")
    s.kind = LearningRateSchedule::Kind::constant;
  else if (kind == "power_decay")
    s.kind = LearningRateSchedule::Kind::power_decay;
  else
    throw ConfigError("unknown schedule kind '" + kind + "'");
  s.alpha0 = f.get<double>("alpha0", 0.1);
  s.exponent = f.get<double>("exponent", 0.0);
  validating([&] { s.validate(); });
  return s;
}

AnticipatedLossStrategy parse_strategy(const json& doc) {
  const Fields f(doc, "strategy", {"kind", "lambda", "memory"});
  AnticipatedLossStrategy s;
  const auto kind = f.get<std::string>("kind", "previous");
  using K = AnticipatedLossStrategy::Kind;
  if (kind == "previous") s.kind = K::previous;
  else if (kind == "zero") s.kind = K::zero;
  else if (kind == "exponential") s.kind = K::exponential;
  else if (kind == "polynomial") s.kind = K::polynomial;
  else throw ConfigError("unknown strategy kind '" + kind + "'");
  s.lambda = f.get<double>("lambda", 1.0);
  s.memory = f.get<std::size_t>("memory", 32);
  validating([&] { s.validate(); });
  return s;
}

OptimizeSettings parse_optimize(const CommandOptions& o) {
  const json doc = parse_config(o.config_text);
  const Fields f(doc, "", {"methods", "problem", "d", "half_interval", "sigma2", "beta",
                           "schedule", "strategy", "iterations", "replicates", "seed",
                           "theta0", "init_sd", "positivity", "output"});
  OptimizeSettings s;
  const auto d = f.get<Eigen::Index>("d", 10);
  if (d < 1) throw ConfigError("d must be at least 1");
  s.problem = parse_problem(f.has("problem") ? f.raw("problem") : json::object(), d);

  RunConfig& run = s.run;
  run.methods.clear();
  for (const auto& m : f.get<std::vector<std::string>>("methods", {"gd", "bnn", "one_point"})) {
    validating([&] { run.methods.push_back(method_from_string(m)); });
  }
  run.iterations = f.get<std::uint64_t>("iterations", 100);
  run.replicates = f.get<std::uint64_t>("replicates", 1);
  run.seed = resolve_seed(f, o);
  run.half_interval = f.get<double>("half_interval", 1.0);
  const double sigma2 = f.get<double>("sigma2", 1.0);
  run.gaussian = {sigma2, f.get<double>("beta", sigma2 > 0.0 ? 1.0 / sigma2 : 0.0)};
  run.schedule = parse_schedule(f.has("schedule") ? f.raw("schedule") : json::object());
  run.strategy = parse_strategy(f.has("strategy") ? f.raw("strategy") : json::object());
  if (f.has("theta0")) run.theta0 = to_vector(f.require<std::vector<double>>("theta0"));
  run.init_sd = f.get<double>("init_sd", 1.0);
  const auto positivity = f.get<std::string>("positivity", "abort");
  if (positivity == "abort") run.positivity = PositivityPolicy::abort;
  else if (positivity == "clamp") run.positivity = PositivityPolicy::clamp;
  else throw ConfigError("positivity must be 'abort' or 'clamp'");
  run.parallel = o.parallel;
  validating([&] { run.validate(*s.problem); });
  s.output = resolve_out(f, o, "trace.csv");
  return s;
}

std::string trace_csv(const Trace& rows) {
  std::string out = "method,replicate,iter,loss,theta_norm\n";
  for (const auto& r : rows)
    out += fmt::format("{},{},{},{},{}\n", to_string(r.method), r.replicate, r.iter,
                       num(r.loss), num(r.theta_norm));
  return out;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepSettings {
  std::string kind = "variance";
  std::vector<Eigen::Index> dims;
  double sigma2 = 1.0;
  double residual = 1.0;
  std::uint64_t n = 100'000;
  std::uint64_t seed = 0;
  std::string output;
  // convergence kind
  std::vector<Method> methods;
  std::uint64_t iterations = 200;
  std::uint64_t replicates = 8;
  double half_interval = 1.0;
  LearningRateSchedule schedule;
  AnticipatedLossStrategy strategy;
  double start = 1.0;
};

SweepSettings parse_sweep(const CommandOptions& o) {
  const json doc = parse_config(o.config_text);
  const Fields f(doc, "", {"kind", "dims", "sigma2", "residual", "n", "seed", "output",
                           "methods", "iterations", "replicates", "half_interval",
                           "schedule", "strategy", "start"});
  SweepSettings s;
  s.kind = f.get<std::string>("kind", "variance");
  if (s.kind != "variance" && s.kind != "convergence")
    throw ConfigError("sweep kind must be 'variance' or 'convergence'");
  s.dims = f.get<std::vector<Eigen::Index>>("dims", {10, 32, 100, 316, 1000});
  if (s.dims.empty()) throw ConfigError("dims must not be empty");
  for (auto d : s.dims)
    if (d < 1) throw ConfigError("dims must be positive");
  s.sigma2 = positive(f, "sigma2", 1.0);
  s.residual = f.get<double>("residual", 1.0);
  s.n = f.get<std::uint64_t>("n", 100'000);
  if (s.n < 2) throw ConfigError("n must be at least 2");
  s.seed = resolve_seed(f, o);
  s.output = resolve_out(f, o, "sweep.csv");
  for (const auto& m : f.get<std::vector<std::string>>("methods", {"gd", "bnn", "one_point"}))
    validating([&] { s.methods.push_back(method_from_string(m)); });
  s.iterations = f.get<std::uint64_t>("iterations", 200);
  s.replicates = f.get<std::uint64_t>("replicates", 8);
  if (s.replicates < 1) throw ConfigError("replicates must be at least 1");
  s.half_interval = f.get<double>("half_interval", 1.0);
  if (!(s.half_interval > 0.0)) throw ConfigError("half_interval must be positive");
  s.schedule = parse_schedule(f.has("schedule") ? f.raw("schedule") : json::object());
  s.strategy = parse_strategy(f.has("strategy") ? f.raw("strategy") : json::object());
  s.start = f.get<double>("start", 1.0);
  return s;
}

struct SweepRow {
  Eigen::Index d;
  std::string quantity;
  double value;
  double se;
};

// ---------------------------------------------------------------------------
// spike-demo

struct SpikeSettings {
  Topology topology;
  RealVector weights;
  std::vector<RealVector> inputs;
  double input_scale = 1.0;
  double input_offset = 0.0;
  std::uint64_t trials = 1;
  TrialOptions trial;
  bool zero_offsets = false;
  std::optional<RealVector> rescale;
  bool plasticity = true;
  std::optional<double> reward_delta;
  double alpha = 0.1;
  std::uint64_t seed = 0;
  std::string output;
};

SpikeSettings parse_spike(const CommandOptions& o) {
  const json doc = parse_config(o.config_text);
  const Fields f(doc, "", {"topology", "topology_file", "weights", "weight", "inputs",
                           "input_scale", "input_offset", "trials", "params", "rule",
                           "delay", "readout", "zero_offsets", "rescale", "plasticity",
                           "reward_delta", "alpha", "seed", "output"});
  SpikeSettings s;
  validating([&] {
    if (f.has("topology"))
      s.topology = parse_topology(f.raw("topology").dump());
    else if (f.has("topology_file"))
      s.topology = load_topology(f.require<std::string>("topology_file"));
    else
      throw ConfigError("spike-demo needs 'topology' or 'topology_file'");
  });
  const auto edges = static_cast<Eigen::Index>(s.topology.edges.size());
  if (f.has("weights")) {
    s.weights = to_vector(f.require<std::vector<double>>("weights"));
    if (s.weights.size() != edges) throw ConfigError("weights must have one entry per edge");
  } else {
    s.weights = RealVector::Constant(edges, f.get<double>("weight", 1.0));
  }
  for (Eigen::Index e = 0; e < s.weights.size(); ++e)
    if (!(s.weights[e] > 0.0)) throw ConfigError("weights must be positive");

  const auto num_inputs = static_cast<Eigen::Index>(s.topology.inputs.size());
  if (f.has("inputs")) {
    for (const auto& row : f.raw("inputs")) {
      RealVector x = to_vector(row.get<std::vector<double>>());
      if (x.size() != num_inputs) throw ConfigError("each inputs row needs one value per input neuron");
      s.inputs.push_back(std::move(x));
    }
    if (s.inputs.empty()) throw ConfigError("inputs must not be empty");
  } else {
    s.inputs.push_back(RealVector::Zero(num_inputs));
  }
  s.input_scale = f.get<double>("input_scale", 1.0);
  s.input_offset = f.get<double>("input_offset", 0.0);
  s.trials = f.get<std::uint64_t>("trials", s.inputs.size());

  if (f.has("params")) {
    const Fields p(f.raw("params"), "params", {"c", "C", "S", "half_interval"});
    s.trial.params.c = p.get<double>("c", 1.0);
    s.trial.params.C = p.get<double>("C", 1.0);
    s.trial.params.S = p.get<double>("S", 1.0);
    s.trial.params.half_interval = p.get<double>("half_interval", 1.0);
  }
  validating([&] { s.trial.params.validate(); });
  const auto rule = f.get<std::string>("rule", "threshold_relation");
  if (rule == "threshold_relation") s.trial.rule = FiringRule::threshold_relation;
  else if (rule == "upward_crossing") s.trial.rule = FiringRule::upward_crossing;
  else throw ConfigError("rule must be 'threshold_relation' or 'upward_crossing'");
  if (f.has("delay")) s.trial.delay = f.require<double>("delay");
  if (f.has("readout")) {
    const Fields r(f.raw("readout"), "readout", {"scale", "offset", "no_fire"});
    s.trial.readout.scale = r.get<double>("scale", 1.0);
    s.trial.readout.offset = r.get<double>("offset", 0.0);
    s.trial.readout.no_fire = r.get<double>("no_fire", 1e6);
  }
  s.zero_offsets = f.get<bool>("zero_offsets", false);
  if (f.has("rescale")) {
    s.rescale = to_vector(f.require<std::vector<double>>("rescale"));
    if (s.rescale->size() != edges) throw ConfigError("rescale must have one entry per edge");
    for (Eigen::Index e = 0; e < edges; ++e)
      if (!((*s.rescale)[e] > 0.0)) throw ConfigError("rescale factors must be positive");
  }
  s.plasticity = f.get<bool>("plasticity", true);
  if (f.has("reward_delta")) s.reward_delta = f.require<double>("reward_delta");
  s.alpha = f.get<double>("alpha", 0.1);
  if (!(s.alpha >= 0.0)) throw ConfigError("alpha must be nonnegative");
  s.seed = resolve_seed(f, o);
  s.output = resolve_out(f, o, "spike_demo.csv");
  return s;
}

std::string edge_label(const Edge& e) { return fmt::format("e{}-{}", e.from, e.to); }

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int cmd_verify(const CommandOptions& options, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const VerifySettings s = parse_verify(options);
    std::vector<CheckReport> reports;
    bool all_pass = true;
    for (const auto& name : s.checks) {
      const auto index = static_cast<std::uint64_t>(
          std::find(kAllChecks.begin(), kAllChecks.end(), name) - kAllChecks.begin());
      for (auto& r : run_check(name, s, index)) {
        r.seed = s.seed;
        log << (r.pass ? "PASS " : "FAIL ") << r.name << "\n";
        all_pass = all_pass && r.pass;
        reports.push_back(std::move(r));
      }
    }
    write_file(s.output, reports_to_json(reports) + "\n");
    return all_pass ? kExitOk : kExitFailure;
  });
}

int cmd_optimize(const CommandOptions& options, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const OptimizeSettings s = parse_optimize(options);
    try {
      const Trace rows = run_optimizer(*s.problem, s.run);
      write_file(s.output, trace_csv(rows));
      log << "wrote " << rows.size() << " rows to " << s.output << "\n";
      return kExitOk;
    } catch (const RunError& e) {
      write_file(s.output, trace_csv(e.rows()));
      err << "error: " << e.what() << "\n";
      return kExitFailure;
    }
  });
}

int cmd_sweep(const CommandOptions& options, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const SweepSettings s = parse_sweep(options);
    std::vector<SweepRow> rows;
    ordered_json summary;
    summary["kind"] = s.kind;
    const RngStream rng(s.seed, 0);
    if (s.kind == "variance") {
      const auto result = variance_scaling_sweep(s.dims, s.sigma2, s.n, rng, s.residual);
      for (const auto& p : result.points) rows.push_back({p.d, "variance", p.variance, p.se});
      summary["points"] = result.points.size();
      if (result.slope) {
        summary["slope"] = *result.slope;
        summary["status"] = "ok";
      } else {
        summary["slope"] = nullptr;
        summary["status"] = "insufficient points";
      }
    } else {
      // Mean final/initial objective ratio per method and dimension.
      ordered_json slopes;
      for (Method m : s.methods) {
        std::vector<SweepPoint> pts;
        for (Eigen::Index d : s.dims) {
          const Problem problem = Problem::least_squares(RealVector::Zero(d));
          RunConfig run;
          run.methods = {m};
          run.iterations = s.iterations;
          run.replicates = s.replicates;
          run.seed = rng.substream(static_cast<std::uint64_t>(d)).next_u64();
          run.schedule = s.schedule;
          run.half_interval = s.half_interval;
          run.gaussian = GaussianNoiseConfig::canonical(s.sigma2);
          run.strategy = s.strategy;
          run.theta0 = RealVector::Constant(d, s.start);
          run.parallel = options.parallel;
          const double initial = problem.objective(*run.theta0);
          std::vector<double> ratios;
          try {
            const Trace trace = run_optimizer(problem, run);
            for (const auto& row : trace)
              if (row.iter == s.iterations) ratios.push_back(row.loss / initial);
          } catch (const RunError& e) {
            err << "warning: " << e.what() << "\n";
            ratios.assign(s.replicates, std::numeric_limits<double>::infinity());
          }
          double mean = 0.0;
          for (double r : ratios) mean += r;
          mean /= static_cast<double>(ratios.size());
          double var = 0.0;
          for (double r : ratios) var += (r - mean) * (r - mean);
          const double se = ratios.size() > 1
                                ? std::sqrt(var / static_cast<double>(ratios.size() - 1) /
                                            static_cast<double>(ratios.size()))
                                : 0.0;
          rows.push_back({d, to_string(m) + "_loss_ratio", mean, se});
          pts.push_back({d, mean, se});
        }
        const auto slope = fit_loglog_slope(pts);
        slopes[to_string(m)] = slope ? json(*slope) : json(nullptr);
      }
      summary["points"] = s.dims.size();
      summary["slopes"] = slopes;
      summary["status"] = s.dims.size() >= 2 ? "ok" : "insufficient points";
    }
    std::string csv = "d,quantity,value,se\n";
    for (const auto& r : rows)
      csv += fmt::format("{},{},{},{}\n", r.d, r.quantity, num(r.value), num(r.se));
    write_file(s.output, csv);
    write_file(s.output + ".json", summary.dump(2) + "\n");
    log << "wrote " << rows.size() << " rows to " << s.output << "\n";
    return kExitOk;
  });
}

int cmd_spike_demo(const CommandOptions& options, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const SpikeSettings s = parse_spike(options);
    const auto edges = static_cast<Eigen::Index>(s.topology.edges.size());
    const double a = s.trial.params.half_interval;
    RealVector weights = s.weights;
    if (s.rescale) weights = hadamard(weights, *s.rescale);

    std::string csv = "trial,edge_or_neuron,kind,value\n";
    const RngStream base(s.seed, 0);
    for (std::uint64_t t = 0; t < s.trials; ++t) {
      RngStream rng = base.substream(t);
      TrialOptions opts = s.trial;
      RealVector offsets =
          s.zero_offsets ? RealVector::Zero(edges) : rng.uniform_vector(edges, -a, a);
      if (s.rescale) offsets -= s.rescale->array().log().matrix();
      opts.forced_offsets = offsets;
      const RealVector& x = s.inputs[t % s.inputs.size()];
      const TrialRecord rec = run_trial(s.topology, weights,
                                        encode_inputs(x, s.input_scale, s.input_offset),
                                        opts, rng);
      for (int n = 0; n < s.topology.neurons; ++n)
        if (rec.firing[n]) csv += fmt::format("{},n{},fire,{}\n", t, n, num(*rec.firing[n]));
      for (std::size_t e = 0; e < s.topology.edges.size(); ++e)
        if (rec.arrival[e])
          csv += fmt::format("{},{},arrival,{}\n", t, edge_label(s.topology.edges[e]),
                             num(*rec.arrival[e]));
      csv += fmt::format("{},n{},readout,{}\n", t, s.topology.outputs.front(), num(rec.readout));
      if (s.plasticity) {
        // Hebbian part always; the reward term rides on top (L = −R).
        const RealVector hebbian =
            apply_stdp(s.topology, weights, rec, s.trial.params, std::nullopt, s.alpha);
        if (s.reward_delta) {
          const RealVector modulated =
              apply_stdp(s.topology, weights, rec, s.trial.params, -*s.reward_delta, s.alpha);
          weights = hebbian + (modulated - weights);
        } else {
          weights = hebbian;
        }
        for (Eigen::Index e = 0; e < edges; ++e)
          if (!(weights[e] > 0.0))
            throw std::runtime_error(fmt::format("trial {}: weight of edge {} became nonpositive",
                                                 t, edge_label(s.topology.edges[e])));
      }
      for (Eigen::Index e = 0; e < edges; ++e)
        csv += fmt::format("{},{},weight,{}\n", t, edge_label(s.topology.edges[e]), num(weights[e]));
    }
    write_file(s.output, csv);
    log << "wrote " << s.trials << " trials to " << s.output << "\n";
    return kExitOk;
  });
}

int run_command(const std::string& name, const CommandOptions& options,
                std::ostream& log, std::ostream& err) {
  if (name == "verify") return cmd_verify(options, log, err);
  if (name == "optimize") return cmd_optimize(options, log, err);
  if (name == "sweep") return cmd_sweep(options, log, err);
  if (name == "spike-demo") return cmd_spike_demo(options, log, err);
  err << "unknown command '" << name << "'\n";
  return kExitConfig;
}

}  // namespace stdpzo::cli
