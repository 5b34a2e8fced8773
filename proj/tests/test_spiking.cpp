#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "stdpzo/spiking.hpp"

using namespace stdpzo;

namespace {

RealVector vec(std::initializer_list<double> xs) {
  RealVector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Topology demo_topology() {
  return load_topology(std::string(STDPZO_SOURCE_DIR) + "/data/demo_topology.json");
}

SpikeKernelParams params(double c, double C, double S, double a = 1.0) {
  SpikeKernelParams p;
  p.c = c;
  p.C = C;
  p.S = S;
  p.half_interval = a;
  return p;
}

}  // namespace

TEST(Potential, Examples) {
  const std::vector<IncomingSpike> one{{1.0, 0.0}};
  EXPECT_NEAR(potential(one, 1.0, 1.0), std::exp(-1.0), 1e-15);
  EXPECT_EQ(potential(one, -0.5, 1.0), 0.0);
  const std::vector<IncomingSpike> two{{0.6, 0.0}, {0.6, 0.1}};
  EXPECT_NEAR(potential(two, 0.1, 1.0), 0.6 * std::exp(-0.1) + 0.6, 1e-15);
  EXPECT_NEAR(potential(two, 0.1, 1.0), 1.142903, 1e-6);
}

TEST(Potential, DecaysStrictlyBetweenArrivals) {
  RngStream rng(1, 0);
  for (int t = 0; t < 500; ++t) {
    std::vector<IncomingSpike> spikes;
    for (int i = 0; i < 5; ++i) spikes.push_back({0.1 + rng.uniform01(), rng.uniform(0, 10)});
    std::sort(spikes.begin(), spikes.end(),
              [](auto& a, auto& b) { return a.arrival < b.arrival; });
    const double c = 0.2 + 2 * rng.uniform01();
    for (std::size_t i = 0; i + 1 < spikes.size(); ++i) {
      const double lo = spikes[i].arrival, hi = spikes[i + 1].arrival;
      if (hi - lo < 1e-6) continue;
      const double t1 = lo + 0.25 * (hi - lo), t2 = lo + 0.75 * (hi - lo);
      EXPECT_LT(potential(spikes, t2, c), potential(spikes, t1, c));
    }
  }
}

TEST(NextSpikeTime, Examples) {
  const std::vector<IncomingSpike> strong{{2.0, 0.0}};
  EXPECT_EQ(next_spike_time(strong, 1.0, 1.0), 0.0);
  const std::vector<IncomingSpike> weak{{0.3, 0.0}, {0.4, 0.0}, {0.2, 1.0}};
  EXPECT_FALSE(next_spike_time(weak, 1.0, 1.0).has_value());
  const std::vector<IncomingSpike> two{{0.6, 0.0}, {0.6, 0.1}};
  EXPECT_EQ(next_spike_time(two, 1.0, 1.0), 0.1);
}

TEST(NextSpikeTime, RequiresSortedArrivals) {
  const std::vector<IncomingSpike> unsorted{{0.6, 0.1}, {0.6, 0.0}};
  EXPECT_THROW(next_spike_time(unsorted, 1.0, 1.0), std::invalid_argument);
}

TEST(InterarrivalTime, Examples) {
  EXPECT_EQ(interarrival_time(vec({0.5, 0.5}), vec({0, 0}), 1.0), 0.0);
  EXPECT_NEAR(interarrival_time(vec({1, 1}), vec({0, 0}), 1.0), 2 * std::log(2.0), 1e-15);
  EXPECT_NEAR(interarrival_time(vec({1, 1}), vec({0, 0}), 1.0), 1.386294, 1e-6);
  EXPECT_THROW(interarrival_time(vec({0.2, 0.2}), vec({0, 0}), 1.0), std::domain_error);
}

TEST(InterarrivalTime, InvariantUnderWeightOffsetTrade) {
  RngStream rng(2, 0);
  for (int t = 0; t < 10000; ++t) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.uniform01() * 6);
    const RealVector w = (rng.uniform_vector(n, -1, 1)).array().exp().matrix();
    const RealVector u = rng.uniform_vector(n, -1, 1);
    const RealVector lambda = (rng.uniform_vector(n, -2, 2)).array().exp().matrix();
    const double s = 0.5 * (w.array() * u.array().exp()).sum();
    const double base = interarrival_time(w, u, s);
    const double moved = interarrival_time(hadamard(lambda, w),
                                           u - lambda.array().log().matrix(), s);
    EXPECT_NEAR(moved, base, 1e-12);
  }
}

TEST(Stdp, Examples) {
  const auto p = params(1.0, 0.5, 1.0);
  EXPECT_EQ(stdp_update(1.3, 0.5, 0.0, 1.0, p, std::nullopt, 0.1), 1.3);
  EXPECT_NEAR(stdp_update(1.0, 0.0, 0.0, std::log(2.0), p, std::nullopt, 0.1), 0.75, 1e-15);
}

TEST(Stdp, LossFormFlipsSign) {
  const auto p = params(1.0, 0.5, 1.0);
  // Early arrival: unsupervised depresses, positive loss delta potentiates.
  const double unsup = stdp_update(1.0, 0.0, 0.0, std::log(2.0), p, std::nullopt, 0.1);
  const double loss = stdp_update(1.0, 0.0, 0.0, std::log(2.0), p, 2.0, 0.1);
  EXPECT_LT(unsup, 1.0);
  EXPECT_NEAR(loss, 1.0 + 0.1 * 2.0 * 0.5 * (1.0 - 0.5), 1e-15);
  EXPECT_EQ(stdp_update(1.0, 0.0, 0.0, std::log(2.0), p, 0.0, 0.1), 1.0);
}

TEST(Stdp, TimingOrderViolated) {
  const auto p = params(1.0, 0.5, 1.0);
  EXPECT_THROW(stdp_update(1.0, 2.0, 0.0, 1.0, p, std::nullopt, 0.1), TimingOrderError);
  EXPECT_THROW(stdp_update(1.0, 0.5, 1.0, 0.0, p, std::nullopt, 0.1), TimingOrderError);
}

TEST(Stdp, UnsupervisedKeepsWeightsPositive) {
  RngStream rng(3, 0);
  for (int t = 0; t < 10000; ++t) {
    const double w = std::exp(rng.uniform(-8, 3));
    const double tm = rng.uniform(-5, 5);
    const double tp = tm + rng.uniform(0, 4);
    const double tau = rng.uniform(tm, tp);
    const auto p = params(0.1 + 3 * rng.uniform01(), 1e-3 + (1 - 1e-3) * rng.uniform01(), 1.0);
    const double next = stdp_update(w, tau, tm, tp, p, std::nullopt, 0.1);
    EXPECT_GT(next, 0.0);
    EXPECT_LT(std::abs(next - w), w);
  }
}

TEST(Stdp, MidpointYieldsNoChange) {
  RngStream rng(4, 0);
  for (int t = 0; t < 1000; ++t) {
    const double tm = rng.uniform(-3, 3), tp = tm + rng.uniform(0, 3);
    const double w = std::exp(rng.uniform(-2, 2));
    EXPECT_EQ(stdp_update(w, 0.5 * (tm + tp), tm, tp, params(1.3, 0.7, 1.0), std::nullopt, 0.1), w);
  }
}

TEST(Topology, DemoIsValid) {
  const Topology t = demo_topology();
  EXPECT_EQ(t.neurons, 6);
  EXPECT_EQ(t.edges.size(), 8u);
  const auto order = t.topological_order();
  ASSERT_EQ(order.size(), 6u);
  for (const Edge& e : t.edges)
    EXPECT_LT(std::find(order.begin(), order.end(), e.from) - order.begin(),
              std::find(order.begin(), order.end(), e.to) - order.begin());
  const Topology round = parse_topology(topology_to_json(t));
  EXPECT_EQ(round.edges, t.edges);
}

TEST(Topology, RejectsCycles) {
  EXPECT_THROW(parse_topology(R"({"neurons":4,"edges":[[0,1],[1,2],[2,3],[3,1]],"inputs":[0],"outputs":[3]})"),
               CyclicTopology);
  EXPECT_THROW(parse_topology(R"({"neurons":2,"edges":[[1,1]],"inputs":[0],"outputs":[1]})"),
               std::invalid_argument);
}

TEST(Topology, RejectsMalformed) {
  EXPECT_THROW(parse_topology(R"({"neurons":2,"edges":[[0,5]],"inputs":[0],"outputs":[1]})"),
               std::invalid_argument);
  EXPECT_THROW(parse_topology(R"({"neurons":2,"edges":[[1,0]],"inputs":[0],"outputs":[1]})"),
               std::invalid_argument);
  EXPECT_THROW(parse_topology(R"({"neurons":2,"edges":[[0,1]],"inputs":[0],"outputs":[1],"extra":1})"),
               std::invalid_argument);
  EXPECT_THROW(parse_topology("not json"), std::invalid_argument);
}

TEST(RunTrial, ZeroOffsetsMatchClosedFormChain) {
  const Topology t = demo_topology();
  const double w = 0.8, s = 1.0;
  TrialOptions opts;
  opts.params = params(1.0, 0.5, s);
  opts.forced_offsets = RealVector::Zero(8);
  RngStream rng(5, 0);
  const auto rec = run_trial(t, RealVector::Constant(8, w), encode_inputs(vec({0, 0, 0})), opts, rng);
  // Three synchronous arrivals at 0 + delay, then two at T_hidden + delay.
  const double hidden = 1.0 + std::log(3 * w / s);
  const double output = hidden + 1.0 + std::log(2 * w / s);
  EXPECT_NEAR(*rec.firing[3], hidden, 1e-14);
  EXPECT_NEAR(*rec.firing[4], hidden, 1e-14);
  EXPECT_NEAR(*rec.firing[5], output, 1e-14);
  EXPECT_TRUE(rec.output_fired);
  EXPECT_NEAR(rec.readout, 2 * std::log(2 * w / s), 1e-14);
  EXPECT_NEAR(*rec.t_minus(5), hidden + 1.0 - std::log(2 * w / s), 1e-14);
}

TEST(RunTrial, SilentInputsSilenceNetwork) {
  const Topology t = demo_topology();
  TrialOptions opts;
  RngStream rng(6, 0);
  const std::vector<std::optional<double>> silent(3, std::nullopt);
  const auto rec = run_trial(t, RealVector::Ones(8), silent, opts, rng);
  for (const auto& f : rec.firing) EXPECT_FALSE(f.has_value());
  EXPECT_FALSE(rec.output_fired);
  EXPECT_EQ(rec.readout, opts.readout.no_fire);
}

TEST(RunTrial, SubthresholdOutputGivesSentinel) {
  const Topology t = demo_topology();
  TrialOptions opts;
  opts.params = params(1.0, 0.5, 10.0);
  opts.forced_offsets = RealVector::Zero(8);
  opts.readout.no_fire = -7.0;
  RngStream rng(6, 0);
  const auto rec = run_trial(t, RealVector::Ones(8), encode_inputs(vec({0, 0, 0})), opts, rng);
  EXPECT_FALSE(rec.output_fired);
  EXPECT_EQ(rec.readout, -7.0);
}

TEST(RunTrial, SameSeedSameRecord) {
  const Topology t = demo_topology();
  TrialOptions opts;
  RngStream a(7, 3), b(7, 3);
  const auto ra = run_trial(t, RealVector::Constant(8, 0.9), encode_inputs(vec({0, 0.4, 1})), opts, a);
  const auto rb = run_trial(t, RealVector::Constant(8, 0.9), encode_inputs(vec({0, 0.4, 1})), opts, b);
  EXPECT_EQ(ra.offsets, rb.offsets);
  EXPECT_EQ(ra.firing, rb.firing);
  EXPECT_EQ(ra.arrival, rb.arrival);
  EXPECT_EQ(ra.readout, rb.readout);
}

TEST(RunTrial, ReadoutInvariantUnderWeightOffsetTrade) {
  const Topology t = demo_topology();
  RngStream rng(8, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    const RealVector w = (rng.uniform_vector(8, -0.5, 0.5)).array().exp().matrix();
    const RealVector u = rng.uniform_vector(8, -1, 1);
    const RealVector lambda = (rng.uniform_vector(8, -1, 1)).array().exp().matrix();
    const auto inputs = encode_inputs(rng.uniform_vector(3, 0, 1));
    TrialOptions base;
    base.forced_offsets = u;
    TrialOptions moved = base;
    moved.forced_offsets = u - lambda.array().log().matrix();
    const auto r0 = run_trial(t, w, inputs, base, rng);
    const auto r1 = run_trial(t, hadamard(lambda, w), inputs, moved, rng);
    ASSERT_EQ(r0.output_fired, r1.output_fired);
    EXPECT_NEAR(r1.readout, r0.readout, 1e-12);
  }
}

TEST(RunTrial, UpwardCrossingRule) {
  const Topology t = parse_topology(R"({"neurons":3,"edges":[[0,2],[1,2]],"inputs":[0,1],"outputs":[2]})");
  TrialOptions opts;
  opts.rule = FiringRule::upward_crossing;
  opts.delay = 0.0;
  opts.forced_offsets = RealVector::Zero(2);
  RngStream rng(9, 0);
  const auto rec = run_trial(t, vec({0.6, 0.6}), {0.0, 0.1}, opts, rng);
  EXPECT_EQ(rec.firing[2], 0.1);
}

TEST(ApplyStdp, SkipsArrivalsOutsideWindowAndKeepsPositivity) {
  const Topology t = demo_topology();
  TrialOptions opts;
  opts.params = params(1.0, 1.0, 1.0);
  RngStream rng(10, 0);
  RealVector w = RealVector::Constant(8, 0.8);
  for (int trial = 0; trial < 200; ++trial) {
    const auto rec = run_trial(t, w, encode_inputs(rng.uniform_vector(3, 0, 1)), opts, rng);
    const RealVector next = apply_stdp(t, w, rec, opts.params, std::nullopt, 0.1);
    for (std::size_t e = 0; e < t.edges.size(); ++e) {
      EXPECT_GT(next[e], 0.0);
      const int post = t.edges[e].to;
      const bool inside = rec.arrival[e] && rec.firing[post] &&
                          *rec.arrival[e] >= *rec.t_minus(post) &&
                          *rec.arrival[e] <= *rec.firing[post];
      if (!inside) EXPECT_EQ(next[e], w[e]);
    }
    w = next;
  }
}
