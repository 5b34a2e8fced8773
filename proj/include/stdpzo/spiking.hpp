#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stdpzo/core.hpp"
#include "stdpzo/rng.hpp"

namespace stdpzo {

struct Edge {
  int from = 0;
  int to = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

class CyclicTopology : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Feedforward network: neuron ids 0..neurons-1, static edge set. Input
// neurons have no incoming edges.
struct Topology {
  int neurons = 0;
  std::vector<Edge> edges;
  std::vector<int> inputs;
  std::vector<int> outputs;

  // Throws std::invalid_argument (CyclicTopology for cycles).
  void validate() const;
  std::vector<int> topological_order() const;
  // Indices into `edges` of the edges ending at `neuron`.
  std::vector<std::size_t> incoming(int neuron) const;
};

// {neurons: int, edges: [[i, j], ...], inputs: [...], outputs: [...]};
// validated, so cyclic graphs are rejected.
Topology parse_topology(const std::string& json_text);
Topology load_topology(const std::string& path);
std::string topology_to_json(const Topology& topology);

struct SpikeKernelParams {
  double c = 1.0;              // kernel decay rate
  double C = 1.0;              // plasticity amplitude, 0 < C <= 1
  double S = 1.0;              // firing threshold
  double half_interval = 1.0;  // A

  void validate() const;
};

struct IncomingSpike {
  double weight = 0.0;
  double arrival = 0.0;
};

// Σ_i w_i e^{c(τ_i − t)} 1(t >= τ_i).
double potential(std::span<const IncomingSpike> incoming, double t, double c);

// First arrival instant at which the running potential reaches S. The
// potential only jumps at arrivals and decays in between, so no other instant
// can be the first crossing. Arrivals must be sorted by time.
std::optional<double> next_spike_time(std::span<const IncomingSpike> incoming,
                                      double S, double c);

// T₊ − T₋ = 2 ln(Σ_i w_i e^{U_i} / S) from S = Σ_i w_i e^{U_i − (T₊ − T₋)/2}.
// Depends on (w, U) only through w_i e^{U_i}. Throws std::domain_error when
// Σ w e^U < S.
double interarrival_time(const RealVector& weights, const RealVector& offsets,
                         double S);

class TimingOrderError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Plasticity for one synapse given its arrival τ within [T₋, T₊].
//   unsupervised:  w + wC(−e^{−c(τ−T₋)} + e^{−c(T₊−τ)})
//   loss-driven:   w + α (L − L̄) wC(e^{−c(τ−T₋)} − e^{−c(T₊−τ)})
// The loss form flips the sign of the reward form since L = −R.
double stdp_update(double w, double tau, double t_minus, double t_plus,
                   const SpikeKernelParams& params,
                   std::optional<double> loss_delta, double alpha);

enum class FiringRule {
  // T₊ = (1/c) ln(Σ w e^{cτ} / S): the time at which the superposed kernels
  // equal S. Fires iff T₊ >= m, m = mean nominal arrival midpoint.
  threshold_relation,
  // next_spike_time on the sorted arrivals.
  upward_crossing,
};

struct Readout {
  double scale = 1.0;
  double offset = 0.0;
  double no_fire = 1e6;  // readout of a trial whose output neuron stays silent
};

struct TrialOptions {
  SpikeKernelParams params;
  FiringRule rule = FiringRule::threshold_relation;
  std::optional<double> delay;  // transmission delay, default A
  Readout readout;
  // One offset per edge; drawn Uniform[−A, A] when absent.
  std::optional<RealVector> forced_offsets;
};

struct TrialRecord {
  std::vector<std::optional<double>> firing;    // per neuron (T₊)
  std::vector<std::optional<double>> midpoint;  // per neuron, m
  std::vector<std::optional<double>> arrival;   // per edge
  RealVector offsets;                           // per edge, U
  double readout = 0.0;
  bool output_fired = false;

  // T₋ = 2m − T₊ for a neuron that fired.
  std::optional<double> t_minus(int neuron) const;
};

// Spike time per input neuron (nullopt = silent), affine in X.
std::vector<std::optional<double>> encode_inputs(const RealVector& x,
                                                 double scale = 1.0,
                                                 double offset = 0.0);

// One trial: inputs fire at their assigned times, every edge carries exactly
// one spike arriving at T_parent + delay + U_e, neurons fire in topological
// order. Readout is affine in the first output neuron's T₊ − T₋.
TrialRecord run_trial(const Topology& topology, const RealVector& weights,
                      const std::vector<std::optional<double>>& input_times,
                      const TrialOptions& options, RngStream& rng);

// Applies stdp_update to every edge whose arrival lies in [T₋, T₊] of its
// postsynaptic neuron. Returns the updated weights.
RealVector apply_stdp(const Topology& topology, const RealVector& weights,
                      const TrialRecord& record, const SpikeKernelParams& params,
                      std::optional<double> loss_delta, double alpha);

}  // namespace stdpzo
