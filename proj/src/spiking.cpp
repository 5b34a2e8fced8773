#include "stdpzo/spiking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include "json.hpp"

namespace stdpzo {

using nlohmann::json;

void Topology::validate() const {
  if (neurons <= 0) throw std::invalid_argument("topology needs at least one neuron");
  auto check_id = [&](int id, const char* what) {
    if (id < 0 || id >= neurons)
      throw std::invalid_argument(std::string(what) + " id " + std::to_string(id) +
                                  " out of range");
  };
  std::set<std::pair<int, int>> seen;
  for (const auto& e : edges) {
    check_id(e.from, "edge");
    check_id(e.to, "edge");
    if (e.from == e.to)
      throw CyclicTopology("self-loop at neuron " + std::to_string(e.from));
    if (!seen.insert({e.from, e.to}).second)
      throw std::invalid_argument("duplicate edge " + std::to_string(e.from) +
                                  "->" + std::to_string(e.to));
  }
  if (inputs.empty()) throw std::invalid_argument("topology needs input neurons");
  if (outputs.empty()) throw std::invalid_argument("topology needs output neurons");
  for (int i : inputs) {
    check_id(i, "input");
    if (!incoming(i).empty())
      throw std::invalid_argument("input neuron " + std::to_string(i) +
                                  " has incoming edges");
  }
  for (int o : outputs) check_id(o, "output");
  (void)topological_order();
}

std::vector<int> Topology::topological_order() const {
  std::vector<int> indegree(neurons, 0);
  std::vector<std::vector<int>> children(neurons);
  for (const auto& e : edges) {
    ++indegree[e.to];
    children[e.from].push_back(e.to);
  }
  // Min-heap keeps the order deterministic.
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int i = 0; i < neurons; ++i)
    if (indegree[i] == 0) ready.push(i);
  std::vector<int> order;
  order.reserve(neurons);
  while (!ready.empty()) {
    const int n = ready.top();
    ready.pop();
    order.push_back(n);
    for (int child : children[n])
      if (--indegree[child] == 0) ready.push(child);
  }
  if (static_cast<int>(order.size()) != neurons)
    throw CyclicTopology("topology contains a directed cycle");
  return order;
}

std::vector<std::size_t> Topology::incoming(int neuron) const {
  std::vector<std::size_t> out;
  for (std::size_t e = 0; e < edges.size(); ++e)
    if (edges[e].to == neuron) out.push_back(e);
  return out;
}

namespace {

Topology parse_topology_document(const json& doc) {
  static const std::set<std::string> allowed = {"neurons", "edges", "inputs", "outputs"};
  for (const auto& [key, _] : doc.items())
    if (!allowed.count(key))
      throw std::invalid_argument("unknown topology field '" + key + "'");
  Topology t;
  t.neurons = doc.at("neurons").get<int>();
  for (const auto& pair : doc.at("edges")) {
    if (!pair.is_array() || pair.size() != 2)
      throw std::invalid_argument("edges must be [from, to] pairs");
    t.edges.push_back({pair[0].get<int>(), pair[1].get<int>()});
  }
  t.inputs = doc.at("inputs").get<std::vector<int>>();
  t.outputs = doc.at("outputs").get<std::vector<int>>();
  return t;
}

}  // namespace

Topology parse_topology(const std::string& json_text) {
  Topology t;
  try {
    t = parse_topology_document(json::parse(json_text));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed topology: ") + e.what());
  }
  t.validate();
  return t;
}

Topology load_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open topology file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_topology(buf.str());
}

std::string topology_to_json(const Topology& topology) {
  json doc;
  doc["neurons"] = topology.neurons;
  doc["edges"] = json::array();
  for (const auto& e : topology.edges) doc["edges"].push_back({e.from, e.to});
  doc["inputs"] = topology.inputs;
  doc["outputs"] = topology.outputs;
  return doc.dump();
}

void SpikeKernelParams::validate() const {
  if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("c must be positive");
  if (!(C > 0.0 && C <= 1.0)) throw std::invalid_argument("C must lie in (0, 1]");
  if (!(S > 0.0) || !std::isfinite(S)) throw std::invalid_argument("S must be positive");
  if (!(half_interval > 0.0) || !std::isfinite(half_interval))
    throw std::invalid_argument("half_interval must be positive");
}

double potential(std::span<const IncomingSpike> incoming, double t, double c) {
  double v = 0.0;
  for (const auto& s : incoming)
    if (t >= s.arrival) v += s.weight * std::exp(c * (s.arrival - t));
  return v;
}

std::optional<double> next_spike_time(std::span<const IncomingSpike> incoming,
                                      double S, double c) {
  double v = 0.0;
  double last = 0.0;
  bool first = true;
  for (const auto& s : incoming) {
    if (!first && s.arrival < last)
      throw std::invalid_argument("next_spike_time: arrivals must be sorted");
    v = first ? s.weight : v * std::exp(-c * (s.arrival - last)) + s.weight;
    last = s.arrival;
    first = false;
    if (v >= S) return s.arrival;
  }
  return std::nullopt;
}

double interarrival_time(const RealVector& weights, const RealVector& offsets,
                         double S) {
  require_same_dim(weights, offsets, "interarrival_time");
  double total = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i)
    total += weights[i] * std::exp(offsets[i]);
  if (!(total >= S))
    throw std::domain_error("interarrival_time: sum of w e^U below threshold");
  return 2.0 * std::log(total / S);
}

double stdp_update(double w, double tau, double t_minus, double t_plus,
                   const SpikeKernelParams& params,
                   std::optional<double> loss_delta, double alpha) {
  if (!(t_minus <= tau && tau <= t_plus))
    throw TimingOrderError("stdp_update: need T- <= tau <= T+");
  if (!(w > 0.0)) throw std::invalid_argument("stdp_update: weight must be positive");
  // e^{−c(T₊−τ)} − e^{−c(τ−T₋)} = 2 e^{−ch} sinh(cs) with h the half window
  // and s the offset from its midpoint; exactly zero at the midpoint.
  const double h = 0.5 * (t_plus - t_minus);
  const double s = tau - 0.5 * (t_minus + t_plus);
  const double kernel_gap = 2.0 * std::exp(-params.c * h) * std::sinh(params.c * s);
  if (!loss_delta) return w + w * params.C * kernel_gap;
  return w - alpha * *loss_delta * w * params.C * kernel_gap;
}

std::optional<double> TrialRecord::t_minus(int neuron) const {
  const auto& t = firing.at(neuron);
  const auto& m = midpoint.at(neuron);
  if (!t || !m) return std::nullopt;
  return 2.0 * *m - *t;
}

std::vector<std::optional<double>> encode_inputs(const RealVector& x,
                                                 double scale, double offset) {
  std::vector<std::optional<double>> out;
  out.reserve(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out.emplace_back(scale * x[i] + offset);
  return out;
}

TrialRecord run_trial(const Topology& topology, const RealVector& weights,
                      const std::vector<std::optional<double>>& input_times,
                      const TrialOptions& options, RngStream& rng) {
  topology.validate();
  options.params.validate();
  const auto num_edges = static_cast<Eigen::Index>(topology.edges.size());
  if (weights.size() != num_edges)
    throw DimensionMismatch("run_trial weights", weights.size(), num_edges);
  for (Eigen::Index e = 0; e < num_edges; ++e)
    if (!(weights[e] > 0.0)) throw std::invalid_argument("run_trial: weights must be positive");
  if (input_times.size() != topology.inputs.size())
    throw DimensionMismatch("run_trial inputs",
                            static_cast<Eigen::Index>(input_times.size()),
                            static_cast<Eigen::Index>(topology.inputs.size()));

  const double a = options.params.half_interval;
  const double c = options.params.c;
  const double delay = options.delay.value_or(a);

  TrialRecord rec;
  rec.firing.assign(topology.neurons, std::nullopt);
  rec.midpoint.assign(topology.neurons, std::nullopt);
  rec.arrival.assign(topology.edges.size(), std::nullopt);
  if (options.forced_offsets) {
    if (options.forced_offsets->size() != num_edges)
      throw DimensionMismatch("run_trial offsets", options.forced_offsets->size(), num_edges);
    rec.offsets = *options.forced_offsets;
  } else {
    rec.offsets = rng.uniform_vector(num_edges, -a, a);
  }

  for (std::size_t i = 0; i < topology.inputs.size(); ++i)
    rec.firing[topology.inputs[i]] = input_times[i];

  for (int n : topology.topological_order()) {
    if (std::find(topology.inputs.begin(), topology.inputs.end(), n) !=
        topology.inputs.end())
      continue;
    std::vector<IncomingSpike> spikes;
    double nominal_sum = 0.0;
    for (std::size_t e : topology.incoming(n)) {
      const auto& parent = rec.firing[topology.edges[e].from];
      if (!parent) continue;
      const double nominal = *parent + delay;
      const double tau = nominal + rec.offsets[e];
      rec.arrival[e] = tau;
      nominal_sum += nominal;
      spikes.push_back({weights[e], tau});
    }
    if (spikes.empty()) continue;
    const double m = nominal_sum / static_cast<double>(spikes.size());
    rec.midpoint[n] = m;

    if (options.rule == FiringRule::threshold_relation) {
      double sum = 0.0;
      for (const auto& s : spikes) sum += s.weight * std::exp(c * (s.arrival - m));
      if (sum >= options.params.S) rec.firing[n] = m + std::log(sum / options.params.S) / c;
    } else {
      std::sort(spikes.begin(), spikes.end(),
                [](const IncomingSpike& x, const IncomingSpike& y) { return x.arrival < y.arrival; });
      rec.firing[n] = next_spike_time(spikes, options.params.S, c);
    }
  }

  const int out = topology.outputs.front();
  rec.output_fired = rec.firing[out].has_value() && rec.midpoint[out].has_value();
  if (rec.output_fired) {
    const double interval = 2.0 * (*rec.firing[out] - *rec.midpoint[out]);
    rec.readout = options.readout.scale * interval + options.readout.offset;
  } else {
    rec.readout = options.readout.no_fire;
  }
  return rec;
}

RealVector apply_stdp(const Topology& topology, const RealVector& weights,
                      const TrialRecord& record, const SpikeKernelParams& params,
                      std::optional<double> loss_delta, double alpha) {
  RealVector out = weights;
  for (std::size_t e = 0; e < topology.edges.size(); ++e) {
    const int post = topology.edges[e].to;
    const auto& tau = record.arrival[e];
    const auto& t_plus = record.firing[post];
    const auto t_minus = record.t_minus(post);
    if (!tau || !t_plus || !t_minus) continue;
    if (*tau < *t_minus || *tau > *t_plus) continue;
    out[e] = stdp_update(weights[e], *tau, *t_minus, *t_plus, params, loss_delta, alpha);
  }
  return out;
}

}  // namespace stdpzo
