#pragma once

#include "fgll/measurements.hpp"
#include "fgll/network.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <vector>

namespace fgll {

/// Below this head difference (m) the Hazen-Williams law is replaced by its
/// secant through the origin, keeping dq/d(dh) bounded at zero flow.
inline constexpr double kZeroFlowHead = 1e-6;

struct FlowLaw {
  double q = 0.0;   // flow magnitude, m^3/s
  double dq = 0.0;  // d q / d |dh|
};

/// Regularized inverse Hazen-Williams law q = (|dh| / tau)^(1/nu).
FlowLaw flow_law(double abs_dh, double tau, double nu = kFlowExponent);

struct HydraulicState {
  Vector h;  // heads, m
  Vector q;  // flow magnitudes in the signed_incidence(h) orientation, m^3/s
  Vector d;  // nodal demands, outflow positive, m^3/s
};

struct SteadyStateOptions {
  double tolerance = 1e-10;  // max junction mass imbalance, m^3/s
  int max_iterations = 100;
};

struct SteadyStateStats {
  int iterations = 0;
  double residual = 0.0;
};

/// Demand-driven steady state. `demands` is an n-vector; reservoir entries
/// are ignored and replaced by the reservoirs' net supply.
HydraulicState steady_state(const Network& net, const Vector& demands, const SteadyStateOptions& opts = {},
                            SteadyStateStats* stats = nullptr);

/// q = (T^-1 B h)^(1/nu), B from the signs of h.
Vector head_flows(const Network& net, const Vector& h);
/// d_h = -B^T q_h.
Vector head_demands(const Network& net, const Vector& h);

struct DemandPattern {
  double mean = 1.0;
  double amplitude = 0.3;
  double period = 288.0;  // instants per cycle (5-minute steps over a day)
  double phase = 0.0;     // instants

  double multiplier(int t) const;
};

struct LeakSpec {
  std::size_t node = 0;
  Vector sizes;  // per instant, m^3/s
};

struct ParameterNoise {
  double roughness = 0.0;  // relative half-width of the uniform perturbation
  double diameter = 0.0;
  double demand = 0.0;
};

struct Scenario {
  Eigen::MatrixXd demands;  // T x n, m^3/s
  std::optional<LeakSpec> leak;
  ParameterNoise noise;
  std::uint64_t seed = 0;         // pipe attribute perturbation
  std::uint64_t demand_seed = 0;  // demand noise

  int T() const { return static_cast<int>(demands.rows()); }
};

/// T x n base demands scaled by the pattern, starting at instant `start`.
Eigen::MatrixXd pattern_demands(const Network& net, const DemandPattern& pattern, int T, int start = 0);

struct SimulationResult {
  std::vector<HydraulicState> states;
  Network network;  // attributes after perturbation
};

/// Perturbs the pipe attributes once, then solves each instant independently.
SimulationResult simulate_scenario(const Network& net, const Scenario& scenario,
                                   const SteadyStateOptions& opts = {});

/// Same as simulate_scenario but on an already perturbed network.
std::vector<HydraulicState> simulate_on(const Network& net, const Scenario& scenario,
                                        const SteadyStateOptions& opts = {});

Network perturb_network(const Network& net, const ParameterNoise& noise, std::uint64_t seed);

MeasurementSet sample_sensors(const std::vector<HydraulicState>& states, const SensorLayout& layout);

}  // namespace fgll
