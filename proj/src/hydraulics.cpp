#include "fgll/hydraulics.hpp"

#include "fgll/errors.hpp"
#include "fgll/rng.hpp"

#include <Eigen/SparseCholesky>
#include <fmt/format.h>

#include <cmath>
#include <numbers>
#include <numeric>

namespace fgll {

namespace {

constexpr int kMaxHalvings = 30;

Vector resistances(const Network& net) {
  Vector tau(static_cast<Eigen::Index>(net.m()));
  for (std::size_t k = 0; k < net.m(); ++k) tau(static_cast<Eigen::Index>(k)) = resistance(net.pipe(k));
  return tau;
}

// Signed flow along each pipe's stored orientation and its derivative.
void pipe_flows(const Network& net, const Vector& tau, const Vector& h, Vector& flow, Vector& dflow) {
  flow.resize(static_cast<Eigen::Index>(net.m()));
  dflow.resize(static_cast<Eigen::Index>(net.m()));
  for (std::size_t k = 0; k < net.m(); ++k) {
    const Pipe& p = net.pipe(k);
    const auto kk = static_cast<Eigen::Index>(k);
    const double dh = h(static_cast<Eigen::Index>(p.source)) - h(static_cast<Eigen::Index>(p.sink));
    const FlowLaw law = flow_law(std::abs(dh), tau(kk));
    flow(kk) = dh >= 0.0 ? law.q : -law.q;
    dflow(kk) = law.dq;
  }
}

Vector demands_from_flows(const Network& net, const Vector& flow) {
  Vector d = Vector::Zero(static_cast<Eigen::Index>(net.n()));
  for (std::size_t k = 0; k < net.m(); ++k) {
    const Pipe& p = net.pipe(k);
    d(static_cast<Eigen::Index>(p.source)) -= flow(static_cast<Eigen::Index>(k));
    d(static_cast<Eigen::Index>(p.sink)) += flow(static_cast<Eigen::Index>(k));
  }
  return d;
}

}  // namespace

FlowLaw flow_law(double abs_dh, double tau, double nu) {
  if (abs_dh >= kZeroFlowHead) {
    const double q = std::pow(abs_dh / tau, 1.0 / nu);
    return {q, q / (nu * abs_dh)};
  }
  const double slope = std::pow(kZeroFlowHead / tau, 1.0 / nu) / kZeroFlowHead;
  return {slope * abs_dh, slope};
}

Vector head_flows(const Network& net, const Vector& h) {
  if (static_cast<std::size_t>(h.size()) != net.n()) throw Error(ErrorCode::DimensionMismatch, "head vector size");
  Vector q(static_cast<Eigen::Index>(net.m()));
  for (std::size_t k = 0; k < net.m(); ++k) {
    const Pipe& p = net.pipe(k);
    const double dh = h(static_cast<Eigen::Index>(p.source)) - h(static_cast<Eigen::Index>(p.sink));
    q(static_cast<Eigen::Index>(k)) = flow_law(std::abs(dh), resistance(p)).q;
  }
  return q;
}

Vector head_demands(const Network& net, const Vector& h) {
  const Vector q = head_flows(net, h);
  return -(signed_incidence(net, h).transpose() * q);
}

HydraulicState steady_state(const Network& net, const Vector& demands, const SteadyStateOptions& opts,
                            SteadyStateStats* stats) {
  const auto n = static_cast<Eigen::Index>(net.n());
  if (demands.size() != n) throw Error(ErrorCode::DimensionMismatch, "demand vector size");
  if (!demands.allFinite()) throw Error(ErrorCode::NonFinite, "demands");

  const Vector tau = resistances(net);
  const auto& junctions = net.junctions();
  const auto nj = static_cast<Eigen::Index>(junctions.size());
  std::vector<Eigen::Index> slot(net.n(), -1);
  for (Eigen::Index j = 0; j < nj; ++j) slot[junctions[static_cast<std::size_t>(j)]] = j;

  double mean_reservoir = 0.0;
  for (std::size_t r : net.reservoirs()) mean_reservoir += net.node(r).reservoir_head;
  mean_reservoir /= static_cast<double>(net.reservoirs().size());

  Vector h(n);
  for (std::size_t i = 0; i < net.n(); ++i) {
    h(static_cast<Eigen::Index>(i)) = net.node(i).is_reservoir() ? net.node(i).reservoir_head : mean_reservoir - 1.0;
  }

  Vector target(nj);
  for (Eigen::Index j = 0; j < nj; ++j) target(j) = demands(static_cast<Eigen::Index>(junctions[static_cast<std::size_t>(j)]));

  Vector flow, dflow;
  auto imbalance = [&](const Vector& heads) {
    pipe_flows(net, tau, heads, flow, dflow);
    const Vector dh = demands_from_flows(net, flow);
    Vector g(nj);
    for (Eigen::Index j = 0; j < nj; ++j) g(j) = dh(static_cast<Eigen::Index>(junctions[static_cast<std::size_t>(j)])) - target(j);
    return g;
  };

  Vector g = imbalance(h);
  int iterations = 0;
  while (nj > 0 && g.lpNorm<Eigen::Infinity>() >= opts.tolerance) {
    if (iterations >= opts.max_iterations) {
      throw Error(ErrorCode::NonConvergence,
                  fmt::format("max_iterations={} reached (imbalance {:.3e} m^3/s)", opts.max_iterations,
                              g.lpNorm<Eigen::Infinity>()));
    }
    ++iterations;

    // Junction block of B^T diag(dq) B; the imbalance Jacobian is its negative.
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(4 * net.m());
    for (std::size_t k = 0; k < net.m(); ++k) {
      const Pipe& p = net.pipe(k);
      const double c = dflow(static_cast<Eigen::Index>(k));
      const Eigen::Index a = slot[p.source];
      const Eigen::Index b = slot[p.sink];
      if (a >= 0) t.emplace_back(a, a, c);
      if (b >= 0) t.emplace_back(b, b, c);
      if (a >= 0 && b >= 0) {
        t.emplace_back(a, b, -c);
        t.emplace_back(b, a, -c);
      }
    }
    SparseMatrix jac(nj, nj);
    jac.setFromTriplets(t.begin(), t.end());
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(jac);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0) {
      throw Error(ErrorCode::SingularJacobian, fmt::format("iteration {}", iterations));
    }
    const Vector step = ldlt.solve(g);
    if (!step.allFinite()) throw Error(ErrorCode::SingularJacobian, fmt::format("iteration {}", iterations));

    const double merit = g.squaredNorm();
    double alpha = 1.0;
    Vector trial = h;
    Vector trial_g;
    for (int halving = 0; halving <= kMaxHalvings; ++halving) {
      for (Eigen::Index j = 0; j < nj; ++j) {
        const auto i = static_cast<Eigen::Index>(junctions[static_cast<std::size_t>(j)]);
        trial(i) = h(i) + alpha * step(j);
      }
      trial_g = imbalance(trial);
      if (trial_g.squaredNorm() < merit) break;
      alpha *= 0.5;
    }
    // After exhausting the halvings the shortest step is taken anyway.
    h = trial;
    g = trial_g;
  }

  pipe_flows(net, tau, h, flow, dflow);
  HydraulicState state;
  state.h = h;
  state.q = flow.cwiseAbs();
  state.d = demands_from_flows(net, flow);
  for (Eigen::Index j = 0; j < nj; ++j) {
    const auto i = static_cast<Eigen::Index>(junctions[static_cast<std::size_t>(j)]);
    state.d(i) = demands(i);
  }
  if (stats) {
    stats->iterations = iterations;
    stats->residual = nj > 0 ? g.lpNorm<Eigen::Infinity>() : 0.0;
  }
  return state;
}

double DemandPattern::multiplier(int t) const {
  return mean + amplitude * std::sin(2.0 * std::numbers::pi * (static_cast<double>(t) + phase) / period);
}

Eigen::MatrixXd pattern_demands(const Network& net, const DemandPattern& pattern, int T, int start) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(T, static_cast<Eigen::Index>(net.n()));
  for (int t = 0; t < T; ++t) {
    const double f = pattern.multiplier(start + t);
    for (std::size_t i : net.junctions()) d(t, static_cast<Eigen::Index>(i)) = f * net.node(i).base_demand;
  }
  return d;
}

Network perturb_network(const Network& net, const ParameterNoise& noise, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Pipe> pipes = net.pipes();
  for (Pipe& p : pipes) {
    p.roughness *= 1.0 + rng.uniform(-noise.roughness, noise.roughness);
    p.diameter *= 1.0 + rng.uniform(-noise.diameter, noise.diameter);
  }
  return net.with_pipes(std::move(pipes));
}

namespace {

void validate(const Network& net, const Scenario& s) {
  if (s.T() < 2) throw Error(ErrorCode::WindowTooShort, fmt::format("scenario has T={}", s.T()));
  if (s.demands.cols() != static_cast<Eigen::Index>(net.n())) {
    throw Error(ErrorCode::DimensionMismatch, "scenario demand columns != node count");
  }
  if (s.leak) {
    if (s.leak->node >= net.n() || net.node(s.leak->node).is_reservoir()) {
      throw Error(ErrorCode::InvalidAttribute, "leak node must be a junction");
    }
    if (s.leak->sizes.size() != s.demands.rows()) throw Error(ErrorCode::DimensionMismatch, "leak size series length");
    if ((s.leak->sizes.array() < 0.0).any()) throw Error(ErrorCode::InvalidAttribute, "negative leak size");
  }
}

}  // namespace

std::vector<HydraulicState> simulate_on(const Network& net, const Scenario& scenario, const SteadyStateOptions& opts) {
  validate(net, scenario);
  Rng rng(scenario.demand_seed);
  std::vector<HydraulicState> states;
  states.reserve(static_cast<std::size_t>(scenario.T()));
  for (int t = 0; t < scenario.T(); ++t) {
    Vector d = scenario.demands.row(t).transpose();
    for (std::size_t i : net.junctions()) {
      d(static_cast<Eigen::Index>(i)) *= 1.0 + rng.uniform(-scenario.noise.demand, scenario.noise.demand);
    }
    for (std::size_t r : net.reservoirs()) d(static_cast<Eigen::Index>(r)) = 0.0;
    if (scenario.leak) d(static_cast<Eigen::Index>(scenario.leak->node)) += scenario.leak->sizes(t);
    states.push_back(steady_state(net, d, opts));
  }
  return states;
}

SimulationResult simulate_scenario(const Network& net, const Scenario& scenario, const SteadyStateOptions& opts) {
  validate(net, scenario);
  Network perturbed = perturb_network(net, scenario.noise, scenario.seed);
  auto states = simulate_on(perturbed, scenario, opts);
  return SimulationResult{std::move(states), std::move(perturbed)};
}

MeasurementSet sample_sensors(const std::vector<HydraulicState>& states, const SensorLayout& layout) {
  MeasurementSet m{layout, {}, {}};
  for (const HydraulicState& s : states) {
    if (static_cast<std::size_t>(s.h.size()) != layout.n()) throw Error(ErrorCode::DimensionMismatch, "state size");
    m.pressure.push_back(layout.S_p() * s.h);
    m.demand.push_back(layout.S_d() * s.d);
  }
  return m;
}

}  // namespace fgll
