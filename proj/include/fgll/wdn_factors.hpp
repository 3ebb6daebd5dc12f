#pragma once

// Water-network factor families used by the estimation and localization
// graphs. Linear families are LinearFactor instances; the demand-head
// relation is the only nonlinear factor.

#include "fgll/factor_graph.hpp"
#include "fgll/fgsi.hpp"
#include "fgll/network.hpp"

#include <memory>
#include <utility>
#include <vector>

namespace fgll {

/// Isotropic variance (sigma^2) per factor family.
struct NoiseVariances {
  double temporal = 1e-12;
  double structural = 1e-4;
  double demand_head = 1e-12;
  double pressure_residual = 1e-3;
  double leak_localization = 1e-5;
  double demand_measurement = 1e-4;
  double zero_sum = 1e-12;

  bool operator==(const NoiseVariances&) const = default;
};

/// Pipe endpoints and resistances, shared read-only by demand-head factors.
struct PipeModel {
  std::size_t n = 0;
  std::vector<std::pair<std::size_t, std::size_t>> ends;  // stored (source, sink)
  Vector tau;
  double nu = kFlowExponent;

  static std::shared_ptr<const PipeModel> from(const Network& net);
};

using FactorPtr = std::shared_ptr<const Factor>;

// Temporal evolution -------------------------------------------------------

/// delta_h = P_s (h_s1 - h_s0) with the sensed rows replaced by the raw
/// measured difference.
Vector delta_heads(const Interpolator& itp, const SensorLayout& layout, const Vector& hs_from, const Vector& hs_to);
/// Zero except the measured differences at demand-sensed nodes.
Vector delta_demands(const SensorLayout& layout, const Vector& ds_from, const Vector& ds_to);

/// r = x_to - x_from - delta.
Vector temporal_residual(const Vector& x_from, const Vector& x_to, const Vector& delta);
FactorPtr make_temporal_factor(VariableKey from, VariableKey to, Vector delta, double variance, std::string label);
/// Unary form anchored at a fixed prior: r = x_to - prior - delta.
FactorPtr make_prior_factor(VariableKey to, const Vector& prior, const Vector& delta, double variance,
                            std::string label);

// Structural evolution -----------------------------------------------------

/// S_u P_s h_s.
Vector structural_target(const Interpolator& itp, const SensorLayout& layout, const Vector& h_s);
/// r = S_u h - S_u P_s h_s.
Vector structural_residual(const SensorLayout& layout, const Vector& h, const Vector& target);
/// Returns nullptr when every node is pressure sensed.
FactorPtr make_structural_factor(VariableKey head, const SensorLayout& layout, Vector target, double variance,
                                 std::string label);

// Demand measurements and zero-sum -----------------------------------------

/// r = S_d d - d_s.
Vector demand_measurement_residual(const SensorLayout& layout, const Vector& d, const Vector& d_s);
/// Returns nullptr when there are no demand sensors.
FactorPtr make_demand_measurement_factor(VariableKey demand, const SensorLayout& layout, Vector d_s,
                                         double variance, std::string label);

/// r = 1^T d over the full demand vector.
double zero_sum_residual(const Vector& d);
FactorPtr make_zero_sum_factor(VariableKey demand, std::size_t n, double variance, std::string label);

// Demand-head relation -----------------------------------------------------

/// r = d + B(h)^T (T^-1 B(h) h)^(1/nu).
Vector demand_head_residual(const PipeModel& model, const Vector& d, const Vector& h);
/// J_h = B^T diag(dq/d(Bh)) B with B taken at h (J_d = I).
SparseMatrix demand_head_jacobian(const PipeModel& model, const Vector& h);

class DemandHeadFactor : public Factor {
 public:
  DemandHeadFactor(VariableKey demand, VariableKey head, std::shared_ptr<const PipeModel> model, double variance,
                   std::string label);

  Vector residual(std::span<const Vector* const> values) const override;
  Linearization linearize(std::span<const Vector* const> values) const override;

 private:
  std::shared_ptr<const PipeModel> model_;
};

// Localization -------------------------------------------------------------

/// r = l - (h - h_bar).
Vector pressure_residual_residual(const Vector& l, const Vector& h, const Vector& h_bar);
FactorPtr make_pressure_residual_factor(VariableKey leak, VariableKey head, const Vector& h_bar, double variance,
                                        std::string label);

/// r = l_to - l_from.
Vector leak_constraint_residual(const Vector& l_from, const Vector& l_to);
FactorPtr make_leak_constraint_factor(VariableKey from, VariableKey to, std::size_t n, double variance,
                                      std::string label);

}  // namespace fgll
