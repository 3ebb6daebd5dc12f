#pragma once

// Sparse factor-graph nonlinear least squares: variables are vector blocks
// keyed by (kind, instant); factors contribute whitened residuals
// ||r_i||^2 / sigma_i^2 and are minimized by batch Levenberg-Marquardt.

#include "fgll/network.hpp"

#include <compare>
#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fgll {

enum class VariableKind { Head, Demand, Leak };

struct VariableKey {
  VariableKind kind = VariableKind::Head;
  int instant = 0;

  auto operator<=>(const VariableKey&) const = default;
};

inline VariableKey head_key(int t) { return {VariableKind::Head, t}; }
inline VariableKey demand_key(int t) { return {VariableKind::Demand, t}; }
inline VariableKey leak_key(int t) { return {VariableKind::Leak, t}; }

std::string to_string(const VariableKey& key);

using Values = std::map<VariableKey, Vector>;

struct Linearization {
  Vector residual;
  std::vector<SparseMatrix> jacobians;  // one r x dim block per connected key
};

class Factor {
 public:
  Factor(std::vector<VariableKey> keys, std::size_t dim, double variance, std::string label);
  virtual ~Factor() = default;

  const std::vector<VariableKey>& keys() const { return keys_; }
  std::size_t dim() const { return dim_; }
  double variance() const { return variance_; }
  const std::string& label() const { return label_; }

  virtual bool is_affine() const { return false; }

  /// `values` holds one block per key, in key order.
  virtual Vector residual(std::span<const Vector* const> values) const = 0;
  virtual Linearization linearize(std::span<const Vector* const> values) const = 0;

 private:
  std::vector<VariableKey> keys_;
  std::size_t dim_;
  double variance_;
  std::string label_;
};

/// r = sum_k A_k x_k - b.
class LinearFactor : public Factor {
 public:
  LinearFactor(std::vector<VariableKey> keys, std::vector<SparseMatrix> blocks, Vector rhs, double variance,
               std::string label);

  bool is_affine() const override { return true; }
  Vector residual(std::span<const Vector* const> values) const override;
  Linearization linearize(std::span<const Vector* const> values) const override;

  const std::vector<SparseMatrix>& blocks() const { return blocks_; }
  const Vector& rhs() const { return rhs_; }

 private:
  std::vector<SparseMatrix> blocks_;
  Vector rhs_;
};

struct LinearSystem {
  SparseMatrix H;  // sum J^T J / sigma^2
  Vector g;        // sum J^T r / sigma^2
  double cost = 0.0;
};

class FactorGraph {
 public:
  void add_variable(VariableKey key, std::size_t dim);
  void add_factor(std::shared_ptr<const Factor> factor);

  bool has_variable(const VariableKey& key) const { return index_.contains(key); }
  std::size_t variable_dim(const VariableKey& key) const;
  /// Variables in insertion order, which is also the elimination order.
  const std::vector<VariableKey>& variables() const { return order_; }
  std::size_t variable_count() const { return order_.size(); }
  std::size_t scalar_count() const { return total_dim_; }

  std::size_t factor_count() const { return factors_.size(); }
  const Factor& factor(std::size_t i) const { return *factors_.at(i); }

  /// Total whitened cost sum ||r_i||^2 / sigma_i^2.
  double cost(const Values& values) const;
  /// Assembles the Gauss-Newton system at `values`. Throws NumericalFault
  /// on a non-finite residual or Jacobian entry.
  LinearSystem linearize(const Values& values) const;

  bool all_affine() const;

  /// Offset of each variable in the stacked scalar vector.
  std::size_t offset(const VariableKey& key) const;
  Vector stack(const Values& values) const;
  Values unstack(const Vector& x) const;

 private:
  void check_values(const Values& values) const;
  std::vector<const Vector*> gather(const Factor& f, const Values& values) const;

  std::vector<VariableKey> order_;
  std::map<VariableKey, std::size_t> index_;
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> offsets_;
  std::size_t total_dim_ = 0;
  std::vector<std::shared_ptr<const Factor>> factors_;
};

struct LmOptions {
  int max_iterations = 100;
  double cost_tolerance = 1e-9;      // relative cost decrease
  double lm_initial_damping = 1e-4;  // lambda, applied as lambda * diag(H)
};

struct Estimate {
  Values values;
  double cost = 0.0;
};

struct OptimizeResult {
  Estimate estimate;
  int iterations = 0;
  bool converged = false;
  std::vector<double> accepted_costs;  // initial cost first
};

/// Batch Levenberg-Marquardt. Graphs made only of affine factors are solved
/// with a single undamped Gauss-Newton step. Throws SingularSystem when a
/// variable block is not constrained by any factor and NonFinite when the
/// initial cost is not finite.
OptimizeResult optimize(const FactorGraph& graph, const Values& init, const LmOptions& opts = {});

/// Value hand-off of a converged block to seed the next window's prior.
Vector marginal_prior(const Estimate& estimate, const VariableKey& key);

/// Matrix-Market coordinate text (general, real).
std::string to_matrix_market(const SparseMatrix& matrix);

}  // namespace fgll
