#include "fgll/factor_graph.hpp"

#include "fgll/errors.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>
#include <fmt/format.h>

#include <cmath>
#include <limits>

namespace fgll {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;
using Ldlt = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>>;

// Pivots of the unit-diagonal scaled system below this are treated as rank
// deficiency.
constexpr double kPivotTolerance = 1e-13;
constexpr double kMaxDamping = 1e16;

bool all_finite(const SparseMatrix& m) {
  for (Eigen::Index c = 0; c < m.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(m, c); it; ++it) {
      if (!std::isfinite(it.value())) return false;
    }
  }
  return true;
}

// J_a^T J_b / sigma^2 scattered at (row_offset, col_offset).
void scatter_product(const SparseMatrix& ja, const SparseMatrix& jb, double weight, std::size_t row_offset,
                     std::size_t col_offset, Triplets& out) {
  const SparseMatrix block = (SparseMatrix(ja.transpose()) * jb).pruned();
  for (Eigen::Index c = 0; c < block.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(block, c); it; ++it) {
      out.emplace_back(static_cast<Eigen::Index>(row_offset) + it.row(),
                       static_cast<Eigen::Index>(col_offset) + it.col(), weight * it.value());
    }
  }
}

struct Scaling {
  Vector inv_sqrt_diag;
};

// Symmetric Jacobi scaling so the damped system has unit diagonal; damping
// lambda * diag(H) becomes lambda * I in scaled coordinates.
Scaling jacobi_scaling(const SparseMatrix& h, const FactorGraph& graph) {
  const Vector diag = h.diagonal();
  Scaling s;
  s.inv_sqrt_diag.resize(diag.size());
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    if (!(diag(i) > 0.0)) {
      // Locate the owning variable for the diagnostic.
      std::string name = "?";
      for (const VariableKey& key : graph.variables()) {
        const auto off = static_cast<Eigen::Index>(graph.offset(key));
        if (i >= off && i < off + static_cast<Eigen::Index>(graph.variable_dim(key))) name = to_string(key);
      }
      throw Error(ErrorCode::SingularSystem,
                  fmt::format("variable {} component {} is not constrained by any factor", name, i));
    }
    s.inv_sqrt_diag(i) = 1.0 / std::sqrt(diag(i));
  }
  return s;
}

SparseMatrix scaled(const SparseMatrix& h, const Scaling& s, double lambda) {
  SparseMatrix a = s.inv_sqrt_diag.asDiagonal() * h * s.inv_sqrt_diag.asDiagonal();
  if (lambda > 0.0) {
    SparseMatrix damping(a.rows(), a.cols());
    damping.setIdentity();
    a += lambda * damping;
  }
  return a;
}

// Solves (H + lambda diag(H)) dx = -g. Returns false when the factorization
// fails or reports a vanishing pivot.
bool solve_step(const SparseMatrix& h, const Vector& g, const Scaling& s, double lambda, Vector& dx) {
  Ldlt ldlt(scaled(h, s, lambda));
  if (ldlt.info() != Eigen::Success) return false;
  const Vector pivots = ldlt.vectorD();
  if (pivots.size() > 0 && pivots.minCoeff() < kPivotTolerance) return false;
  const Vector y = ldlt.solve(-(s.inv_sqrt_diag.asDiagonal() * g));
  if (ldlt.info() != Eigen::Success || !y.allFinite()) return false;
  dx = s.inv_sqrt_diag.asDiagonal() * y;
  return true;
}

}  // namespace

std::string to_string(const VariableKey& key) {
  const char* kind = key.kind == VariableKind::Head ? "h" : key.kind == VariableKind::Demand ? "d" : "l";
  return fmt::format("{}[{}]", kind, key.instant);
}

Factor::Factor(std::vector<VariableKey> keys, std::size_t dim, double variance, std::string label)
    : keys_(std::move(keys)), dim_(dim), variance_(variance), label_(std::move(label)) {
  if (!(variance_ > 0.0) || !std::isfinite(variance_)) {
    throw Error(ErrorCode::InvalidConfig, fmt::format("factor '{}' variance must be positive", label_));
  }
  if (keys_.empty()) throw Error(ErrorCode::DimensionMismatch, fmt::format("factor '{}' has no keys", label_));
}

LinearFactor::LinearFactor(std::vector<VariableKey> keys, std::vector<SparseMatrix> blocks, Vector rhs,
                           double variance, std::string label)
    : Factor(std::move(keys), static_cast<std::size_t>(rhs.size()), variance, std::move(label)),
      blocks_(std::move(blocks)),
      rhs_(std::move(rhs)) {
  if (blocks_.size() != this->keys().size()) {
    throw Error(ErrorCode::DimensionMismatch, fmt::format("factor '{}': one block per key required", this->label()));
  }
  for (const SparseMatrix& b : blocks_) {
    if (b.rows() != rhs_.size()) {
      throw Error(ErrorCode::DimensionMismatch, fmt::format("factor '{}': block rows != residual size", this->label()));
    }
  }
}

Vector LinearFactor::residual(std::span<const Vector* const> values) const {
  Vector r = -rhs_;
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    if (values[k]->size() != blocks_[k].cols()) {
      throw Error(ErrorCode::DimensionMismatch, fmt::format("factor '{}': block {} size", label(), k));
    }
    r += blocks_[k] * *values[k];
  }
  return r;
}

Linearization LinearFactor::linearize(std::span<const Vector* const> values) const {
  return Linearization{residual(values), blocks_};
}

void FactorGraph::add_variable(VariableKey key, std::size_t dim) {
  if (index_.contains(key)) throw Error(ErrorCode::DuplicateVariable, to_string(key));
  index_.emplace(key, order_.size());
  order_.push_back(key);
  dims_.push_back(dim);
  offsets_.push_back(total_dim_);
  total_dim_ += dim;
}

void FactorGraph::add_factor(std::shared_ptr<const Factor> factor) {
  if (!factor) throw Error(ErrorCode::DimensionMismatch, "null factor");
  for (const VariableKey& key : factor->keys()) {
    if (!index_.contains(key)) {
      throw Error(ErrorCode::UnknownVariable, fmt::format("factor '{}' references {}", factor->label(), to_string(key)));
    }
  }
  factors_.push_back(std::move(factor));
}

std::size_t FactorGraph::variable_dim(const VariableKey& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) throw Error(ErrorCode::UnknownVariable, to_string(key));
  return dims_[it->second];
}

std::size_t FactorGraph::offset(const VariableKey& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) throw Error(ErrorCode::UnknownVariable, to_string(key));
  return offsets_[it->second];
}

bool FactorGraph::all_affine() const {
  for (const auto& f : factors_) {
    if (!f->is_affine()) return false;
  }
  return true;
}

void FactorGraph::check_values(const Values& values) const {
  for (std::size_t v = 0; v < order_.size(); ++v) {
    auto it = values.find(order_[v]);
    if (it == values.end()) throw Error(ErrorCode::UnknownVariable, "no value for " + to_string(order_[v]));
    if (static_cast<std::size_t>(it->second.size()) != dims_[v]) {
      throw Error(ErrorCode::DimensionMismatch, "value size for " + to_string(order_[v]));
    }
  }
}

std::vector<const Vector*> FactorGraph::gather(const Factor& f, const Values& values) const {
  std::vector<const Vector*> blocks;
  blocks.reserve(f.keys().size());
  for (const VariableKey& key : f.keys()) blocks.push_back(&values.at(key));
  return blocks;
}

Vector FactorGraph::stack(const Values& values) const {
  check_values(values);
  Vector x(static_cast<Eigen::Index>(total_dim_));
  for (std::size_t v = 0; v < order_.size(); ++v) {
    x.segment(static_cast<Eigen::Index>(offsets_[v]), static_cast<Eigen::Index>(dims_[v])) = values.at(order_[v]);
  }
  return x;
}

Values FactorGraph::unstack(const Vector& x) const {
  Values values;
  for (std::size_t v = 0; v < order_.size(); ++v) {
    values.emplace(order_[v], x.segment(static_cast<Eigen::Index>(offsets_[v]), static_cast<Eigen::Index>(dims_[v])));
  }
  return values;
}

double FactorGraph::cost(const Values& values) const {
  check_values(values);
  double total = 0.0;
  for (const auto& f : factors_) {
    const auto blocks = gather(*f, values);
    total += f->residual(blocks).squaredNorm() / f->variance();
  }
  return total;
}

LinearSystem FactorGraph::linearize(const Values& values) const {
  check_values(values);
  const auto n = static_cast<Eigen::Index>(total_dim_);
  LinearSystem sys;
  sys.g = Vector::Zero(n);
  Triplets triplets;

  for (std::size_t fi = 0; fi < factors_.size(); ++fi) {
    const Factor& f = *factors_[fi];
    const auto blocks = gather(f, values);
    Linearization lin = f.linearize(blocks);
    if (!lin.residual.allFinite()) {
      throw Error(ErrorCode::NumericalFault, fmt::format("factor #{} '{}' residual", fi, f.label()));
    }
    if (lin.jacobians.size() != f.keys().size()) {
      throw Error(ErrorCode::DimensionMismatch, fmt::format("factor '{}' jacobian count", f.label()));
    }
    for (const SparseMatrix& j : lin.jacobians) {
      if (!all_finite(j)) throw Error(ErrorCode::NumericalFault, fmt::format("factor #{} '{}' jacobian", fi, f.label()));
    }
    const double weight = 1.0 / f.variance();
    sys.cost += lin.residual.squaredNorm() * weight;
    for (std::size_t a = 0; a < f.keys().size(); ++a) {
      const std::size_t off_a = offset(f.keys()[a]);
      sys.g.segment(static_cast<Eigen::Index>(off_a), lin.jacobians[a].cols()) +=
          weight * (lin.jacobians[a].transpose() * lin.residual);
      for (std::size_t b = 0; b < f.keys().size(); ++b) {
        scatter_product(lin.jacobians[a], lin.jacobians[b], weight, off_a, offset(f.keys()[b]), triplets);
      }
    }
  }
  sys.H.resize(n, n);
  sys.H.setFromTriplets(triplets.begin(), triplets.end());
  sys.H.makeCompressed();
  return sys;
}

OptimizeResult optimize(const FactorGraph& graph, const Values& init, const LmOptions& opts) {
  OptimizeResult result;
  Values x = init;
  for (auto it = x.begin(); it != x.end();) {
    it = graph.has_variable(it->first) ? std::next(it) : x.erase(it);
  }
  LinearSystem sys = graph.linearize(x);
  double cost = sys.cost;
  if (!std::isfinite(cost)) throw Error(ErrorCode::NonFinite, "initial cost is not finite");
  result.accepted_costs.push_back(cost);

  Scaling scaling = jacobi_scaling(sys.H, graph);
  Vector dx;
  if (!solve_step(sys.H, sys.g, scaling, 0.0, dx)) {
    throw Error(ErrorCode::SingularSystem, "normal equations are rank deficient (unconstrained gauge freedom)");
  }

  auto apply = [&graph](const Values& base, const Vector& step) {
    return graph.unstack(graph.stack(base) + step);
  };

  if (graph.all_affine()) {
    // The undamped step already lands on the minimizer.
    Values next = apply(x, dx);
    const double next_cost = graph.cost(next);
    if (!std::isfinite(next_cost)) throw Error(ErrorCode::NonFinite, "cost after Gauss-Newton step");
    result.iterations = 1;
    result.converged = true;
    result.estimate = Estimate{std::move(next), next_cost};
    result.accepted_costs.push_back(next_cost);
    return result;
  }

  double lambda = opts.lm_initial_damping;
  for (int it = 0; it < opts.max_iterations; ++it) {
    if (cost == 0.0) {
      result.converged = true;
      break;
    }
    ++result.iterations;
    if (!solve_step(sys.H, sys.g, scaling, lambda, dx)) {
      lambda *= 10.0;
      if (lambda > kMaxDamping) throw Error(ErrorCode::SingularSystem, "damped system could not be factorized");
      continue;
    }
    // Predicted reduction of the quadratic model; a negligible value means
    // the current point is already stationary.
    const double predicted = -(2.0 * sys.g.dot(dx) + dx.dot(sys.H * dx));
    if (predicted <= opts.cost_tolerance * cost * 1e-3) {
      result.converged = true;
      break;
    }
    Values next = apply(x, dx);
    const double next_cost = graph.cost(next);
    if (std::isfinite(next_cost) && next_cost <= cost) {
      const double relative = (cost - next_cost) / cost;
      x = std::move(next);
      cost = next_cost;
      result.accepted_costs.push_back(cost);
      lambda *= 0.5;
      if (relative < opts.cost_tolerance) {
        result.converged = true;
        break;
      }
      sys = graph.linearize(x);
      scaling = jacobi_scaling(sys.H, graph);
    } else {
      lambda *= 10.0;
      if (lambda > kMaxDamping) {
        result.converged = true;  // no descent direction left at this precision
        break;
      }
    }
  }
  result.estimate = Estimate{std::move(x), cost};
  return result;
}

Vector marginal_prior(const Estimate& estimate, const VariableKey& key) {
  if (estimate.values.empty()) throw Error(ErrorCode::UnknownVariable, "empty estimate");
  auto it = estimate.values.find(key);
  if (it == estimate.values.end()) throw Error(ErrorCode::UnknownVariable, to_string(key));
  return it->second;
}

std::string to_matrix_market(const SparseMatrix& matrix) {
  std::string out = "%%MatrixMarket matrix coordinate real general\n";
  out += fmt::format("{} {} {}\n", matrix.rows(), matrix.cols(), matrix.nonZeros());
  for (Eigen::Index c = 0; c < matrix.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(matrix, c); it; ++it) {
      out += fmt::format("{} {} {}\n", it.row() + 1, it.col() + 1, it.value());
    }
  }
  return out;
}

}  // namespace fgll
