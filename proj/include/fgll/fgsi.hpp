#pragma once

#include "fgll/network.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCholesky>

#include <memory>

namespace fgll {

/// Closed-form graph interpolation of nodal heads from the pressure-sensed
/// subset: h = (mu L D^-2 L + S_p^T S_p)^-1 S_p^T h_s = P_s h_s.
///
/// The sparse factorization of the system matrix is computed once and shared;
/// interpolate() is const and safe to call concurrently.
class Interpolator {
 public:
  /// Throws SingularSystem when the system matrix is not positive definite
  /// (e.g. mu_L = 0 with unsensed nodes).
  Interpolator(const StructMatrices& structure, const SensorLayout& layout, double mu_L);

  double mu_L() const { return mu_L_; }
  std::size_t n() const { return n_; }
  std::size_t n_s() const { return n_s_; }
  const SparseMatrix& system_matrix() const { return system_; }
  const SparseMatrix& S_p() const { return s_p_; }

  /// h = P_s h_s.
  Vector interpolate(const Vector& h_s) const;

  /// Dense P_s, materialized column by column.
  Eigen::MatrixXd matrix() const;

 private:
  using Factorization = Eigen::SimplicialLDLT<SparseMatrix>;

  std::size_t n_;
  std::size_t n_s_;
  double mu_L_;
  SparseMatrix system_;
  SparseMatrix s_p_;
  std::shared_ptr<const Factorization> factorization_;
};

}  // namespace fgll
