#include "fgll/fgsi.hpp"

#include "fgll/errors.hpp"

#include <fmt/format.h>

#include <cmath>

namespace fgll {

Interpolator::Interpolator(const StructMatrices& structure, const SensorLayout& layout, double mu_L)
    : n_(layout.n()), n_s_(layout.n_s()), mu_L_(mu_L), s_p_(layout.S_p()) {
  if (n_s_ == 0) throw Error(ErrorCode::InvalidLayout, "interpolation needs at least one pressure sensor");
  if (!(mu_L >= 0.0) || !std::isfinite(mu_L)) throw Error(ErrorCode::InvalidConfig, "mu_L must be >= 0");
  if (static_cast<std::size_t>(structure.L.rows()) != n_) {
    throw Error(ErrorCode::DimensionMismatch, "layout and structure disagree on node count");
  }

  const Vector inv_deg_sq = structure.degree.cwiseInverse().cwiseAbs2();
  const SparseMatrix smoothing = structure.L * inv_deg_sq.asDiagonal() * structure.L;
  system_ = mu_L * smoothing + SparseMatrix(s_p_.transpose() * s_p_);
  system_.makeCompressed();

  auto factorization = std::make_shared<Factorization>(system_);
  if (factorization->info() != Eigen::Success) {
    throw Error(ErrorCode::SingularSystem, "FGSI system matrix factorization failed");
  }
  // Relative pivot test: a vanishing pivot means an unsensed component is
  // left unconstrained.
  const Vector pivots = factorization->vectorD();
  const double scale = system_.diagonal().cwiseAbs().maxCoeff();
  if (pivots.minCoeff() <= 1e-14 * scale) {
    throw Error(ErrorCode::SingularSystem,
                fmt::format("FGSI system matrix is singular (min pivot {:.3e}, mu_L={})", pivots.minCoeff(), mu_L));
  }
  factorization_ = std::move(factorization);
}

Vector Interpolator::interpolate(const Vector& h_s) const {
  if (static_cast<std::size_t>(h_s.size()) != n_s_) {
    throw Error(ErrorCode::DimensionMismatch, fmt::format("expected {} sensor values, got {}", n_s_, h_s.size()));
  }
  return factorization_->solve(s_p_.transpose() * h_s);
}

Eigen::MatrixXd Interpolator::matrix() const {
  Eigen::MatrixXd p(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_s_));
  for (Eigen::Index c = 0; c < p.cols(); ++c) p.col(c) = interpolate(Vector::Unit(p.cols(), c));
  return p;
}

}  // namespace fgll
