#include "fgll/wdn_factors.hpp"

#include "fgll/errors.hpp"
#include "fgll/hydraulics.hpp"

#include <fmt/format.h>

#include <cmath>

namespace fgll {

namespace {

SparseMatrix identity(std::size_t n) {
  SparseMatrix i(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  i.setIdentity();
  return i;
}

void require_size(const Vector& v, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(v.size()) != n) {
    throw Error(ErrorCode::DimensionMismatch, fmt::format("{}: expected {} entries, got {}", what, n, v.size()));
  }
}

}  // namespace

std::shared_ptr<const PipeModel> PipeModel::from(const Network& net) {
  auto model = std::make_shared<PipeModel>();
  model->n = net.n();
  model->tau.resize(static_cast<Eigen::Index>(net.m()));
  for (std::size_t k = 0; k < net.m(); ++k) {
    model->ends.emplace_back(net.pipe(k).source, net.pipe(k).sink);
    model->tau(static_cast<Eigen::Index>(k)) = resistance(net.pipe(k));
  }
  return model;
}

Vector delta_heads(const Interpolator& itp, const SensorLayout& layout, const Vector& hs_from, const Vector& hs_to) {
  require_size(hs_from, layout.n_s(), "delta_heads");
  require_size(hs_to, layout.n_s(), "delta_heads");
  const Vector measured = hs_to - hs_from;
  Vector delta = itp.interpolate(measured);
  const auto& sensed = layout.pressure_nodes();
  for (std::size_t s = 0; s < sensed.size(); ++s) {
    delta(static_cast<Eigen::Index>(sensed[s])) = measured(static_cast<Eigen::Index>(s));
  }
  return delta;
}

Vector delta_demands(const SensorLayout& layout, const Vector& ds_from, const Vector& ds_to) {
  require_size(ds_from, layout.n_d(), "delta_demands");
  require_size(ds_to, layout.n_d(), "delta_demands");
  return layout.S_d().transpose() * (ds_to - ds_from);
}

Vector temporal_residual(const Vector& x_from, const Vector& x_to, const Vector& delta) {
  if (x_from.size() != x_to.size() || x_to.size() != delta.size()) {
    throw Error(ErrorCode::DimensionMismatch, "temporal residual operands");
  }
  return x_to - x_from - delta;
}

FactorPtr make_temporal_factor(VariableKey from, VariableKey to, Vector delta, double variance, std::string label) {
  const auto n = static_cast<std::size_t>(delta.size());
  return std::make_shared<LinearFactor>(std::vector<VariableKey>{from, to},
                                        std::vector<SparseMatrix>{-identity(n), identity(n)}, std::move(delta),
                                        variance, std::move(label));
}

FactorPtr make_prior_factor(VariableKey to, const Vector& prior, const Vector& delta, double variance,
                            std::string label) {
  if (prior.size() != delta.size()) throw Error(ErrorCode::DimensionMismatch, "prior and delta sizes");
  return std::make_shared<LinearFactor>(std::vector<VariableKey>{to},
                                        std::vector<SparseMatrix>{identity(static_cast<std::size_t>(prior.size()))},
                                        prior + delta, variance, std::move(label));
}

Vector structural_target(const Interpolator& itp, const SensorLayout& layout, const Vector& h_s) {
  return layout.S_u() * itp.interpolate(h_s);
}

Vector structural_residual(const SensorLayout& layout, const Vector& h, const Vector& target) {
  require_size(h, layout.n(), "structural residual head");
  require_size(target, layout.n_u(), "structural residual target");
  return layout.S_u() * h - target;
}

FactorPtr make_structural_factor(VariableKey head, const SensorLayout& layout, Vector target, double variance,
                                 std::string label) {
  if (layout.n_u() == 0) return nullptr;
  require_size(target, layout.n_u(), "structural target");
  return std::make_shared<LinearFactor>(std::vector<VariableKey>{head}, std::vector<SparseMatrix>{layout.S_u()},
                                        std::move(target), variance, std::move(label));
}

Vector demand_measurement_residual(const SensorLayout& layout, const Vector& d, const Vector& d_s) {
  require_size(d, layout.n(), "demand measurement state");
  require_size(d_s, layout.n_d(), "demand measurement readings");
  return layout.S_d() * d - d_s;
}

FactorPtr make_demand_measurement_factor(VariableKey demand, const SensorLayout& layout, Vector d_s,
                                         double variance, std::string label) {
  if (layout.n_d() == 0) return nullptr;
  require_size(d_s, layout.n_d(), "demand readings");
  return std::make_shared<LinearFactor>(std::vector<VariableKey>{demand}, std::vector<SparseMatrix>{layout.S_d()},
                                        std::move(d_s), variance, std::move(label));
}

double zero_sum_residual(const Vector& d) { return d.sum(); }

FactorPtr make_zero_sum_factor(VariableKey demand, std::size_t n, double variance, std::string label) {
  SparseMatrix ones(1, static_cast<Eigen::Index>(n));
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t i = 0; i < n; ++i) t.emplace_back(0, static_cast<Eigen::Index>(i), 1.0);
  ones.setFromTriplets(t.begin(), t.end());
  return std::make_shared<LinearFactor>(std::vector<VariableKey>{demand}, std::vector<SparseMatrix>{ones},
                                        Vector::Zero(1), variance, std::move(label));
}

Vector demand_head_residual(const PipeModel& model, const Vector& d, const Vector& h) {
  require_size(d, model.n, "demand-head demand");
  require_size(h, model.n, "demand-head head");
  if (!d.allFinite() || !h.allFinite()) throw Error(ErrorCode::NonFinite, "demand-head input");
  Vector r = d;
  for (std::size_t k = 0; k < model.ends.size(); ++k) {
    const auto [src, snk] = model.ends[k];
    const double dh = h(static_cast<Eigen::Index>(src)) - h(static_cast<Eigen::Index>(snk));
    const double q = flow_law(std::abs(dh), model.tau(static_cast<Eigen::Index>(k)), model.nu).q;
    // B^T q: +q at the higher-head end, -q at the lower.
    const double f = dh >= 0.0 ? q : -q;
    r(static_cast<Eigen::Index>(src)) += f;
    r(static_cast<Eigen::Index>(snk)) -= f;
  }
  return r;
}

SparseMatrix demand_head_jacobian(const PipeModel& model, const Vector& h) {
  require_size(h, model.n, "demand-head head");
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(4 * model.ends.size());
  for (std::size_t k = 0; k < model.ends.size(); ++k) {
    const auto [src, snk] = model.ends[k];
    const auto a = static_cast<Eigen::Index>(src);
    const auto b = static_cast<Eigen::Index>(snk);
    const double c = flow_law(std::abs(h(a) - h(b)), model.tau(static_cast<Eigen::Index>(k)), model.nu).dq;
    t.emplace_back(a, a, c);
    t.emplace_back(b, b, c);
    t.emplace_back(a, b, -c);
    t.emplace_back(b, a, -c);
  }
  const auto n = static_cast<Eigen::Index>(model.n);
  SparseMatrix j(n, n);
  j.setFromTriplets(t.begin(), t.end());
  return j;
}

DemandHeadFactor::DemandHeadFactor(VariableKey demand, VariableKey head, std::shared_ptr<const PipeModel> model,
                                   double variance, std::string label)
    : Factor({demand, head}, model ? model->n : 0, variance, std::move(label)), model_(std::move(model)) {
  if (!model_) throw Error(ErrorCode::DimensionMismatch, "demand-head factor without a pipe model");
}

Vector DemandHeadFactor::residual(std::span<const Vector* const> values) const {
  return demand_head_residual(*model_, *values[0], *values[1]);
}

Linearization DemandHeadFactor::linearize(std::span<const Vector* const> values) const {
  return Linearization{residual(values), {identity(model_->n), demand_head_jacobian(*model_, *values[1])}};
}

Vector pressure_residual_residual(const Vector& l, const Vector& h, const Vector& h_bar) {
  if (l.size() != h.size() || h.size() != h_bar.size()) {
    throw Error(ErrorCode::DimensionMismatch, "pressure residual operands");
  }
  return l - (h - h_bar);
}

FactorPtr make_pressure_residual_factor(VariableKey leak, VariableKey head, const Vector& h_bar, double variance,
                                        std::string label) {
  const auto n = static_cast<std::size_t>(h_bar.size());
  // l - h + h_bar  ==  [I, -I] [l; h] - (-h_bar)
  return std::make_shared<LinearFactor>(std::vector<VariableKey>{leak, head},
                                        std::vector<SparseMatrix>{identity(n), -identity(n)}, -h_bar, variance,
                                        std::move(label));
}

Vector leak_constraint_residual(const Vector& l_from, const Vector& l_to) {
  if (l_from.size() != l_to.size()) throw Error(ErrorCode::DimensionMismatch, "leak constraint operands");
  return l_to - l_from;
}

FactorPtr make_leak_constraint_factor(VariableKey from, VariableKey to, std::size_t n, double variance,
                                      std::string label) {
  return std::make_shared<LinearFactor>(std::vector<VariableKey>{from, to},
                                        std::vector<SparseMatrix>{-identity(n), identity(n)},
                                        Vector::Zero(static_cast<Eigen::Index>(n)), variance, std::move(label));
}

}  // namespace fgll
