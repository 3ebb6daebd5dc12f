#include "fgll/pipeline.hpp"

#include "fgll/errors.hpp"
#include "fgll/wdn_factors.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace fgll {

namespace {

void check_measurements(const EstimationModel& model, const MeasurementSet& m) {
  if (!(m.layout == model.layout())) throw Error(ErrorCode::InvalidLayout, "measurement layout differs from model");
  if (m.demand.size() != m.pressure.size()) throw Error(ErrorCode::MissingReading, "pressure and demand lengths differ");
  for (std::size_t t = 0; t < m.T(); ++t) {
    if (static_cast<std::size_t>(m.pressure[t].size()) != m.layout.n_s() ||
        static_cast<std::size_t>(m.demand[t].size()) != m.layout.n_d()) {
      throw Error(ErrorCode::MissingReading, fmt::format("incomplete readings at instant {}", t));
    }
    if (!m.pressure[t].allFinite() || !m.demand[t].allFinite()) {
      throw Error(ErrorCode::NonFinite, fmt::format("non-finite reading at instant {}", t));
    }
  }
  if (m.T() < 2) throw Error(ErrorCode::WindowTooShort, fmt::format("window has {} instant(s), need 2", m.T()));
}

MeasurementSet slice(const MeasurementSet& m, std::size_t begin, std::size_t end) {
  return MeasurementSet{m.layout, {m.pressure.begin() + static_cast<std::ptrdiff_t>(begin),
                                   m.pressure.begin() + static_cast<std::ptrdiff_t>(end)},
                        {m.demand.begin() + static_cast<std::ptrdiff_t>(begin),
                         m.demand.begin() + static_cast<std::ptrdiff_t>(end)}};
}

SeriesEstimate collect(const OptimizeResult& r, std::size_t T) {
  SeriesEstimate s;
  for (std::size_t t = 1; t <= T; ++t) {
    s.h.push_back(r.estimate.values.at(head_key(static_cast<int>(t))));
    s.d.push_back(r.estimate.values.at(demand_key(static_cast<int>(t))));
  }
  s.iterations = r.iterations;
  s.converged = r.converged;
  s.cost = r.estimate.cost;
  return s;
}

}  // namespace

EstimationModel::EstimationModel(const Network& net, const SensorLayout& layout, double mu_L)
    : net_(&net),
      layout_(layout),
      interpolator_(struct_matrices(net), layout, mu_L),
      pipes_(PipeModel::from(net)) {}

Vector default_prior(const EstimationModel& model, const MeasurementSet& m) {
  if (m.T() == 0) throw Error(ErrorCode::WindowTooShort, "no instants");
  return model.interpolator().interpolate(m.pressure.front());
}

void add_estimation_factors(FactorGraph& graph, Values& init, const EstimationModel& model,
                            const MeasurementSet& m, const Vector& h0, const NoiseVariances& noise) {
  const SensorLayout& layout = model.layout();
  const Interpolator& itp = model.interpolator();
  const std::size_t n = layout.n();
  if (static_cast<std::size_t>(h0.size()) != n) {
    throw Error(ErrorCode::DimensionMismatch, fmt::format("prior has {} entries, network has {}", h0.size(), n));
  }
  const int T = static_cast<int>(m.T());
  for (int t = 1; t <= T; ++t) {
    graph.add_variable(head_key(t), n);
    graph.add_variable(demand_key(t), n);
    init[head_key(t)] = itp.interpolate(m.pressure[static_cast<std::size_t>(t - 1)]);
    init[demand_key(t)] = layout.S_d().transpose() * m.demand[static_cast<std::size_t>(t - 1)];
  }

  const Vector h0_sensed = layout.S_p() * h0;
  graph.add_factor(make_prior_factor(head_key(1), h0, delta_heads(itp, layout, h0_sensed, m.pressure[0]),
                                     noise.temporal, "prior h[1]"));
  for (int t = 1; t <= T; ++t) {
    const auto i = static_cast<std::size_t>(t - 1);
    if (t > 1) {
      graph.add_factor(make_temporal_factor(head_key(t - 1), head_key(t),
                                            delta_heads(itp, layout, m.pressure[i - 1], m.pressure[i]),
                                            noise.temporal, fmt::format("temporal h[{}]", t)));
      graph.add_factor(make_temporal_factor(demand_key(t - 1), demand_key(t),
                                            delta_demands(layout, m.demand[i - 1], m.demand[i]), noise.temporal,
                                            fmt::format("temporal d[{}]", t)));
    }
    if (auto f = make_structural_factor(head_key(t), layout, structural_target(itp, layout, m.pressure[i]),
                                        noise.structural, fmt::format("structural h[{}]", t))) {
      graph.add_factor(std::move(f));
    }
    if (auto f = make_demand_measurement_factor(demand_key(t), layout, m.demand[i], noise.demand_measurement,
                                                fmt::format("demand d[{}]", t))) {
      graph.add_factor(std::move(f));
    }
    graph.add_factor(make_zero_sum_factor(demand_key(t), n, noise.zero_sum, fmt::format("zero-sum d[{}]", t)));
    graph.add_factor(std::make_shared<DemandHeadFactor>(demand_key(t), head_key(t), model.pipes(), noise.demand_head,
                                                        fmt::format("demand-head [{}]", t)));
  }
}

SeriesEstimate estimate_leak_free(const EstimationModel& model, const MeasurementSet& m, const Vector& h0,
                                  const RunConfig& config) {
  check_measurements(model, m);
  FactorGraph graph;
  Values init;
  add_estimation_factors(graph, init, model, m, h0, config.noise);
  return collect(optimize(graph, init, config.solver), m.T());
}

SeriesEstimate estimate_windowed(const EstimationModel& model, const MeasurementSet& m, const Vector& h0,
                                 const RunConfig& config) {
  check_measurements(model, m);
  const auto W = static_cast<std::size_t>(config.window_T);
  SeriesEstimate out;
  out.converged = true;
  Vector prior = h0;
  std::size_t begin = 0;
  while (begin < m.T()) {
    std::size_t end = std::min(begin + W, m.T());
    // Fold a trailing single instant into the previous window.
    if (m.T() - end == 1) ++end;
    SeriesEstimate w = estimate_leak_free(model, slice(m, begin, end), prior, config);
    prior = w.h.back();
    out.h.insert(out.h.end(), w.h.begin(), w.h.end());
    out.d.insert(out.d.end(), w.d.begin(), w.d.end());
    out.iterations += w.iterations;
    out.converged = out.converged && w.converged;
    out.cost += w.cost;
    begin = end;
  }
  return out;
}

LocalizationResult localize(const EstimationModel& model, const MeasurementSet& leak, const std::vector<Vector>& h_bar,
                            const Vector& h0, const RunConfig& config) {
  if (h_bar.size() != leak.T()) {
    throw Error(ErrorCode::WindowMismatch,
                fmt::format("leak window has {} instants, leak-free estimate has {}", leak.T(), h_bar.size()));
  }
  check_measurements(model, leak);
  const std::size_t n = model.layout().n();
  const int T = static_cast<int>(leak.T());

  FactorGraph graph;
  Values init;
  add_estimation_factors(graph, init, model, leak, h0, config.noise);
  for (int t = 1; t <= T; ++t) {
    const Vector& hb = h_bar[static_cast<std::size_t>(t - 1)];
    if (static_cast<std::size_t>(hb.size()) != n) throw Error(ErrorCode::DimensionMismatch, "leak-free head size");
    graph.add_variable(leak_key(t), n);
    init[leak_key(t)] = Vector::Zero(static_cast<Eigen::Index>(n));
    graph.add_factor(make_pressure_residual_factor(leak_key(t), head_key(t), hb, config.noise.pressure_residual,
                                                   fmt::format("pressure residual [{}]", t)));
    if (t > 1) {
      graph.add_factor(make_leak_constraint_factor(leak_key(t - 1), leak_key(t), n, config.noise.leak_localization,
                                                   fmt::format("leak constraint [{}]", t)));
    }
  }

  const OptimizeResult r = optimize(graph, init, config.solver);
  LocalizationResult out;
  out.heads = collect(r, leak.T());
  for (int t = 1; t <= T; ++t) out.leak.push_back(r.estimate.values.at(leak_key(t)));
  out.metric = localization_metric(out.leak.front());
  CandidateSet c = select_candidates(out.metric);
  out.candidates = std::move(c.nodes);
  out.threshold = c.threshold;
  return out;
}

Vector localization_metric(const Vector& l0) {
  if (l0.size() == 0) return l0;
  const double hi = l0.maxCoeff();
  const double lo = l0.minCoeff();
  if (!(hi - lo > kLeakResolution)) return Vector::Zero(l0.size());
  return ((hi - l0.array()) / (hi - lo)).matrix();
}

std::pair<double, double> mean_std(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / n)};
}

CandidateSet select_candidates(const Vector& metric) {
  CandidateSet out;
  if (metric.size() == 0) return out;
  const auto [mean, sd] = mean_std(std::vector<double>(metric.data(), metric.data() + metric.size()));
  out.threshold = mean + sd;
  if (metric.maxCoeff() == metric.minCoeff()) return out;
  for (Eigen::Index i = 0; i < metric.size(); ++i) {
    if (metric(i) >= out.threshold) out.nodes.push_back(static_cast<std::size_t>(i));
  }
  return out;
}

LcsmResult lcsm(const Vector& leak, const Vector& leak_free) {
  if (leak.size() != leak_free.size()) throw Error(ErrorCode::DimensionMismatch, "lcsm operand sizes");
  LcsmResult out;
  const Eigen::Index n = leak.size();
  out.distance = Vector::Zero(n);
  if (n == 0) return out;
  const double cx = leak_free.mean();
  const double cy = leak.mean();
  const Vector x = leak_free.array() - cx;
  const Vector y = leak.array() - cy;
  Eigen::Matrix2d cov;
  cov << x.dot(x), x.dot(y), x.dot(y), y.dot(y);
  if (cov.trace() == 0.0) return out;  // all points coincide
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  // Eigenvalues ascend: the first eigenvector is the line normal.
  const Eigen::Vector2d normal = eig.eigenvectors().col(0);
  out.distance = (normal(0) * x + normal(1) * y).cwiseAbs();
  out.candidates = select_candidates(out.distance);
  return out;
}

double rmse(const Vector& x, const Vector& x_hat) {
  if (x.size() != x_hat.size()) throw Error(ErrorCode::DimensionMismatch, "rmse operand sizes");
  if (x.size() == 0) return 0.0;
  return std::sqrt((x - x_hat).squaredNorm() / static_cast<double>(x.size()));
}

std::vector<std::size_t> rank_nodes(const Vector& score) {
  std::vector<std::size_t> order(static_cast<std::size_t>(score.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return score(static_cast<Eigen::Index>(a)) > score(static_cast<Eigen::Index>(b));
  });
  return order;
}

DistanceSummary ranking_distances(const PipeDistances& dist, const Vector& score, std::size_t true_node) {
  if (true_node >= dist.size()) throw Error(ErrorCode::UnknownNode, fmt::format("node index {}", true_node));
  if (static_cast<std::size_t>(score.size()) != dist.size()) {
    throw Error(ErrorCode::DimensionMismatch, "score length differs from node count");
  }
  if (score.size() == 0 || score.maxCoeff() == score.minCoeff()) {
    throw Error(ErrorCode::EmptyRanking, "metric is constant; no ranking");
  }
  const auto order = rank_nodes(score);
  DistanceSummary s;
  const PipeDistance& best = dist(true_node, order.front());
  s.best_km = best.km;
  s.best_pipes = static_cast<double>(best.pipes);
  const std::size_t k = std::min<std::size_t>(5, order.size());
  for (std::size_t i = 0; i < k; ++i) {
    const PipeDistance& d = dist(true_node, order[i]);
    s.avg5_km += d.km;
    s.avg5_pipes += static_cast<double>(d.pipes);
  }
  s.avg5_km /= static_cast<double>(k);
  s.avg5_pipes /= static_cast<double>(k);
  return s;
}

EvaluationReport evaluate(const PipeDistances& dist, const LocalizationResult& result, std::size_t true_node) {
  EvaluationReport r;
  r.distance = ranking_distances(dist, result.metric, true_node);
  return r;
}

void add_rmse(EvaluationReport& report, const std::vector<Vector>& estimate, const std::vector<Vector>& truth) {
  if (estimate.size() != truth.size()) throw Error(ErrorCode::WindowMismatch, "rmse series lengths differ");
  report.rmse.clear();
  for (std::size_t t = 0; t < truth.size(); ++t) report.rmse.push_back(rmse(truth[t], estimate[t]));
  std::tie(report.rmse_mean, report.rmse_std) = mean_std(report.rmse);
}

}  // namespace fgll
