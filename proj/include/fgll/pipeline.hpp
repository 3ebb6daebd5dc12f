#pragma once

// Leak-free estimation, leak localization, the LCSM baseline and the
// evaluation metrics used by the benchmark.

#include "fgll/factor_graph.hpp"
#include "fgll/fgsi.hpp"
#include "fgll/hydraulics.hpp"
#include "fgll/ingest.hpp"
#include "fgll/measurements.hpp"
#include "fgll/network.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace fgll {

struct SeriesEstimate {
  std::vector<Vector> h;  // h[t] for window instants 1..T (0-based storage)
  std::vector<Vector> d;
  int iterations = 0;
  bool converged = false;
  double cost = 0.0;
};

/// Everything the graph builders need that depends only on the network,
/// the layout and mu_L.
class EstimationModel {
 public:
  EstimationModel(const Network& net, const SensorLayout& layout, double mu_L);

  const Network& network() const { return *net_; }
  const SensorLayout& layout() const { return layout_; }
  const Interpolator& interpolator() const { return interpolator_; }
  const std::shared_ptr<const PipeModel>& pipes() const { return pipes_; }

 private:
  const Network* net_;
  SensorLayout layout_;
  Interpolator interpolator_;
  std::shared_ptr<const PipeModel> pipes_;
};

/// Adds h[t], d[t] for t = 1..T with their per-instant and temporal factors
/// plus the prior on h[1], and fills `init` with the FGSI / metered-demand
/// initialization.
void add_estimation_factors(FactorGraph& graph, Values& init, const EstimationModel& model,
                            const MeasurementSet& m, const Vector& h0, const NoiseVariances& noise);

/// Default prior: FGSI of the first pressure reading.
Vector default_prior(const EstimationModel& model, const MeasurementSet& m);

/// One window. Throws WindowTooShort when T < 2.
SeriesEstimate estimate_leak_free(const EstimationModel& model, const MeasurementSet& m, const Vector& h0,
                                  const RunConfig& config);

/// Consecutive windows of config.window_T instants (the last one may be
/// shorter but not below 2); each window's prior is the previous window's
/// final head estimate.
SeriesEstimate estimate_windowed(const EstimationModel& model, const MeasurementSet& m, const Vector& h0,
                                 const RunConfig& config);

struct LocalizationResult {
  Vector metric;
  std::vector<std::size_t> candidates;
  double threshold = 0.0;
  std::vector<Vector> leak;  // l[t] for window instants 1..T
  SeriesEstimate heads;      // leak-state estimate from the same graph
};

/// h_bar must cover the same instants as the leak measurements
/// (WindowMismatch otherwise).
LocalizationResult localize(const EstimationModel& model, const MeasurementSet& leak, const std::vector<Vector>& h_bar,
                            const Vector& h0, const RunConfig& config);

/// Leak-state spreads at or below this (m) are solver round-off, not a
/// leak signal.
inline constexpr double kLeakResolution = 1e-7;

/// (max - l) / (max - min); all zeros when the spread of l is within
/// kLeakResolution.
Vector localization_metric(const Vector& l0);

struct CandidateSet {
  std::vector<std::size_t> nodes;
  double threshold = 0.0;
};

/// Nodes with metric >= mean + population std; empty when the metric is
/// constant.
CandidateSet select_candidates(const Vector& metric);

struct LcsmResult {
  Vector distance;  // orthogonal distance to the fitted line
  CandidateSet candidates;
};

/// Total-least-squares line through {(leak_free_i, leak_i)} and distance
/// thresholding.
LcsmResult lcsm(const Vector& leak, const Vector& leak_free);

double rmse(const Vector& x, const Vector& x_hat);

/// Node indices sorted by decreasing score, ties by index.
std::vector<std::size_t> rank_nodes(const Vector& score);

struct DistanceSummary {
  double best_km = 0.0;
  double best_pipes = 0.0;
  double avg5_km = 0.0;
  double avg5_pipes = 0.0;
};

/// Best / Avg-5 distances from `true_node` to the ranking. Throws
/// EmptyRanking when the score is degenerate.
DistanceSummary ranking_distances(const PipeDistances& dist, const Vector& score, std::size_t true_node);

struct EvaluationReport {
  std::vector<double> rmse;  // per instant, m
  double rmse_mean = 0.0;
  double rmse_std = 0.0;
  DistanceSummary distance;
  double seconds = 0.0;
};

/// Ranks by result.metric. `rmse` is left empty; fill it with
/// add_rmse when reference heads are known.
EvaluationReport evaluate(const PipeDistances& dist, const LocalizationResult& result, std::size_t true_node);
void add_rmse(EvaluationReport& report, const std::vector<Vector>& estimate, const std::vector<Vector>& truth);

/// Mean and population standard deviation.
std::pair<double, double> mean_std(const std::vector<double>& values);

}  // namespace fgll
