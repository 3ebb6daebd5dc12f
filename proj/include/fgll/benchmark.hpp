#pragma once

// Seeded single-leak scenario sweep comparing FGLL with FGSI + LCSM.

#include "fgll/hydraulics.hpp"
#include "fgll/ingest.hpp"
#include "fgll/pipeline.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fgll {

struct BenchmarkOptions {
  int scenarios = 9;
  int instants = 12;         // window length T
  double leak_lps = 0.5;     // constant leak size
  ParameterNoise noise;      // pipe attribute and demand noise
  DemandPattern pattern;
  std::uint64_t seed = 0;
  int parallel = 1;          // worker threads
  bool record_time = false;  // wall-clock seconds in the reports
  bool true_model = false;   // estimate with the perturbed pipe attributes instead of the nominal ones
};

struct MethodReport {
  Vector metric;  // ranking score per node
  std::vector<std::size_t> candidates;
  EvaluationReport eval;
  std::size_t true_rank = 0;  // 0-based position of the leak node in the ranking
};

struct ScenarioReport {
  int scenario_id = 0;
  std::size_t leak_node = 0;
  MethodReport fgll;
  MethodReport lcsm;
  std::vector<double> fgsi_rmse;  // per-instant FGSI error on the leak data
};

struct Aggregate {
  std::pair<double, double> best_km, best_pipes, avg5_km, avg5_pipes, rmse;
  int top3 = 0;
};

struct BenchmarkReport {
  std::vector<ScenarioReport> scenarios;
  Aggregate fgll;
  Aggregate lcsm;
  std::pair<double, double> fgsi_rmse;
  // Mean FGSI RMSE with mu_L scaled by 0.1, 1 and 10.
  std::vector<std::pair<double, double>> mu_sensitivity;
};

/// Leak node of scenario s: junctions spread evenly over the scenario ids.
std::size_t scenario_leak_node(const Network& net, int scenario, int scenarios);

/// Runs one scenario end to end.
ScenarioReport run_scenario(const Network& net, const SensorLayout& layout, const PipeDistances& dist,
                            const RunConfig& config, const BenchmarkOptions& opts, int scenario);

BenchmarkReport run_benchmark(const Network& net, const SensorLayout& layout, const RunConfig& config,
                              const BenchmarkOptions& opts);

std::string report_json(const BenchmarkReport& report, const Network& net, const RunConfig& config,
                        const BenchmarkOptions& opts);
/// One row per scenario and method.
std::string report_csv(const BenchmarkReport& report, const Network& net);
/// Tidy plot data: one row per scenario, method and node.
std::string metric_csv(const BenchmarkReport& report, const Network& net);

}  // namespace fgll
