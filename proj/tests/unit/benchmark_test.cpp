#include "fgll/benchmark.hpp"
#include "fgll/errors.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

using namespace fgll;
using namespace fgll::test;

namespace {

BenchmarkOptions small_options(int scenarios) {
  BenchmarkOptions o;
  o.scenarios = scenarios;
  o.instants = 4;
  o.noise = {0.01, 0.01, 0.005};
  o.seed = 3;
  return o;
}

}  // namespace

TEST(Benchmark, LeakNodesSpreadOverJunctions) {
  const Network net = t_example();
  std::vector<std::size_t> seen;
  for (int s = 0; s < 9; ++s) seen.push_back(scenario_leak_node(net, s, 9));
  std::vector<std::size_t> junctions = net.junctions();
  EXPECT_EQ(seen, junctions);
}

TEST(Benchmark, SingleScenarioAggregateHasNoSpread) {
  const Network net = t_example();
  const SensorLayout layout = layout_from_spec(net, t_example_spec());
  const BenchmarkReport r = run_benchmark(net, layout, RunConfig{}, small_options(1));
  ASSERT_EQ(r.scenarios.size(), 1u);
  const ScenarioReport& s = r.scenarios[0];
  EXPECT_EQ(r.fgll.best_km.first, s.fgll.eval.distance.best_km);
  EXPECT_EQ(r.fgll.best_km.second, 0.0);
  EXPECT_EQ(r.fgll.avg5_pipes.first, s.fgll.eval.distance.avg5_pipes);
  EXPECT_EQ(r.fgll.avg5_pipes.second, 0.0);
  EXPECT_EQ(r.lcsm.avg5_km.second, 0.0);
  EXPECT_EQ(r.mu_sensitivity.size(), 3u);
}

TEST(Benchmark, DeterministicAndThreadCountIndependent) {
  const Network net = t_example();
  const SensorLayout layout = layout_from_spec(net, t_example_spec());
  BenchmarkOptions serial = small_options(4);
  BenchmarkOptions parallel = serial;
  parallel.parallel = 3;
  const RunConfig config;
  const BenchmarkReport a = run_benchmark(net, layout, config, serial);
  const BenchmarkReport b = run_benchmark(net, layout, config, serial);
  const BenchmarkReport c = run_benchmark(net, layout, config, parallel);
  EXPECT_EQ(report_json(a, net, config, serial), report_json(b, net, config, serial));
  // Thread count is echoed in the settings block; everything else must match.
  auto ja = nlohmann::json::parse(report_json(a, net, config, serial));
  auto jc = nlohmann::json::parse(report_json(c, net, config, parallel));
  ja.erase("settings");
  jc.erase("settings");
  EXPECT_EQ(ja, jc);
  EXPECT_EQ(report_csv(a, net), report_csv(c, net));
  EXPECT_EQ(metric_csv(a, net), metric_csv(c, net));
}

TEST(Benchmark, ReportShapes) {
  const Network net = t_example();
  const SensorLayout layout = layout_from_spec(net, t_example_spec());
  const BenchmarkOptions opts = small_options(2);
  const BenchmarkReport r = run_benchmark(net, layout, RunConfig{}, opts);
  const auto j = nlohmann::json::parse(report_json(r, net, RunConfig{}, opts));
  ASSERT_EQ(j["scenarios"].size(), 2u);
  const auto& fg = j["scenarios"][0]["fgll"];
  for (const char* key : {"metric", "candidates", "best_km", "best_pipes", "avg5_km", "avg5_pipes", "rmse_mean",
                          "rmse_std", "seconds"}) {
    EXPECT_TRUE(fg.contains(key)) << key;
  }
  EXPECT_TRUE(fg["seconds"].is_null());
  EXPECT_EQ(fg["metric"].size(), net.n());
  // Header plus one row per scenario and method.
  const std::string csv = report_csv(r, net);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 2);
  const std::string tidy = metric_csv(r, net);
  EXPECT_EQ(std::count(tidy.begin(), tidy.end(), '\n'), static_cast<long>(1 + 2 * 2 * net.n()));
}
