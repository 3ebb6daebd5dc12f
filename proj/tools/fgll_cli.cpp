// fgll: simulate scenarios, interpolate, estimate, localize, evaluate and
// benchmark from the command line.

#include "fgll/benchmark.hpp"
#include "fgll/errors.hpp"
#include "fgll/hydraulics.hpp"
#include "fgll/ingest.hpp"
#include "fgll/pipeline.hpp"
#include "fgll/rng.hpp"
#include "fgll/synthetic.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace fgll;

namespace {

struct Common {
  std::string network;
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<double> mu_l;
  std::optional<int> window;
};

struct ScenarioFlags {
  int instants = 12;
  double leak_lps = 0.5;
  double param_noise = 0.0;
  double demand_noise = 0.0;
  double pattern_amplitude = 0.3;
  double pattern_period = 288.0;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config = true) {
  cmd->add_option("--network", c.network, "Network file (.inp or native JSON)")->required();
  if (needs_config) cmd->add_option("--config", c.config, "Run configuration JSON (defaults when omitted)");
  cmd->add_option("--out", c.out, "Output directory (created if missing)")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Overrides rng_seed");
  cmd->add_option("--mu-l", c.mu_l, "Overrides mu_L (Laplacian regularization weight)");
  cmd->add_option("--window", c.window, "Overrides window_T (instants per estimation window)");
}

void add_scenario_flags(CLI::App* cmd, ScenarioFlags& s) {
  cmd->add_option("--instants", s.instants, "Simulated instants per scenario")->capture_default_str();
  cmd->add_option("--leak-lps", s.leak_lps, "Constant leak size, l/s")->capture_default_str();
  cmd->add_option("--param-noise", s.param_noise, "Relative roughness/diameter perturbation")->capture_default_str();
  cmd->add_option("--demand-noise", s.demand_noise, "Relative per-instant demand perturbation")->capture_default_str();
  cmd->add_option("--pattern-amplitude", s.pattern_amplitude, "Demand pattern amplitude")->capture_default_str();
  cmd->add_option("--pattern-period", s.pattern_period, "Demand pattern period, instants")->capture_default_str();
}

RunConfig load_run_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(read_text_file(c.config));
  if (c.seed) cfg.rng_seed = *c.seed;
  if (c.mu_l) cfg.mu_L = *c.mu_l;
  if (c.window) cfg.window_T = *c.window;
  validate(cfg);
  return cfg;
}

struct LoadedNetwork {
  NetworkSpec spec;
  Network net;
};

LoadedNetwork load_network(const std::string& path) {
  std::vector<std::string> warnings;
  NetworkSpec spec = load_network_spec(path, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  Network net = build_network(spec);
  return {std::move(spec), std::move(net)};
}

SensorLayout default_layout(const LoadedNetwork& ln) {
  if (ln.spec.pressure_sensors.empty() && ln.spec.demand_sensors.empty()) return SensorLayout::all_nodes(ln.net);
  return layout_from_spec(ln.net, ln.spec);
}

MeasurementSet read_measurements(const std::string& path, const Network& net, const RunConfig& cfg) {
  return parse_measurements(read_text_file(path), net, {cfg.flow_units, cfg.pressure_is_gauge});
}

fs::path out_dir(const Common& c) {
  fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  return dir;
}

void write(const fs::path& path, const std::string& text) {
  write_text_file_atomic(path, text);
  std::cout << path.string() << "\n";
}

Scenario make_scenario(const Network& net, const ScenarioFlags& s, std::uint64_t seed) {
  Scenario sc;
  DemandPattern pattern;
  pattern.amplitude = s.pattern_amplitude;
  pattern.period = s.pattern_period;
  sc.demands = pattern_demands(net, pattern, s.instants);
  sc.noise = {s.param_noise, s.param_noise, s.demand_noise};
  sc.seed = derive_seed(seed, 0);
  sc.demand_seed = derive_seed(seed, 1);
  return sc;
}

int run_simulate(const Common& c, const ScenarioFlags& s, const std::string& leak_node) {
  const LoadedNetwork ln = load_network(c.network);
  const RunConfig cfg = load_run_config(c);
  const SensorLayout layout = default_layout(ln);
  Scenario sc = make_scenario(ln.net, s, cfg.rng_seed);
  const SimulationResult sim = simulate_scenario(ln.net, sc);
  const fs::path dir = out_dir(c);

  auto emit = [&](const std::vector<HydraulicState>& states, const std::string& tag) {
    StateSeries series;
    for (const auto& st : states) {
      series.h.push_back(st.h);
      series.d.push_back(st.d);
    }
    write(dir / fmt::format("measurements_{}.csv", tag),
          format_measurements(sample_sensors(states, layout), ln.net, cfg.flow_units));
    write(dir / fmt::format("states_{}.csv", tag), format_states(ln.net, series, cfg.flow_units));
  };
  emit(sim.states, "leakfree");
  if (!leak_node.empty()) {
    sc.leak = LeakSpec{ln.net.node_index(leak_node), Vector::Constant(s.instants, flow_to_si(s.leak_lps, FlowUnits::Lps))};
    sc.demand_seed = derive_seed(cfg.rng_seed, 2);
    emit(simulate_on(sim.network, sc), "leak");
  }
  write(dir / "network_perturbed.json", network_to_json(to_spec(sim.network)));
  return 0;
}

int run_fgsi(const Common& c, const std::string& measurements) {
  const LoadedNetwork ln = load_network(c.network);
  const RunConfig cfg = load_run_config(c);
  const MeasurementSet m = read_measurements(measurements, ln.net, cfg);
  const Interpolator itp(struct_matrices(ln.net), m.layout, cfg.mu_L);
  StateSeries series;
  for (const Vector& hs : m.pressure) series.h.push_back(itp.interpolate(hs));
  write(out_dir(c) / "fgsi_heads.csv", format_states(ln.net, series, cfg.flow_units));
  return 0;
}

int run_estimate(const Common& c, const std::string& measurements) {
  const LoadedNetwork ln = load_network(c.network);
  const RunConfig cfg = load_run_config(c);
  const MeasurementSet m = read_measurements(measurements, ln.net, cfg);
  const EstimationModel model(ln.net, m.layout, cfg.mu_L);
  const SeriesEstimate est = estimate_windowed(model, m, default_prior(model, m), cfg);
  if (!est.converged) std::cerr << "warning: solver stopped at the iteration limit\n";
  write(out_dir(c) / "estimate.csv", format_states(ln.net, {est.h, est.d}, cfg.flow_units));
  return 0;
}

int run_localize(const Common& c, const std::string& leak_path, const std::string& leakfree_path) {
  const LoadedNetwork ln = load_network(c.network);
  const RunConfig cfg = load_run_config(c);
  const MeasurementSet leak = read_measurements(leak_path, ln.net, cfg);
  const MeasurementSet lf = read_measurements(leakfree_path, ln.net, cfg);
  if (leak.T() != lf.T()) {
    throw Error(ErrorCode::WindowMismatch,
                fmt::format("leak file has {} instants, leak-free file has {}", leak.T(), lf.T()));
  }
  if (!(leak.layout == lf.layout)) throw Error(ErrorCode::InvalidLayout, "leak and leak-free sensor sets differ");
  const EstimationModel model(ln.net, lf.layout, cfg.mu_L);
  const Vector h0 = default_prior(model, lf);
  const SeriesEstimate h_bar = estimate_leak_free(model, lf, h0, cfg);
  const LocalizationResult r = localize(model, leak, h_bar.h, h0, cfg);

  nlohmann::ordered_json doc;
  std::vector<std::string> ids;
  for (const Node& n : ln.net.nodes()) ids.push_back(n.id);
  std::vector<std::string> cands;
  for (std::size_t i : r.candidates) cands.push_back(ln.net.node(i).id);
  doc["node_ids"] = ids;
  doc["metric"] = std::vector<double>(r.metric.data(), r.metric.data() + r.metric.size());
  doc["threshold"] = r.threshold;
  doc["candidates"] = cands;
  nlohmann::ordered_json leak_states = nlohmann::ordered_json::array();
  for (const Vector& l : r.leak) leak_states.push_back(std::vector<double>(l.data(), l.data() + l.size()));
  doc["leak_states"] = leak_states;
  const fs::path dir = out_dir(c);
  write(dir / "localization.json", doc.dump(2) + "\n");
  write(dir / "leak_estimate.csv", format_states(ln.net, {r.heads.h, r.heads.d}, cfg.flow_units));
  return 0;
}

int run_evaluate(const Common& c, const std::string& result_path, const std::string& leak_node,
                 const std::string& estimate_path, const std::string& truth_path) {
  const LoadedNetwork ln = load_network(c.network);
  const RunConfig cfg = load_run_config(c);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(result_path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRow, fmt::format("{}: {}", result_path, e.what()));
  }
  if (!doc.contains("metric") || !doc["metric"].is_array()) {
    throw Error(ErrorCode::MalformedRow, result_path + ": missing metric array");
  }
  const auto metric_values = doc["metric"].get<std::vector<double>>();
  LocalizationResult r;
  r.metric = Eigen::Map<const Vector>(metric_values.data(), static_cast<Eigen::Index>(metric_values.size()));
  const PipeDistances dist(ln.net);
  EvaluationReport rep = evaluate(dist, r, ln.net.node_index(leak_node));
  if (!estimate_path.empty() != !truth_path.empty()) {
    throw Error(ErrorCode::InvalidConfig, "--estimate and --truth go together");
  }
  if (!estimate_path.empty()) {
    const StateSeries est = parse_states(read_text_file(estimate_path), ln.net, cfg.flow_units);
    const StateSeries truth = parse_states(read_text_file(truth_path), ln.net, cfg.flow_units);
    add_rmse(rep, est.h, truth.h);
  }
  nlohmann::ordered_json out = {{"leak_node", leak_node},
                                {"best_km", rep.distance.best_km},
                                {"best_pipes", rep.distance.best_pipes},
                                {"avg5_km", rep.distance.avg5_km},
                                {"avg5_pipes", rep.distance.avg5_pipes},
                                {"rmse", rep.rmse},
                                {"rmse_mean", rep.rmse_mean},
                                {"rmse_std", rep.rmse_std}};
  write(out_dir(c) / "evaluation.json", out.dump(2) + "\n");
  return 0;
}

int run_bench(const Common& c, const ScenarioFlags& s, int scenarios, int parallel, bool timing, bool true_model,
              std::optional<double> pressure_cov, std::optional<double> demand_cov) {
  const LoadedNetwork ln = load_network(c.network);
  const RunConfig cfg = load_run_config(c);
  SensorLayout layout = default_layout(ln);
  if (pressure_cov || demand_cov) {
    layout = random_layout(ln.net, pressure_cov.value_or(0.0), demand_cov.value_or(0.0),
                           derive_seed(cfg.rng_seed, 99));
  }
  BenchmarkOptions opts;
  opts.scenarios = scenarios;
  opts.instants = s.instants;
  opts.leak_lps = s.leak_lps;
  opts.noise = {s.param_noise, s.param_noise, s.demand_noise};
  opts.pattern.amplitude = s.pattern_amplitude;
  opts.pattern.period = s.pattern_period;
  opts.seed = cfg.rng_seed;
  opts.parallel = parallel;
  opts.record_time = timing;
  opts.true_model = true_model;
  const BenchmarkReport rep = run_benchmark(ln.net, layout, cfg, opts);
  const fs::path dir = out_dir(c);
  write(dir / "report.json", report_json(rep, ln.net, cfg, opts));
  write(dir / "report.csv", report_csv(rep, ln.net));
  write(dir / "metric_tidy.csv", metric_csv(rep, ln.net));
  std::cerr << fmt::format("FGLL  top-3 {}/{}  Avg-5 {:.3f} km ({:.2f} pipes)  RMSE {:.4f} m\n", rep.fgll.top3,
                           scenarios, rep.fgll.avg5_km.first, rep.fgll.avg5_pipes.first, rep.fgll.rmse.first);
  std::cerr << fmt::format("LCSM  top-3 {}/{}  Avg-5 {:.3f} km ({:.2f} pipes)  RMSE {:.4f} m\n", rep.lcsm.top3,
                           scenarios, rep.lcsm.avg5_km.first, rep.lcsm.avg5_pipes.first, rep.lcsm.rmse.first);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Factor-graph leak-free estimation and leak localization for water networks"};
  app.require_subcommand(1);

  Common c;
  ScenarioFlags sf;
  std::string measurements, leakfree, leak_node, result, estimate_path, truth_path;
  int scenarios = 9;
  int parallel = 1;
  bool timing = false;
  bool true_model = false;
  std::optional<double> pressure_cov, demand_cov;

  auto* sim = app.add_subcommand("simulate", "Simulate a leak-free and an optional leak scenario");
  add_common(sim, c);
  add_scenario_flags(sim, sf);
  sim->add_option("--leak-node", leak_node, "Junction id of the leak (no leak run when omitted)");

  auto* fgsi = app.add_subcommand("fgsi", "Per-instant graph interpolation of heads");
  add_common(fgsi, c);
  fgsi->add_option("--measurements", measurements, "Measurement CSV")->required();

  auto* est = app.add_subcommand("estimate", "Leak-free head and demand estimation");
  add_common(est, c);
  est->add_option("--measurements", measurements, "Leak-free measurement CSV")->required();

  auto* loc = app.add_subcommand("localize", "Leak localization against a leak-free window");
  add_common(loc, c);
  loc->add_option("--measurements", measurements, "Leak measurement CSV")->required();
  loc->add_option("--leakfree", leakfree, "Leak-free measurement CSV (same instants)")->required();

  auto* ev = app.add_subcommand("evaluate", "Distance and RMSE metrics of a localization result");
  add_common(ev, c);
  ev->add_option("--result", result, "localization.json written by localize")->required();
  ev->add_option("--leak-node", leak_node, "True leak junction id")->required();
  ev->add_option("--estimate", estimate_path, "Estimated head series CSV (for RMSE)");
  ev->add_option("--truth", truth_path, "Simulated head series CSV (for RMSE)");

  auto* bench = app.add_subcommand("benchmark", "Seeded single-leak scenario sweep, FGLL vs FGSI+LCSM");
  add_common(bench, c);
  add_scenario_flags(bench, sf);
  bench->add_option("--scenarios", scenarios, "Number of leak scenarios")->capture_default_str();
  bench->add_option("--parallel", parallel, "Worker threads")->capture_default_str();
  bench->add_option("--pressure-coverage", pressure_cov, "Random pressure sensor fraction (overrides the network's)");
  bench->add_option("--demand-coverage", demand_cov, "Random demand sensor fraction (overrides the network's)");
  bench->add_flag("--true-model", true_model, "Estimate with the perturbed pipe attributes (default: nominal)");
  bench->add_flag("--timing", timing, "Record wall-clock seconds (reports are then not reproducible)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 1;
  }

  try {
    if (*sim) return run_simulate(c, sf, leak_node);
    if (*fgsi) return run_fgsi(c, measurements);
    if (*est) return run_estimate(c, measurements);
    if (*loc) return run_localize(c, measurements, leakfree);
    if (*ev) return run_evaluate(c, result, leak_node, estimate_path, truth_path);
    if (*bench) return run_bench(c, sf, scenarios, parallel, timing, true_model, pressure_cov, demand_cov);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_numerical(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
