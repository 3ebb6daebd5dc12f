#include "fgll/benchmark.hpp"

#include "fgll/errors.hpp"
#include "fgll/rng.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <thread>

namespace fgll {

using nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::size_t rank_of(const Vector& score, std::size_t node) {
  const auto order = rank_nodes(score);
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), node) - order.begin());
}

Vector mean_of(const std::vector<Vector>& series) {
  Vector m = Vector::Zero(series.front().size());
  for (const Vector& v : series) m += v;
  return m / static_cast<double>(series.size());
}

std::vector<Vector> heads_of(const std::vector<HydraulicState>& states) {
  std::vector<Vector> h;
  for (const HydraulicState& s : states) h.push_back(s.h);
  return h;
}

Aggregate aggregate(const std::vector<ScenarioReport>& reports, MethodReport ScenarioReport::*method) {
  std::vector<double> bk, bp, ak, ap, rm;
  Aggregate a;
  for (const ScenarioReport& r : reports) {
    const MethodReport& m = r.*method;
    bk.push_back(m.eval.distance.best_km);
    bp.push_back(m.eval.distance.best_pipes);
    ak.push_back(m.eval.distance.avg5_km);
    ap.push_back(m.eval.distance.avg5_pipes);
    rm.push_back(m.eval.rmse_mean);
    if (m.true_rank < 3) ++a.top3;
  }
  a.best_km = mean_std(bk);
  a.best_pipes = mean_std(bp);
  a.avg5_km = mean_std(ak);
  a.avg5_pipes = mean_std(ap);
  a.rmse = mean_std(rm);
  return a;
}

struct ScenarioData {
  Network perturbed;
  std::vector<HydraulicState> leak_free;
  std::vector<HydraulicState> leak;
};

ScenarioData simulate_pair(const Network& net, const BenchmarkOptions& opts, int scenario, std::size_t leak_node) {
  const auto s = static_cast<std::uint64_t>(scenario);
  const Network perturbed = perturb_network(net, opts.noise, derive_seed(opts.seed, 3 * s));
  Scenario sc;
  sc.demands = pattern_demands(net, opts.pattern, opts.instants);
  sc.noise = opts.noise;
  sc.demand_seed = derive_seed(opts.seed, 3 * s + 1);
  ScenarioData data{perturbed, simulate_on(perturbed, sc), {}};
  sc.demand_seed = derive_seed(opts.seed, 3 * s + 2);
  sc.leak = LeakSpec{leak_node, Vector::Constant(opts.instants, flow_to_si(opts.leak_lps, FlowUnits::Lps))};
  data.leak = simulate_on(perturbed, sc);
  return data;
}

std::vector<double> fgsi_rmse(const Interpolator& itp, const MeasurementSet& m, const std::vector<Vector>& truth) {
  std::vector<double> out;
  for (std::size_t t = 0; t < m.T(); ++t) out.push_back(rmse(truth[t], itp.interpolate(m.pressure[t])));
  return out;
}

ordered_json pair_json(const std::pair<double, double>& p) { return {{"mean", p.first}, {"std", p.second}}; }

ordered_json aggregate_json(const Aggregate& a) {
  return {{"best_km", pair_json(a.best_km)},         {"best_pipes", pair_json(a.best_pipes)},
          {"avg5_km", pair_json(a.avg5_km)},         {"avg5_pipes", pair_json(a.avg5_pipes)},
          {"rmse", pair_json(a.rmse)},               {"top3", a.top3}};
}

ordered_json method_json(const ScenarioReport& s, const MethodReport& m, const Network& net, bool record_time) {
  ordered_json candidates = ordered_json::array();
  for (std::size_t c : m.candidates) candidates.push_back(net.node(c).id);
  return {{"scenario_id", s.scenario_id},
          {"leak_node", net.node(s.leak_node).id},
          {"metric", std::vector<double>(m.metric.data(), m.metric.data() + m.metric.size())},
          {"candidates", candidates},
          {"true_rank", m.true_rank},
          {"best_km", m.eval.distance.best_km},
          {"best_pipes", m.eval.distance.best_pipes},
          {"avg5_km", m.eval.distance.avg5_km},
          {"avg5_pipes", m.eval.distance.avg5_pipes},
          {"rmse", m.eval.rmse},
          {"rmse_mean", m.eval.rmse_mean},
          {"rmse_std", m.eval.rmse_std},
          {"seconds", record_time ? ordered_json(m.eval.seconds) : ordered_json(nullptr)}};
}

}  // namespace

std::size_t scenario_leak_node(const Network& net, int scenario, int scenarios) {
  const auto& j = net.junctions();
  if (j.empty()) throw Error(ErrorCode::InvalidLayout, "network has no junction to leak from");
  if (scenarios < 1 || scenario < 0 || scenario >= scenarios) {
    throw Error(ErrorCode::InvalidConfig, fmt::format("scenario {} of {}", scenario, scenarios));
  }
  const auto idx = static_cast<std::size_t>(scenario) * j.size() / static_cast<std::size_t>(scenarios);
  return j[idx % j.size()];
}

ScenarioReport run_scenario(const Network& net, const SensorLayout& layout, const PipeDistances& dist,
                            const RunConfig& config, const BenchmarkOptions& opts, int scenario) {
  ScenarioReport rep;
  rep.scenario_id = scenario;
  rep.leak_node = scenario_leak_node(net, scenario, opts.scenarios);

  const ScenarioData data = simulate_pair(net, opts, scenario, rep.leak_node);
  const MeasurementSet lf = sample_sensors(data.leak_free, layout);
  const MeasurementSet lk = sample_sensors(data.leak, layout);
  const std::vector<Vector> truth = heads_of(data.leak);

  const EstimationModel model(opts.true_model ? data.perturbed : net, layout, config.mu_L);

  auto start = Clock::now();
  const Vector h0 = default_prior(model, lf);
  const SeriesEstimate h_bar = estimate_leak_free(model, lf, h0, config);
  const LocalizationResult loc = localize(model, lk, h_bar.h, h0, config);
  rep.fgll.metric = loc.metric;
  rep.fgll.candidates = loc.candidates;
  rep.fgll.eval = evaluate(dist, loc, rep.leak_node);
  rep.fgll.eval.seconds = seconds_since(start);
  add_rmse(rep.fgll.eval, loc.heads.h, truth);
  rep.fgll.true_rank = rank_of(rep.fgll.metric, rep.leak_node);

  start = Clock::now();
  std::vector<Vector> fgsi_lf, fgsi_lk;
  for (std::size_t t = 0; t < lf.T(); ++t) {
    fgsi_lf.push_back(model.interpolator().interpolate(lf.pressure[t]));
    fgsi_lk.push_back(model.interpolator().interpolate(lk.pressure[t]));
  }
  const LcsmResult l = lcsm(mean_of(fgsi_lk), mean_of(fgsi_lf));
  rep.lcsm.metric = l.distance;
  rep.lcsm.candidates = l.candidates.nodes;
  rep.lcsm.eval.distance = ranking_distances(dist, l.distance, rep.leak_node);
  rep.lcsm.eval.seconds = seconds_since(start);
  add_rmse(rep.lcsm.eval, fgsi_lk, truth);
  rep.lcsm.true_rank = rank_of(rep.lcsm.metric, rep.leak_node);
  rep.fgsi_rmse = rep.lcsm.eval.rmse;
  return rep;
}

BenchmarkReport run_benchmark(const Network& net, const SensorLayout& layout, const RunConfig& config,
                              const BenchmarkOptions& opts) {
  if (opts.scenarios < 1) throw Error(ErrorCode::InvalidConfig, "need at least one scenario");
  if (opts.instants < 2) throw Error(ErrorCode::WindowTooShort, "benchmark needs at least 2 instants");
  if (!(opts.leak_lps >= 0.0)) throw Error(ErrorCode::InvalidConfig, "leak size must be >= 0");
  const PipeDistances dist(net);

  BenchmarkReport report;
  report.scenarios.resize(static_cast<std::size_t>(opts.scenarios));
  const int workers = std::clamp(opts.parallel, 1, opts.scenarios);
  if (workers == 1) {
    for (int s = 0; s < opts.scenarios; ++s) {
      report.scenarios[static_cast<std::size_t>(s)] = run_scenario(net, layout, dist, config, opts, s);
    }
  } else {
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int s = next++; s < opts.scenarios; s = next++) {
          try {
            report.scenarios[static_cast<std::size_t>(s)] = run_scenario(net, layout, dist, config, opts, s);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  report.fgll = aggregate(report.scenarios, &ScenarioReport::fgll);
  report.lcsm = aggregate(report.scenarios, &ScenarioReport::lcsm);
  std::vector<double> all;
  for (const ScenarioReport& s : report.scenarios) all.insert(all.end(), s.fgsi_rmse.begin(), s.fgsi_rmse.end());
  report.fgsi_rmse = mean_std(all);

  for (double scale : {0.1, 1.0, 10.0}) {
    const Interpolator itp(struct_matrices(net), layout, config.mu_L * scale);
    std::vector<double> errs;
    for (const ScenarioReport& s : report.scenarios) {
      const ScenarioData data = simulate_pair(net, opts, s.scenario_id, s.leak_node);
      const auto e = fgsi_rmse(itp, sample_sensors(data.leak, layout), heads_of(data.leak));
      errs.insert(errs.end(), e.begin(), e.end());
    }
    report.mu_sensitivity.push_back(mean_std(errs));
  }
  return report;
}

std::string report_json(const BenchmarkReport& report, const Network& net, const RunConfig& config,
                        const BenchmarkOptions& opts) {
  ordered_json scenarios = ordered_json::array();
  for (const ScenarioReport& s : report.scenarios) {
    scenarios.push_back({{"scenario_id", s.scenario_id},
                         {"leak_node", net.node(s.leak_node).id},
                         {"fgll", method_json(s, s.fgll, net, opts.record_time)},
                         {"fgsi_lcsm", method_json(s, s.lcsm, net, opts.record_time)}});
  }
  ordered_json mu = ordered_json::array();
  const double scales[] = {0.1, 1.0, 10.0};
  for (std::size_t i = 0; i < report.mu_sensitivity.size(); ++i) {
    mu.push_back({{"mu_L", config.mu_L * scales[i]}, {"rmse", pair_json(report.mu_sensitivity[i])}});
  }
  ordered_json doc = {
      {"settings",
       {{"scenarios", opts.scenarios},
        {"instants", opts.instants},
        {"leak_lps", opts.leak_lps},
        {"roughness_noise", opts.noise.roughness},
        {"diameter_noise", opts.noise.diameter},
        {"demand_noise", opts.noise.demand},
        {"seed", opts.seed},
        {"true_model", opts.true_model},
        {"mu_L", config.mu_L}}},
      {"scenarios", scenarios},
      {"aggregate", {{"fgll", aggregate_json(report.fgll)}, {"fgsi_lcsm", aggregate_json(report.lcsm)}}},
      {"fgsi_rmse", pair_json(report.fgsi_rmse)},
      {"mu_sensitivity", mu}};
  return doc.dump(2) + "\n";
}

std::string report_csv(const BenchmarkReport& report, const Network& net) {
  std::string out =
      "scenario_id,method,leak_node,true_rank,candidates,best_km,best_pipes,avg5_km,avg5_pipes,rmse_mean,rmse_std\n";
  for (const ScenarioReport& s : report.scenarios) {
    for (const auto& [name, m] : {std::pair<const char*, const MethodReport*>{"fgll", &s.fgll},
                                  std::pair<const char*, const MethodReport*>{"fgsi_lcsm", &s.lcsm}}) {
      std::string cands;
      for (std::size_t c : m->candidates) cands += (cands.empty() ? "" : ";") + net.node(c).id;
      const auto& d = m->eval.distance;
      out += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", s.scenario_id, name, net.node(s.leak_node).id,
                         m->true_rank, cands, d.best_km, d.best_pipes, d.avg5_km, d.avg5_pipes, m->eval.rmse_mean,
                         m->eval.rmse_std);
    }
  }
  return out;
}

std::string metric_csv(const BenchmarkReport& report, const Network& net) {
  std::string out = "scenario_id,leak_node,method,node_id,metric\n";
  for (const ScenarioReport& s : report.scenarios) {
    for (const auto& [name, m] : {std::pair<const char*, const MethodReport*>{"fgll", &s.fgll},
                                  std::pair<const char*, const MethodReport*>{"fgsi_lcsm", &s.lcsm}}) {
      for (Eigen::Index i = 0; i < m->metric.size(); ++i) {
        out += fmt::format("{},{},{},{},{}\n", s.scenario_id, net.node(s.leak_node).id, name,
                           net.node(static_cast<std::size_t>(i)).id, m->metric(i));
      }
    }
  }
  return out;
}

}  // namespace fgll
