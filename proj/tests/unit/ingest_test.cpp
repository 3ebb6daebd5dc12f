#include "fgll/errors.hpp"
#include "fgll/ingest.hpp"
#include "fgll/synthetic.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

using namespace fgll;
using namespace fgll::test;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no fgll::Error thrown";
  return ErrorCode::IoError;
}

const char* kSmallInp = R"([TITLE]
small
[JUNCTIONS]
;ID elev demand
J1 20 0.5
J2 18 1.5 ; trailing comment
[RESERVOIRS]
R1 60
[PIPES]
P1 R1 J1 1000 300 130
P2 J1 J2 500 200 120 0 Open
[COORDINATES]
J1 1 2
[OPTIONS]
Units LPS
[END]
)";

// Two pressure sensors (R, J3) over three instants.
std::string complete_csv() {
  std::ostringstream s;
  s << "t,node_id,kind,value\n";
  for (int t = 0; t < 3; ++t) {
    s << t << ",R,pressure,55\n";
    s << t << ",J3,pressure," << 50 - t << "\n";
    s << t << ",R,demand,-" << 10 + t << "\n";
  }
  return s.str();
}

}  // namespace

TEST(ParseInp, CountsAndUnits) {
  const InpParseResult r = parse_inp(kSmallInp);
  std::size_t junctions = 0, reservoirs = 0;
  for (const NodeRecord& n : r.spec.nodes) (n.kind == NodeKind::Junction ? junctions : reservoirs)++;
  EXPECT_EQ(junctions, 2u);
  EXPECT_EQ(reservoirs, 1u);
  EXPECT_EQ(r.spec.pipes.size(), 2u);
  EXPECT_DOUBLE_EQ(r.spec.nodes[0].base_demand, 0.0005);
  EXPECT_DOUBLE_EQ(r.spec.pipes[0].diameter_m, 0.3);
  EXPECT_DOUBLE_EQ(r.spec.pipes[1].length_m, 500.0);
  ASSERT_TRUE(r.spec.nodes[0].x.has_value());
  EXPECT_DOUBLE_EQ(*r.spec.nodes[0].y, 2.0);
  // [TITLE] is ignored with a warning.
  EXPECT_FALSE(r.warnings.empty());
  EXPECT_NO_THROW(build_network(r.spec));
}

TEST(ParseInp, MissingPipesSection) {
  try {
    parse_inp("[JUNCTIONS]\nJ1 1 0\n[RESERVOIRS]\nR 10\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingSection);
    EXPECT_NE(std::string(e.what()).find("PIPES"), std::string::npos);
  }
}

TEST(ParseInp, RowErrors) {
  EXPECT_EQ(code_of([] { parse_inp("[JUNCTIONS]\nJ1\n[RESERVOIRS]\nR 1\n[PIPES]\n"); }), ErrorCode::MalformedRow);
  EXPECT_EQ(code_of([] { parse_inp("[JUNCTIONS]\nJ1 1 0\nJ1 2 0\n[RESERVOIRS]\nR 1\n[PIPES]\n"); }),
            ErrorCode::DuplicateId);
  EXPECT_EQ(code_of([] { parse_inp("[JUNCTIONS]\nJ1 1 0\n[RESERVOIRS]\nR 1\n[PIPES]\n[OPTIONS]\nUnits GPM\n"); }),
            ErrorCode::InvalidAttribute);
}

TEST(ParseInp, OtherSiFlowUnits) {
  const InpParseResult r = parse_inp("[JUNCTIONS]\nJ1 1 3.6\n[RESERVOIRS]\nR 1\n[PIPES]\nP R J1 1 100 100\n[OPTIONS]\nUnits CMH\n");
  EXPECT_DOUBLE_EQ(r.spec.nodes[0].base_demand, 0.001);
}

TEST(Config, EmptyObjectGivesDefaults) {
  const RunConfig c = load_config("{}");
  EXPECT_EQ(c.noise.temporal, 1e-12);
  EXPECT_EQ(c.noise.structural, 1e-4);
  EXPECT_EQ(c.noise.demand_head, 1e-12);
  EXPECT_EQ(c.noise.pressure_residual, 1e-3);
  EXPECT_EQ(c.noise.leak_localization, 1e-5);
  EXPECT_EQ(c.noise.demand_measurement, 1e-4);
  EXPECT_EQ(c.noise.zero_sum, 1e-12);
  EXPECT_EQ(c.mu_L, 1.0);
  EXPECT_EQ(c.window_T, 12);
  EXPECT_EQ(c.solver.max_iterations, 100);
  EXPECT_EQ(c.solver.cost_tolerance, 1e-9);
  EXPECT_EQ(c.solver.lm_initial_damping, 1e-4);
  EXPECT_EQ(c.rng_seed, 0u);
  EXPECT_EQ(c.flow_units, FlowUnits::Lps);
  EXPECT_FALSE(c.pressure_is_gauge);
}

TEST(Config, Overrides) {
  const RunConfig c = load_config(R"({"mu_L": 0.5})");
  EXPECT_EQ(c.mu_L, 0.5);
  EXPECT_EQ(c.window_T, 12);
  EXPECT_EQ(c.noise, NoiseVariances{});
}

TEST(Config, Rejections) {
  for (const char* bad : {R"({"noise": {"temporal": -1}})", R"({"noise": {"zero_sum": 0}})", R"({"window_T": 1})",
                          R"({"solver": {"cost_tolerance": 0}})", R"({"unknown": 1})", R"({"noise": {"foo": 1}})",
                          R"({"flow_units": "gpm"})", R"({"rng_seed": -3})", "[1]", "{"}) {
    EXPECT_EQ(code_of([&] { load_config(bad); }), ErrorCode::InvalidConfig) << bad;
  }
}

TEST(Config, RoundTrip) {
  RunConfig c;
  c.mu_L = 0.25;
  c.window_T = 7;
  c.noise.leak_localization = 1e-9;
  c.rng_seed = 42;
  c.flow_units = FlowUnits::M3s;
  c.pressure_is_gauge = true;
  const RunConfig back = load_config(config_to_json(c));
  EXPECT_EQ(back.mu_L, c.mu_L);
  EXPECT_EQ(back.window_T, c.window_T);
  EXPECT_EQ(back.noise, c.noise);
  EXPECT_EQ(back.rng_seed, c.rng_seed);
  EXPECT_EQ(back.flow_units, c.flow_units);
  EXPECT_TRUE(back.pressure_is_gauge);
}

TEST(Config, ShippedPresetsLoad) {
  for (const char* name : {"config/t-example.json", "config/modena.json", "config/ltown.json"}) {
    EXPECT_NO_THROW(load_config(read_text_file(data_path(name)))) << name;
  }
}

TEST(NetworkJson, RoundTripIsIdentity) {
  const NetworkSpec fixture = t_example_spec();
  EXPECT_EQ(parse_network_json(network_to_json(fixture)), fixture);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const NetworkSpec s = random_network(15, 4, seed);
    EXPECT_EQ(parse_network_json(network_to_json(s)), s);
  }
}

TEST(NetworkJson, SpecOfBuiltNetworkRebuildsIt) {
  const Network net = t_example();
  const NetworkSpec s = to_spec(net);
  const Network again = build_network(parse_network_json(network_to_json(s)));
  ASSERT_EQ(again.n(), net.n());
  for (std::size_t k = 0; k < net.m(); ++k) EXPECT_EQ(resistance(again.pipe(k)), resistance(net.pipe(k)));
}

TEST(NetworkJson, Rejections) {
  EXPECT_EQ(code_of([] { parse_network_json(R"({"nodes": []})"); }), ErrorCode::MissingSection);
  EXPECT_EQ(code_of([] { parse_network_json(R"({"nodes": [], "pipes": [], "extra": 1})"); }), ErrorCode::MalformedRow);
  EXPECT_EQ(code_of([] {
              parse_network_json(R"({"nodes": [{"id": "A", "elevation": 0, "kind": "tank"}], "pipes": []})");
            }),
            ErrorCode::MalformedRow);
}

TEST(Measurements, CompleteWindow) {
  const Network net = t_example();
  const MeasurementSet m = parse_measurements(complete_csv(), net);
  EXPECT_EQ(m.T(), 3u);
  EXPECT_EQ(m.layout.n_s(), 2u);
  EXPECT_EQ(m.layout.n_d(), 1u);
  const auto& pn = m.layout.pressure_nodes();
  const auto j3 = std::find(pn.begin(), pn.end(), net.node_index("J3")) - pn.begin();
  EXPECT_EQ(m.pressure[2](j3), 48.0);
  EXPECT_DOUBLE_EQ(m.demand[1](0), -0.011);
}

TEST(Measurements, MissingAndDuplicate) {
  const Network net = t_example();
  std::string missing = complete_csv();
  missing.erase(missing.find("2,J3,pressure"), std::string("2,J3,pressure,48\n").size());
  EXPECT_EQ(code_of([&] { parse_measurements(missing, net); }), ErrorCode::MissingReading);
  EXPECT_EQ(code_of([&] { parse_measurements(complete_csv() + "1,J3,pressure,49\n", net); }),
            ErrorCode::DuplicateReading);
  EXPECT_EQ(code_of([&] { parse_measurements(complete_csv() + "1,ZZ,pressure,49\n", net); }), ErrorCode::UnknownNode);
  EXPECT_EQ(code_of([&] { parse_measurements("time,node,kind,value\n", net); }), ErrorCode::MalformedRow);
}

TEST(Measurements, GaugePressureAddsElevation) {
  const Network net = t_example();
  const std::size_t j3 = net.node_index("J3");
  const MeasurementSet m = parse_measurements(complete_csv(), net, {FlowUnits::Lps, true});
  const auto& pn = m.layout.pressure_nodes();
  const auto pos = std::find(pn.begin(), pn.end(), j3) - pn.begin();
  EXPECT_DOUBLE_EQ(m.pressure[0](pos), 50.0 + net.node(j3).elevation);
}

TEST(Measurements, FormatParsesBack) {
  const Network net = t_example();
  const MeasurementSet m = parse_measurements(complete_csv(), net);
  for (FlowUnits u : {FlowUnits::Lps, FlowUnits::M3s}) {
    const MeasurementSet back = parse_measurements(format_measurements(m, net, u), net, {u, false});
    ASSERT_EQ(back.T(), m.T());
    EXPECT_EQ(back.layout, m.layout);
    for (std::size_t t = 0; t < m.T(); ++t) {
      EXPECT_EQ(back.pressure[t], m.pressure[t]);
      EXPECT_NEAR((back.demand[t] - m.demand[t]).cwiseAbs().maxCoeff(), 0.0, 1e-15);
    }
  }
}

TEST(Units, ExactScaling) {
  EXPECT_EQ(flow_to_si(0.5, FlowUnits::Lps), 0.0005);
  EXPECT_EQ(flow_from_si(0.0005, FlowUnits::Lps), 0.5);
  EXPECT_EQ(flow_to_si(0.5, FlowUnits::M3s), 0.5);
}

TEST(States, RoundTrip) {
  const Network net = t_example();
  StateSeries s;
  for (int t = 0; t < 3; ++t) {
    s.h.push_back(Vector::LinSpaced(static_cast<Eigen::Index>(net.n()), 50.0 + t, 40.0));
    s.d.push_back(Vector::Constant(static_cast<Eigen::Index>(net.n()), 0.001 * (t + 1)));
  }
  const StateSeries back = parse_states(format_states(net, s, FlowUnits::Lps), net, FlowUnits::Lps);
  ASSERT_EQ(back.h.size(), 3u);
  ASSERT_EQ(back.d.size(), 3u);
  for (int t = 0; t < 3; ++t) {
    EXPECT_EQ(back.h[t], s.h[t]);
    EXPECT_NEAR((back.d[t] - s.d[t]).cwiseAbs().maxCoeff(), 0.0, 1e-15);
  }
  s.d.clear();
  const StateSeries heads_only = parse_states(format_states(net, s, FlowUnits::Lps), net, FlowUnits::Lps);
  EXPECT_TRUE(heads_only.d.empty());
  EXPECT_EQ(heads_only.h[2], s.h[2]);
}

TEST(Files, AtomicWriteAndRead) {
  const auto dir = std::filesystem::temp_directory_path() / "fgll_ingest_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "x.txt";
  write_text_file_atomic(path, "abc\n");
  write_text_file_atomic(path, "def\n");
  EXPECT_EQ(read_text_file(path), "def\n");
  EXPECT_FALSE(std::filesystem::exists(dir / "x.txt.tmp"));
  EXPECT_EQ(code_of([&] { read_text_file(dir / "missing.txt"); }), ErrorCode::IoError);
  std::filesystem::remove_all(dir);
}
