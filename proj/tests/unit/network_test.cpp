#include "fgll/errors.hpp"
#include "fgll/network.hpp"
#include "fgll/rng.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>

using namespace fgll;
using namespace fgll::test;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no fgll::Error thrown";
  return ErrorCode::IoError;
}

}  // namespace

TEST(BuildNetwork, SmallestLegalNetwork) {
  const Network net = build_network(two_node_spec());
  EXPECT_EQ(net.n(), 2u);
  EXPECT_EQ(net.m(), 1u);
  EXPECT_EQ(net.reservoirs(), std::vector<std::size_t>{0});
  EXPECT_EQ(net.junctions(), std::vector<std::size_t>{1});
}

TEST(BuildNetwork, FixtureCountsReservoirAsNode) {
  const Network net = t_example();
  EXPECT_EQ(net.n(), 10u);
  EXPECT_EQ(net.m(), 10u);
  EXPECT_EQ(net.reservoirs().size(), 1u);
  EXPECT_EQ(net.junctions().size(), 9u);
}

TEST(BuildNetwork, DanglingEndpointNamesTheNode) {
  NetworkSpec s = two_node_spec();
  s.pipes.push_back({"P2", "J", "X", 10.0, 0.1, 100.0});
  try {
    build_network(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DanglingEndpoint);
    EXPECT_NE(std::string(e.what()).find("'X'"), std::string::npos);
  }
}

TEST(BuildNetwork, ValidationErrors) {
  NetworkSpec dup = two_node_spec();
  dup.nodes.push_back(dup.nodes[1]);
  EXPECT_EQ(code_of([&] { build_network(dup); }), ErrorCode::DuplicateId);

  NetworkSpec disconnected = two_node_spec();
  disconnected.nodes.push_back({"K", 0.0, NodeKind::Junction, 0.0, 0.0, {}, {}});
  EXPECT_EQ(code_of([&] { build_network(disconnected); }), ErrorCode::DisconnectedGraph);

  NetworkSpec zero_len = two_node_spec(0.0);
  EXPECT_EQ(code_of([&] { build_network(zero_len); }), ErrorCode::InvalidAttribute);

  NetworkSpec neg_d = two_node_spec(100.0, 130.0, -0.1);
  EXPECT_EQ(code_of([&] { build_network(neg_d); }), ErrorCode::InvalidAttribute);

  NetworkSpec no_res = two_node_spec();
  no_res.nodes[0].kind = NodeKind::Junction;
  EXPECT_EQ(code_of([&] { build_network(no_res); }), ErrorCode::NoReservoir);

  NetworkSpec loop = two_node_spec();
  loop.pipes.push_back({"P2", "J", "J", 10.0, 0.1, 100.0});
  EXPECT_EQ(code_of([&] { build_network(loop); }), ErrorCode::InvalidAttribute);

  EXPECT_EQ(code_of([&] { build_network(NetworkSpec{}); }), ErrorCode::EmptyNetwork);
}

TEST(Resistance, MatchesDirectEvaluation) {
  const Pipe p{"P", 0, 1, 1000.0, 130.0, 0.3};
  // Independent evaluation via logarithms.
  const double expected = std::exp(std::log(10.674) + std::log(1000.0) - 1.852 * std::log(130.0) -
                                   4.87 * std::log(0.3));
  EXPECT_NEAR(resistance(p), expected, 1e-9 * expected);
  // Reference value quoted to four figures; direct evaluation gives 456.80.
  EXPECT_NEAR(resistance(p), 456.2, 2e-3 * 456.2);
}

TEST(Resistance, LinearInLength) {
  Pipe p{"P", 0, 1, 750.0, 110.0, 0.25};
  const double tau = resistance(p);
  p.length *= 2.0;
  EXPECT_DOUBLE_EQ(resistance(p), 2.0 * tau);
}

TEST(Resistance, RejectsDegeneratePipe) {
  EXPECT_EQ(code_of([] { resistance(Pipe{"P", 0, 1, 0.0, 130.0, 0.3}); }), ErrorCode::InvalidAttribute);
}

TEST(StructMatrices, TwoNodeUnitLength) {
  const Network net = build_network(two_node_spec(1.0));
  const StructMatrices s = struct_matrices(net);
  Eigen::MatrixXd W(s.W), D(s.D), L(s.L);
  EXPECT_EQ(W, (Eigen::MatrixXd(2, 2) << 0, 1, 1, 0).finished());
  EXPECT_EQ(D, Eigen::MatrixXd::Identity(2, 2));
  EXPECT_EQ(L, (Eigen::MatrixXd(2, 2) << 1, -1, -1, 1).finished());
}

TEST(StructMatrices, ResistanceDiagonal) {
  const Network net = build_network(two_node_spec(1000.0, 130.0, 0.3));
  EXPECT_NEAR(struct_matrices(net).tau(0), resistance(net.pipe(0)), 0.0);
  EXPECT_NEAR(struct_matrices(net).tau(0), 456.2, 2e-3 * 456.2);
}

TEST(StructMatrices, LaplacianPropertiesOnRandomNets) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Network net = random_net(5 + seed * 2, seed % 5, seed);
    const StructMatrices s = struct_matrices(net);
    const Eigen::MatrixXd L(s.L);
    const Vector ones = Vector::Ones(static_cast<Eigen::Index>(net.n()));
    EXPECT_LT((L * ones).cwiseAbs().maxCoeff(), 1e-15) << "seed " << seed;
    EXPECT_TRUE(L.isApprox(L.transpose()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(L);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10);
    for (Eigen::Index i = 0; i < s.tau.size(); ++i) EXPECT_GT(s.tau(i), 0.0);
  }
}

TEST(SignedIncidence, FollowsHeadOrder) {
  const Network net = build_network(two_node_spec());
  Eigen::MatrixXd b(signed_incidence(net, Vector{{100.0, 99.0}}));
  EXPECT_EQ(b, (Eigen::MatrixXd(1, 2) << 1, -1).finished());
  b = Eigen::MatrixXd(signed_incidence(net, Vector{{99.0, 100.0}}));
  EXPECT_EQ(b, (Eigen::MatrixXd(1, 2) << -1, 1).finished());
  b = Eigen::MatrixXd(signed_incidence(net, Vector{{100.0, 100.0}}));
  EXPECT_EQ(b, (Eigen::MatrixXd(1, 2) << 1, -1).finished());
}

TEST(SignedIncidence, NonNegativeHeadDifferences) {
  Rng rng(7);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Network net = random_net(12, 4, seed);
    Vector h(static_cast<Eigen::Index>(net.n()));
    for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = rng.uniform(-50.0, 50.0);
    const Vector bh = signed_incidence(net, h) * h;
    EXPECT_GE(bh.minCoeff(), -1e-12);
  }
}

TEST(SensorLayout, SelectionsPartitionIdentity) {
  const Network net = t_example();
  const SensorLayout layout = layout_from_spec(net, t_example_spec());
  EXPECT_EQ(layout.n_s(), 4u);
  EXPECT_EQ(layout.n_d(), 4u);
  EXPECT_EQ(layout.n_u(), 6u);
  Eigen::MatrixXd stacked(layout.n(), layout.n());
  stacked << Eigen::MatrixXd(layout.S_p()), Eigen::MatrixXd(layout.S_u());
  for (Eigen::Index r = 0; r < stacked.rows(); ++r) {
    EXPECT_EQ(stacked.row(r).sum(), 1.0);
    EXPECT_EQ(stacked.row(r).cwiseAbs().maxCoeff(), 1.0);
  }
  // Rows of the identity in some order: columns also sum to one.
  EXPECT_EQ(stacked.colwise().sum(), Eigen::RowVectorXd::Ones(stacked.cols()));
}

TEST(SensorLayout, ReservoirMustBeSensed) {
  const Network net = t_example();
  const std::size_t r = net.reservoirs().front();
  EXPECT_EQ(code_of([&] { SensorLayout(net, {0}, {r}); }), ErrorCode::InvalidLayout);
  EXPECT_EQ(code_of([&] { SensorLayout(net, {r}, {0}); }), ErrorCode::InvalidLayout);
  EXPECT_EQ(code_of([&] { SensorLayout(net, {r, r}, {r}); }), ErrorCode::InvalidLayout);
  EXPECT_EQ(code_of([&] { SensorLayout(net, {r, 99}, {r}); }), ErrorCode::InvalidLayout);
}

TEST(PipeDistances, Basics) {
  const Network path = line_network(3, {{0, 1, 1000.0}, {1, 2, 2000.0}});
  const PipeDistances d(path);
  EXPECT_EQ(d(1, 1), (PipeDistance{0.0, 0}));
  EXPECT_EQ(d(0, 2), (PipeDistance{3.0, 2}));

  const Network tri = line_network(3, {{0, 1, 1000.0}, {1, 2, 1000.0}, {0, 2, 3000.0}});
  const PipeDistances t(tri);
  EXPECT_EQ(t(0, 2), (PipeDistance{2.0, 2}));
}

TEST(PipeDistances, PrefersFewerPipesOnEqualLength) {
  const Network net = line_network(4, {{0, 1, 500.0}, {1, 3, 500.0}, {0, 2, 250.0}, {2, 1, 250.0}});
  EXPECT_EQ(PipeDistances(net)(0, 3), (PipeDistance{1.0, 2}));
}

TEST(PipeDistances, MatchesFloydWarshall) {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    NetworkSpec spec = random_network(6 + seed, 2 + seed % 6, seed);
    Rng rng(seed + 100);
    // Dyadic lengths keep every path sum exact.
    for (PipeRecord& p : spec.pipes) p.length_m = 125.0 * static_cast<double>(1 + rng.index(16));
    const Network net = build_network(spec);
    const std::size_t n = net.n();
    std::vector<std::vector<std::pair<double, std::size_t>>> fw(
        n, std::vector<std::pair<double, std::size_t>>(n, {1e300, 1u << 30}));
    for (std::size_t i = 0; i < n; ++i) fw[i][i] = {0.0, 0};
    for (const Pipe& p : net.pipes()) {
      const std::pair<double, std::size_t> e{p.length / 1000.0, 1};
      fw[p.source][p.sink] = std::min(fw[p.source][p.sink], e);
      fw[p.sink][p.source] = std::min(fw[p.sink][p.source], e);
    }
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const std::pair<double, std::size_t> via{fw[i][k].first + fw[k][j].first, fw[i][k].second + fw[k][j].second};
          fw[i][j] = std::min(fw[i][j], via);
        }
    const PipeDistances d(net);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_EQ(d(i, j).km, fw[i][j].first) << seed << ": " << i << "," << j;
        EXPECT_EQ(d(i, j).pipes, fw[i][j].second) << seed << ": " << i << "," << j;
        EXPECT_EQ(d(i, j), d(j, i));
      }
  }
}
