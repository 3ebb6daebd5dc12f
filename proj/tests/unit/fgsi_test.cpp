#include "fgll/errors.hpp"
#include "fgll/fgsi.hpp"
#include "fgll/rng.hpp"
#include "fgll/synthetic.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>

using namespace fgll;
using namespace fgll::test;

namespace {

// Dense P_s assembled from the pipe list, independent of struct_matrices.
Eigen::MatrixXd dense_ps(const Network& net, const std::vector<std::size_t>& sensed, double mu) {
  const auto n = static_cast<Eigen::Index>(net.n());
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
  for (const Pipe& p : net.pipes()) {
    W(p.source, p.sink) += 1.0 / p.length;
    W(p.sink, p.source) += 1.0 / p.length;
  }
  const Eigen::VectorXd deg = W.rowwise().sum();
  const Eigen::MatrixXd L = Eigen::MatrixXd(deg.asDiagonal()) - W;
  const Eigen::MatrixXd Dm2 = deg.array().inverse().square().matrix().asDiagonal();
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sensed.size()), n);
  for (std::size_t r = 0; r < sensed.size(); ++r) S(static_cast<Eigen::Index>(r), sensed[r]) = 1.0;
  const Eigen::MatrixXd M = mu * L * Dm2 * L + S.transpose() * S;
  return M.ldlt().solve(S.transpose());
}

Vector random_vector(Rng& rng, Eigen::Index n, double lo, double hi) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
  return v;
}

}  // namespace

TEST(Interpolator, FullSensingWithoutSmoothingIsIdentity) {
  const Network net = t_example();
  const Interpolator itp(struct_matrices(net), SensorLayout::all_nodes(net), 0.0);
  EXPECT_NEAR((itp.matrix() - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff(), 0.0, 1e-14);
}

TEST(Interpolator, TwoNodeHandInversion) {
  const Network net = build_network(two_node_spec(1.0));
  const SensorLayout layout(net, {0}, {0});
  const Interpolator itp(struct_matrices(net), layout, 0.5);
  const Eigen::MatrixXd M(itp.system_matrix());
  EXPECT_NEAR((M - (Eigen::MatrixXd(2, 2) << 2, -1, -1, 1).finished()).cwiseAbs().maxCoeff(), 0.0, 1e-14);
  EXPECT_NEAR((itp.matrix() - Eigen::MatrixXd::Ones(2, 1)).cwiseAbs().maxCoeff(), 0.0, 1e-12);
}

TEST(Interpolator, SingleSensorSpreadsItsReading) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Network net = random_net(20, 4, seed);
    const SensorLayout layout(net, net.reservoirs(), net.reservoirs());
    for (double mu : {1e-3, 1.0, 50.0}) {
      const Interpolator itp(struct_matrices(net), layout, mu);
      EXPECT_NEAR((itp.matrix().array() - 1.0).abs().maxCoeff(), 0.0, 1e-8);
      EXPECT_NEAR((itp.interpolate(Vector::Constant(1, 100.0)).array() - 100.0).abs().maxCoeff(), 0.0, 1e-6);
    }
  }
}

TEST(Interpolator, MatchesDenseOracle) {
  Rng rng(1);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Network net = random_net(10 + 9 * seed, seed % 4 + 1, seed);
    const SensorLayout layout = random_layout(net, 0.3, 0.3, seed);
    const double mu = rng.uniform(0.01, 10.0);
    const Interpolator itp(struct_matrices(net), layout, mu);
    const Eigen::MatrixXd oracle = dense_ps(net, layout.pressure_nodes(), mu);
    EXPECT_LT(max_relative_error(itp.matrix(), oracle), 1e-9) << "seed " << seed;
  }
}

TEST(Interpolator, LinearAndZeroPreserving) {
  const Network net = random_net(30, 5, 3);
  const SensorLayout layout = random_layout(net, 0.4, 0.2, 3);
  const Interpolator itp(struct_matrices(net), layout, 1.0);
  const auto ns = static_cast<Eigen::Index>(layout.n_s());
  EXPECT_EQ(itp.interpolate(Vector::Zero(ns)).cwiseAbs().maxCoeff(), 0.0);
  Rng rng(4);
  const Vector x = random_vector(rng, ns, 0, 100), y = random_vector(rng, ns, 0, 100);
  const Vector lhs = itp.interpolate(2.5 * x - 0.75 * y);
  const Vector rhs = 2.5 * itp.interpolate(x) - 0.75 * itp.interpolate(y);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10 * rhs.cwiseAbs().maxCoeff());
}

TEST(Interpolator, NormalEquationResidual) {
  Rng rng(5);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Network net = random_net(20 + 8 * seed, 2 + seed, seed);
    const SensorLayout layout = random_layout(net, 0.25, 0.25, seed + 50);
    const Interpolator itp(struct_matrices(net), layout, rng.uniform(0.1, 5.0));
    const Vector hs = random_vector(rng, static_cast<Eigen::Index>(layout.n_s()), 20, 120);
    const Vector h = itp.interpolate(hs);
    const Vector r = itp.system_matrix() * h - Vector(layout.S_p().transpose() * hs);
    EXPECT_LT(r.cwiseAbs().maxCoeff(), 1e-9 * hs.cwiseAbs().maxCoeff()) << "seed " << seed;
  }
}

TEST(Interpolator, SmallSmoothingReproducesSensors) {
  Rng rng(6);
  const Network net = random_net(40, 6, 6);
  const SensorLayout layout = random_layout(net, 0.3, 0.3, 6);
  const Interpolator itp(struct_matrices(net), layout, 1e-8);
  const Vector hs = random_vector(rng, static_cast<Eigen::Index>(layout.n_s()), 20, 120);
  const Vector back = layout.S_p() * itp.interpolate(hs);
  EXPECT_LT((back - hs).cwiseAbs().maxCoeff(), 1e-4 * hs.cwiseAbs().maxCoeff());
}

TEST(Interpolator, RelabelingPermutesOutput) {
  Rng rng(7);
  NetworkSpec spec = random_network(25, 5, 7);
  const Network net = build_network(spec);
  const SensorLayout layout = random_layout(net, 0.3, 0.3, 7);
  const Interpolator itp(struct_matrices(net), layout, 1.3);
  const Vector hs = random_vector(rng, static_cast<Eigen::Index>(layout.n_s()), 20, 120);
  const Vector h = itp.interpolate(hs);

  std::vector<std::size_t> perm(net.n());
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::rotate(perm.begin(), perm.begin() + 7, perm.end());
  NetworkSpec shuffled = spec;
  for (std::size_t i = 0; i < net.n(); ++i) shuffled.nodes[i] = spec.nodes[perm[i]];
  const Network pnet = build_network(shuffled);

  std::vector<std::size_t> pressure;
  for (std::size_t i : layout.pressure_nodes()) pressure.push_back(pnet.node_index(net.node(i).id));
  const SensorLayout playout(pnet, pressure, pnet.reservoirs());
  // Sensor readings follow the new network order.
  Vector phs(hs.size());
  for (std::size_t k = 0; k < playout.n_s(); ++k) {
    const std::size_t orig = net.node_index(pnet.node(playout.pressure_nodes()[k]).id);
    const auto pos = std::find(layout.pressure_nodes().begin(), layout.pressure_nodes().end(), orig) -
                     layout.pressure_nodes().begin();
    phs(static_cast<Eigen::Index>(k)) = hs(pos);
  }
  const Vector ph = Interpolator(struct_matrices(pnet), playout, 1.3).interpolate(phs);
  for (std::size_t i = 0; i < net.n(); ++i) {
    EXPECT_NEAR(ph(static_cast<Eigen::Index>(pnet.node_index(net.node(i).id))), h(static_cast<Eigen::Index>(i)), 1e-9);
  }
}

TEST(Interpolator, Errors) {
  const Network net = t_example();
  const SensorLayout layout = layout_from_spec(net, t_example_spec());
  try {
    Interpolator(struct_matrices(net), layout, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularSystem);
  }
  const Interpolator itp(struct_matrices(net), layout, 1.0);
  try {
    itp.interpolate(Vector::Zero(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}
