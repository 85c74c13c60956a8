#include <gtest/gtest.h>

#include "support.hpp"

namespace ks = kurastab;

namespace {

ks::Network path(std::size_t n) {
  std::vector<ks::Edge> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, 1.0});
  return ks::Network(n, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)), edges);
}

ks::Network triangle() {
  return ks::Network(3, Eigen::VectorXd::Zero(3), {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}});
}

}  // namespace

TEST(Laplacian, TwoNodePathClosedForm) {
  const auto lap = ks::build_graph_laplacian(path(2));
  Eigen::Matrix2d l;
  l << 1, -1, -1, 1;
  EXPECT_TRUE(lap.laplacian.isApprox(l, 1e-15));
  EXPECT_TRUE(lap.pinv.isApprox(0.25 * l, 1e-14));
  EXPECT_EQ(lap.source, ks::WeightSource::graph);
}

TEST(Laplacian, TriangleSpectrum) {
  const auto lap = ks::build_graph_laplacian(triangle());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lap.laplacian);
  EXPECT_NEAR(es.eigenvalues()[0], 0.0, 1e-12);
  EXPECT_NEAR(es.eigenvalues()[1], 3.0, 1e-12);
  EXPECT_NEAR(es.eigenvalues()[2], 3.0, 1e-12);
}

TEST(Laplacian, ThreeNodePathAlgebraicConnectivity) {
  const auto lap = ks::build_graph_laplacian(path(3));
  EXPECT_NEAR(ks::testing::second_smallest(lap.laplacian), 1.0, 1e-12);
}

TEST(Laplacian, PseudoinverseIdentitiesOnRandomGraphs) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto net = ks::generate_er(30, 0.15, seed);
    // Non-uniform couplings exercise the weighted case.
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> k(0.2, 3.0);
    Eigen::VectorXd couplings(static_cast<Eigen::Index>(net.edge_count()));
    for (auto& c : couplings) c = k(rng);
    net = net.with_couplings(couplings);

    const auto lap = ks::build_graph_laplacian(net);
    const auto& l = lap.laplacian;
    const auto& p = lap.pinv;
    const auto n = l.rows();
    const Eigen::MatrixXd centering =
        Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
    EXPECT_LT((l - l.transpose()).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((l * Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((p * Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((l * p - centering).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((l * p * l - l).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((p * l * p - p).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((p - ks::testing::svd_pinv(l)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Laplacian, AlgebraicConnectivityPositiveIffConnected) {
  std::mt19937_64 rng(42);
  std::bernoulli_distribution coin(0.08);
  int connected = 0, disconnected = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ks::Edge> edges;
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t j = i + 1; j < 20; ++j)
        if (coin(rng)) edges.push_back({i, j, 1.0});
    const double l2 = ks::testing::second_smallest(ks::laplacian_matrix(20, edges));
    const bool is_conn = ks::is_connected(20, edges);
    (is_conn ? connected : disconnected)++;
    EXPECT_EQ(l2 > 1e-10, is_conn) << "trial " << trial << " lambda2=" << l2;
  }
  EXPECT_GT(connected, 0);
  EXPECT_GT(disconnected, 0);
}

TEST(NetworkValidation, RejectsDisconnected) {
  try {
    ks::Network(4, Eigen::VectorXd::Zero(4), {{0, 1, 1.0}, {2, 3, 1.0}});
    FAIL() << "expected ValidationError";
  } catch (const ks::ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("graph not connected"), std::string::npos);
  }
  // A zero coupling does not connect anything.
  EXPECT_THROW(ks::Network(3, Eigen::VectorXd::Zero(3), {{0, 1, 1.0}, {1, 2, 0.0}}), ks::ValidationError);
}

TEST(NetworkValidation, RejectsMalformedEdges) {
  EXPECT_THROW(ks::Network(2, Eigen::VectorXd::Zero(2), {{0, 0, 1.0}, {0, 1, 1.0}}), ks::ValidationError);
  EXPECT_THROW(ks::Network(2, Eigen::VectorXd::Zero(2), {{0, 1, 1.0}, {1, 0, 2.0}}), ks::ValidationError);
  EXPECT_THROW(ks::Network(2, Eigen::VectorXd::Zero(2), {{0, 1, -1.0}}), ks::ValidationError);
  EXPECT_THROW(ks::Network(2, Eigen::VectorXd::Zero(2), {{0, 5, 1.0}}), ks::ValidationError);
  EXPECT_THROW(ks::Network(2, Eigen::VectorXd::Zero(3), {{0, 1, 1.0}}), ks::ValidationError);
}

TEST(NetworkValidation, CanonicalEdgeOrderAndMeanRemoval) {
  Eigen::VectorXd omega(3);
  omega << 2.0, 1.0, 0.0;  // sums to 3
  ks::Network net(3, omega, {{2, 1, 1.0}, {1, 0, 2.0}});
  ASSERT_EQ(net.edge_count(), 2u);
  EXPECT_EQ(net.edges()[0], (ks::Edge{0, 1, 2.0}));
  EXPECT_EQ(net.edges()[1], (ks::Edge{1, 2, 1.0}));
  EXPECT_DOUBLE_EQ(net.omega()[0], 1.0);
  EXPECT_DOUBLE_EQ(net.omega()[1], 0.0);
  EXPECT_DOUBLE_EQ(net.omega()[2], -1.0);
  EXPECT_EQ(net.find_edge(2, 1), std::optional<std::size_t>(1));
  EXPECT_FALSE(net.find_edge(0, 2).has_value());
}

TEST(GenerateEr, ForcedTopology) {
  for (std::uint64_t seed : {0u, 1u, 99u}) {
    const auto net = ks::generate_er(2, 1.0, seed);
    ASSERT_EQ(net.edge_count(), 1u);
    EXPECT_EQ(net.edges()[0], (ks::Edge{0, 1, 1.0}));
  }
}

TEST(GenerateEr, ConnectedZeroSumAndSeeded) {
  const auto a = ks::generate_er(50, 0.1, 7);
  EXPECT_TRUE(ks::is_connected(50, a.edges()));
  EXPECT_LT(std::abs(a.omega().sum()), 1e-12);
  for (const auto& e : a.edges()) EXPECT_EQ(e.k, 1.0);
  const auto again = ks::generate_er(50, 0.1, 7);
  EXPECT_TRUE(a == again);
  const auto b = ks::generate_er(50, 0.1, 8);
  EXPECT_NE(a.edges(), b.edges());
}

TEST(GenerateEr, Preconditions) {
  EXPECT_THROW(ks::generate_er(1, 0.5, 0), ks::ValidationError);
  EXPECT_THROW(ks::generate_er(10, 0.0, 0), ks::ValidationError);
  EXPECT_THROW(ks::generate_er(10, 1.5, 0), ks::ValidationError);
  EXPECT_THROW(ks::generate_er(60, 0.001, 0), ks::ValidationError);  // never connected
}

TEST(GenerateTwoModule, BridgeCountAndDeterminism) {
  const std::size_t n = 15;
  const auto net = ks::generate_two_module(n, 0.4, 2, 3);
  EXPECT_EQ(net.size(), 2 * n);
  int bridges = 0;
  for (const auto& e : net.edges()) bridges += ks::is_bridge(e, n) ? 1 : 0;
  EXPECT_EQ(bridges, 2);
  const auto again = ks::generate_two_module(n, 0.4, 2, 3);
  EXPECT_EQ(net.edges(), again.edges());
  EXPECT_THROW(ks::generate_two_module(n, 0.4, 0, 3), ks::ValidationError);
  EXPECT_THROW(ks::generate_two_module(1, 0.4, 1, 3), ks::ValidationError);
}

TEST(GenerateTree, IsSpanningTree) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto net = ks::generate_tree(25, seed);
    EXPECT_EQ(net.edge_count(), 24u);
    EXPECT_TRUE(ks::is_connected(25, net.edges()));
  }
}
