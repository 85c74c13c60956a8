#include <algorithm>
#include <numbers>

#include <gtest/gtest.h>

#include "support.hpp"

namespace ks = kurastab;

namespace {

ks::StateWeights two_node_weights(double w) { return {2, {{0, 1, w}}, ks::WeightSource::exact_state}; }

// Greedy nearest matching between two eigenvalue multisets; returns the
// worst matched distance.
double multiset_distance(std::vector<std::complex<double>> a, std::vector<std::complex<double>> b) {
  double worst = 0.0;
  for (const auto& x : a) {
    auto best = std::min_element(b.begin(), b.end(),
                                 [&](const auto& p, const auto& q) { return std::abs(p - x) < std::abs(q - x); });
    worst = std::max(worst, std::abs(*best - x));
    b.erase(best);
  }
  return worst;
}

}  // namespace

TEST(EigLaplacian, TwoNodeClosedForm) {
  const auto s = ks::eig_laplacian(two_node_weights(0.8));
  EXPECT_NEAR(s.lambda2, 1.6, 1e-14);
  EXPECT_NEAR(s.v2[0], 1.0 / std::sqrt(2.0), 1e-14);  // sign fixed: first of the tied largest entries positive
  EXPECT_NEAR(s.v2[1], -1.0 / std::sqrt(2.0), 1e-14);
  EXPECT_FALSE(s.degenerate);
}

TEST(EigLaplacian, TriangleIsFlaggedDegenerate) {
  const ks::StateWeights w{3, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}}, ks::WeightSource::graph};
  const auto s = ks::eig_laplacian(w);
  EXPECT_NEAR(s.lambda2, 3.0, 1e-12);
  EXPECT_NEAR(s.degeneracy_gap, 0.0, 1e-12);
  EXPECT_TRUE(s.degenerate);
}

TEST(EigLaplacian, ZeroFrequencyStateMatchesGraph) {
  auto net = ks::generate_er(50, 0.1, 3);
  net = net.with_omega(Eigen::VectorXd::Zero(50));
  const auto state = ks::solve_steady_state(net);
  const auto exact = ks::eig_laplacian(ks::exact_weights(net, state));
  const auto graph = ks::eig_laplacian(ks::graph_weights(net));
  EXPECT_EQ(exact.lambda2, graph.lambda2);
}

TEST(EigLaplacian, InvariantsAndRayleighMinimum) {
  std::mt19937_64 rng(17);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto net = ks::testing::with_dc_stress(ks::generate_er(8, 0.5, seed), 0.5);
    const auto s = ks::eig_laplacian(ks::approx_weights(net, ks::dc_potential(net, ks::build_graph_laplacian(net))));
    EXPECT_LE(std::abs(s.eigenvalues[0]), 1e-9);
    EXPECT_GT(s.lambda2, 0.0);
    EXPECT_LT(std::abs(s.v2.sum()), 1e-9);
    EXPECT_NEAR(s.v2.norm(), 1.0, 1e-12);

    // Random-restart projected gradient descent on x^T L x over unit x orthogonal to 1.
    const Eigen::MatrixXd lap = ks::laplacian_matrix(net.size(), ks::approx_weights(net, ks::dc_potential(net, ks::build_graph_laplacian(net))).edges);
    std::normal_distribution<double> normal;
    double best = std::numeric_limits<double>::infinity();
    const double step = 0.5 / lap.diagonal().maxCoeff();
    for (int restart = 0; restart < 20; ++restart) {
      Eigen::VectorXd x(8);
      for (auto& xi : x) xi = normal(rng);
      for (int it = 0; it < 20000; ++it) {
        x.array() -= x.mean();
        x.normalize();
        x -= step * (lap * x - x.dot(lap * x) * x);
      }
      x.array() -= x.mean();
      x.normalize();
      best = std::min(best, x.dot(lap * x));
    }
    EXPECT_NEAR(best, s.lambda2, 1e-6) << "seed " << seed;
  }
}

TEST(EigLaplacian, NegativeWeightFlagsInstability) {
  const ks::StateWeights w{3, {{0, 1, 1.0}, {1, 2, -0.2}}, ks::WeightSource::exact_state};
  EXPECT_TRUE(ks::eig_laplacian(w).unstable);
}

TEST(SecondOrderSpectrum, ClosedForms) {
  auto [plus, minus] = ks::second_order_spectrum(1.0, 1.0, 0.2);
  EXPECT_NEAR(plus.real(), -2.5 + std::sqrt(5.0) / 2.0, 1e-14);
  EXPECT_NEAR(plus.real(), -1.381966011250105, 1e-12);
  EXPECT_NEAR(minus.real(), -3.618033988749895, 1e-12);
  EXPECT_EQ(plus.imag(), 0.0);

  std::tie(plus, minus) = ks::second_order_spectrum(1.0, 1.0, 1.0);
  EXPECT_NEAR(plus.real(), -0.5, 1e-15);
  EXPECT_NEAR(plus.imag(), std::sqrt(3.0) / 2.0, 1e-15);
  EXPECT_NEAR(minus.imag(), -std::sqrt(3.0) / 2.0, 1e-15);

  std::tie(plus, minus) = ks::second_order_spectrum(0.0, 1.0, 0.2);
  EXPECT_EQ(plus, std::complex<double>(0.0, 0.0));
  EXPECT_NEAR(minus.real(), -5.0, 1e-15);
}

TEST(Jacobian2ndOrder, TwoNodeSpectrum) {
  const auto jac = ks::jacobian_2nd_order(two_node_weights(0.8), 1.0, 0.2);
  ASSERT_EQ(jac.rows(), 4);
  Eigen::EigenSolver<Eigen::MatrixXd> es(jac);
  std::vector<std::complex<double>> got(es.eigenvalues().begin(), es.eigenvalues().end());
  std::vector<std::complex<double>> want;
  for (double l : {0.0, 1.6}) {
    auto [p, m] = ks::second_order_spectrum(l, 1.0, 0.2);
    want.push_back(p);
    want.push_back(m);
  }
  EXPECT_LT(multiset_distance(got, want), 1e-12);
}

TEST(Jacobian2ndOrder, DiagonalizedByLaplacianEigenvectors) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto net = ks::testing::with_dc_stress(ks::generate_er(20, 0.3, seed), 0.5);
    const auto w = ks::exact_weights(net, ks::solve_steady_state(net));
    const auto jac = ks::jacobian_2nd_order(w, 1.0, 0.2);
    EXPECT_EQ(jac.rows(), 40);
    Eigen::EigenSolver<Eigen::MatrixXd> es(jac);
    std::vector<std::complex<double>> got(es.eigenvalues().begin(), es.eigenvalues().end());
    std::vector<std::complex<double>> want;
    for (double l : ks::eig_laplacian(w).eigenvalues) {
      auto [p, m] = ks::second_order_spectrum(l, 1.0, 0.2);
      want.push_back(p);
      want.push_back(m);
    }
    EXPECT_LT(multiset_distance(got, want), 1e-8);
  }
}

TEST(Jacobian2ndOrder, SlowRateIncreasesWithLambda2BelowCriticalDamping) {
  const double d = 1.0, m = 0.2, h = 1e-6;
  for (double l = 0.05; l < d * d / (4 * m) - 0.05; l += 0.05) {
    const double lo = ks::second_order_spectrum(l - h, d, m).first.real();
    const double hi = ks::second_order_spectrum(l + h, d, m).first.real();
    EXPECT_LT(hi, lo) << "mu2+ must move left (faster decay) as lambda2 grows, l=" << l;
  }
}

TEST(OrderParameter, Examples) {
  EXPECT_DOUBLE_EQ(ks::order_parameter(Eigen::VectorXd::Zero(5)), 1.0);
  Eigen::VectorXd quad(4);
  quad << 0, std::numbers::pi / 2, std::numbers::pi, 3 * std::numbers::pi / 2;
  EXPECT_NEAR(ks::order_parameter(quad), 0.0, 1e-15);
  Eigen::VectorXd pair(2);
  pair << 0, std::numbers::pi / 3;
  EXPECT_NEAR(ks::order_parameter(pair), std::sqrt(3.0) / 2.0, 1e-15);
}

TEST(ApproxWeights, InfeasibleEdgeRejected) {
  Eigen::VectorXd omega(2);
  omega << 1.2, -1.2;
  const ks::Network net(2, omega, {{0, 1, 1.0}});
  EXPECT_THROW(ks::approx_weights(net, ks::dc_potential(net, ks::build_graph_laplacian(net))), ks::NumericalError);
}
