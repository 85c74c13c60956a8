#include <filesystem>

#include <gtest/gtest.h>

#include "support.hpp"

namespace ks = kurastab;

namespace {

ks::Network two_node(double k, double w = 0.0) {
  Eigen::VectorXd omega(2);
  omega << w, -w;
  return ks::Network(2, omega, {{0, 1, k}});
}

Eigen::VectorXd kick(double a) {
  Eigen::VectorXd d(2);
  d << a, -a;
  return d;
}

}  // namespace

TEST(Simulate, FixedPointStaysPut) {
  const auto net = ks::destress(ks::generate_er(20, 0.2, 3));
  const auto state = ks::solve_steady_state(net);
  ks::SimConfig cfg;
  cfg.t_end = 5.0;
  for (const auto model : {ks::Model::first_order, ks::Model::second_order}) {
    cfg.model = model;
    const auto trace = ks::simulate(net, state, state.theta, std::nullopt, cfg);
    for (const double e : trace.epsilon) EXPECT_LT(e, 1e-9);
  }
}

TEST(Simulate, FirstOrderTwoNodeRate) {
  // Linearization x' = -2K cos(dtheta*) x; omega = 0 gives rate 2K.
  const auto net = two_node(1.0);
  ks::SimConfig cfg;
  cfg.t_end = 6.0;
  const auto state = ks::solve_steady_state(net);
  const auto trace = ks::simulate(net, state, state.theta + kick(0.01), std::nullopt, cfg);
  EXPECT_NEAR(ks::fit_decay_rate(trace), 2.0, 0.04);
}

TEST(Simulate, SecondOrderTwoNodeRate) {
  // M x'' + D x' + lambda x = 0 with lambda = 2K = 1, M = 0.2, D = 1:
  // slowest root (-D + sqrt(D^2 - 4 M lambda)) / (2M).
  const auto net = two_node(0.5);
  ks::SimConfig cfg;
  cfg.model = ks::Model::second_order;
  cfg.t_end = 8.0;
  const double expected = -(-1.0 + std::sqrt(1.0 - 4.0 * 0.2 * 1.0)) / (2.0 * 0.2);
  const auto state = ks::solve_steady_state(net);
  const auto trace = ks::simulate(net, state, state.theta + kick(0.01), std::nullopt, cfg);
  EXPECT_NEAR(ks::fit_decay_rate(trace), expected, 0.05 * expected);
}

TEST(Simulate, ConservedPhaseSum) {
  const auto net = ks::destress(ks::generate_er(15, 0.3, 8));
  const auto state = ks::solve_steady_state(net);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0.0, 0.3);
  Eigen::VectorXd theta0 = state.theta, vel0(15);
  for (auto& x : theta0) x += normal(rng);
  for (auto& x : vel0) x = normal(rng);

  ks::SimConfig cfg;
  cfg.t_end = 3.0;
  cfg.keep_theta = true;
  auto trace = ks::simulate(net, state, theta0, std::nullopt, cfg);
  for (const auto& th : trace.theta) EXPECT_NEAR(th.sum(), theta0.sum(), 1e-10);

  // Second order conserves M sum(theta') + D sum(theta); theta' -> 0, so
  // the limit has sum(theta) = sum(theta0) + (M/D) sum(v0).
  cfg.model = ks::Model::second_order;
  cfg.t_end = 80.0;
  trace = ks::simulate(net, state, theta0, vel0, cfg);
  const double settled = theta0.sum() + cfg.inertia / cfg.damping * vel0.sum();
  EXPECT_NEAR(trace.theta.back().sum(), settled, 1e-8);
  EXPECT_LT(trace.epsilon.back(), 1e-8);
}

TEST(Simulate, SmallKicksRespondLinearly) {
  const auto net = ks::destress(ks::generate_er(20, 0.2, 11));
  ks::SimConfig cfg;
  cfg.t_end = 4.0;
  cfg.seed = 5;
  cfg.disturbance_sigma = 1e-5;
  const auto a = ks::disturbance_response(net, cfg, 1);
  cfg.disturbance_sigma = 2e-5;
  const auto b = ks::disturbance_response(net, cfg, 1);
  for (std::size_t i = 0; i < a.traces[0].epsilon.size(); ++i) {
    EXPECT_NEAR(b.traces[0].epsilon[i] / 2.0, a.traces[0].epsilon[i], 1e-4 * a.traces[0].epsilon[0]);
  }
  EXPECT_NEAR(a.rates[0], b.rates[0], 1e-3 * a.rates[0]);
}

TEST(Simulate, ZeroDisturbanceIsSilent) {
  const auto net = ks::destress(ks::generate_er(10, 0.4, 2));
  ks::SimConfig cfg;
  cfg.t_end = 1.0;
  cfg.disturbance_sigma = 0.0;
  const auto r = ks::disturbance_response(net, cfg, 3);
  ASSERT_EQ(r.traces.size(), 3u);
  for (const auto& tr : r.traces) {
    for (const double e : tr.epsilon) EXPECT_LT(e, 1e-9);
  }
}

TEST(Simulate, TrialsAreReproducible) {
  const auto net = ks::destress(ks::generate_er(10, 0.4, 2));
  ks::SimConfig cfg;
  cfg.t_end = 1.0;
  cfg.seed = 42;
  const auto a = ks::disturbance_response(net, cfg, 4);
  const auto b = ks::disturbance_response(net, cfg, 2);
  EXPECT_EQ(a.traces[1].epsilon, b.traces[1].epsilon);
}

TEST(Simulate, ExplicitStepDiverges) {
  ks::SimConfig cfg;
  cfg.model = ks::Model::second_order;
  cfg.dt = 10.0;
  cfg.t_end = 1000.0;
  const auto net = two_node(1.0);
  try {
    ks::simulate(net, kick(0.1), std::nullopt, cfg);
    FAIL();
  } catch (const ks::NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("integration diverged"), std::string::npos);
  }
}

TEST(Simulate, InvalidConfigRejected) {
  ks::SimConfig cfg;
  cfg.dt = 0.0;
  EXPECT_THROW(cfg.validate(), ks::ValidationError);
  cfg = {};
  cfg.model = ks::Model::second_order;
  cfg.inertia = 0.0;
  EXPECT_THROW(cfg.validate(), ks::ValidationError);
}

TEST(DecayRate, ExactExponential) {
  ks::SimTrace tr;
  for (int i = 0; i <= 100; ++i) {
    tr.t.push_back(0.1 * i);
    tr.epsilon.push_back(3.0 * std::exp(-0.7 * 0.1 * i));
  }
  EXPECT_NEAR(ks::fit_decay_rate(tr), 0.7, 1e-12);
  tr.epsilon.back() = 0.0;
  EXPECT_TRUE(std::isnan(ks::fit_decay_rate(tr)));
}

TEST(DisturbanceResponse, Rts96OptimizedDecaysFaster) {
  const auto net = ks::load_network(std::filesystem::path(KURASTAB_DATA_DIR) / "rts96.json");
  ks::OptimizerConfig ocfg;
  ocfg.max_iters = 15;
  ocfg.exact_every = 0;
  const auto opt = ks::maximize_unconstrained(net, ocfg).net;

  ks::SimConfig cfg;
  cfg.dt = 2e-3;
  cfg.t_end = 20.0;
  cfg.seed = 1;
  for (const auto model : {ks::Model::first_order, ks::Model::second_order}) {
    cfg.model = model;
    const auto before = ks::disturbance_response(net, cfg, 5);
    const auto after = ks::disturbance_response(opt, cfg, 5);
    EXPECT_GT(after.median_rate, before.median_rate) << ks::to_string(model);
    if (model == ks::Model::first_order) {
      EXPECT_NEAR(before.median_rate, ks::exact_lambda2(net), 0.02 * before.median_rate);
    }
  }
}
