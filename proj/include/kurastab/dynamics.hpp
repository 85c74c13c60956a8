#ifndef KURASTAB_DYNAMICS_HPP
#define KURASTAB_DYNAMICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "spectral.hpp"

namespace kurastab {

enum class Model { first_order, second_order };

inline const char* to_string(Model m) { return m == Model::first_order ? "first_order" : "second_order"; }

struct SimConfig {
  Model model = Model::first_order;
  double inertia = 0.2;
  double damping = 1.0;
  double dt = 1e-3;
  double t_end = 10.0;
  double disturbance_sigma = 0.05;
  std::uint64_t seed = 0;
  int sample_every = 10;    // integration steps between recorded samples
  bool keep_theta = false;  // store phase snapshots at every sample

  void validate() const {
    if (!(dt > 0.0)) throw ValidationError("dt must be positive");
    if (!(t_end >= 0.0)) throw ValidationError("t_end must be non-negative");
    if (sample_every < 1) throw ValidationError("sample_every must be at least 1");
    if (!(disturbance_sigma >= 0.0)) throw ValidationError("disturbance sigma must be non-negative");
    if (model == Model::second_order && !(inertia > 0.0 && damping > 0.0)) {
      throw ValidationError("second-order model needs positive inertia and damping");
    }
  }
};

struct SimTrace {
  std::vector<double> t;
  std::vector<double> epsilon;            // sum_i |theta_i(t) - theta_i*|
  std::vector<Eigen::VectorXd> theta;     // only with keep_theta
};

/// Steady state shifted into the frame the trajectory settles in. The
/// dynamics conserve M sum(theta') + D sum(theta) (first order: sum(theta)),
/// so the limit differs from theta* by a uniform rotation.
inline Eigen::VectorXd settled_reference(const Eigen::VectorXd& theta_star, const Eigen::VectorXd& theta0,
                                         const std::optional<Eigen::VectorXd>& velocity0, const SimConfig& cfg) {
  double mean = theta0.mean();
  if (cfg.model == Model::second_order && velocity0) mean += cfg.inertia / cfg.damping * velocity0->mean();
  return theta_star.array() + (mean - theta_star.mean());
}

/// Fixed-step RK4 integration of the first-order model
///   theta_i' = omega_i + sum_j K_ij sin(theta_j - theta_i)
/// or the second-order model M theta_i'' + D theta_i' = (same right side).
inline SimTrace simulate(const Network& net, const SteadyState& state, const Eigen::VectorXd& theta0,
                         const std::optional<Eigen::VectorXd>& velocity0, const SimConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<Eigen::Index>(net.size());
  if (theta0.size() != n) throw ValidationError("theta0 has wrong length");
  if (velocity0 && velocity0->size() != n) throw ValidationError("initial velocity has wrong length");
  const Eigen::VectorXd reference = settled_reference(state.theta, theta0, velocity0, cfg);
  const auto steps = static_cast<long long>(std::llround(cfg.t_end / cfg.dt));

  SimTrace trace;
  const auto record = [&](long long step, const Eigen::VectorXd& theta) {
    trace.t.push_back(static_cast<double>(step) * cfg.dt);
    trace.epsilon.push_back((theta - reference).lpNorm<1>());
    if (cfg.keep_theta) trace.theta.push_back(theta);
  };

  const double h = cfg.dt;
  if (cfg.model == Model::first_order) {
    Eigen::VectorXd theta = theta0;
    record(0, theta);
    for (long long step = 1; step <= steps; ++step) {
      const Eigen::VectorXd k1 = steady_state_residual(net, theta);
      const Eigen::VectorXd k2 = steady_state_residual(net, theta + 0.5 * h * k1);
      const Eigen::VectorXd k3 = steady_state_residual(net, theta + 0.5 * h * k2);
      const Eigen::VectorXd k4 = steady_state_residual(net, theta + h * k3);
      theta += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!theta.allFinite()) throw NumericalError("integration diverged");
      if (step % cfg.sample_every == 0 || step == steps) record(step, theta);
    }
  } else {
    const double m = cfg.inertia, d = cfg.damping;
    Eigen::VectorXd theta = theta0;
    Eigen::VectorXd vel = velocity0 ? *velocity0 : Eigen::VectorXd::Zero(n);
    const auto accel = [&](const Eigen::VectorXd& th, const Eigen::VectorXd& v) {
      return Eigen::VectorXd((steady_state_residual(net, th) - d * v) / m);
    };
    record(0, theta);
    for (long long step = 1; step <= steps; ++step) {
      const Eigen::VectorXd a1 = accel(theta, vel);
      const Eigen::VectorXd v1 = vel;
      const Eigen::VectorXd v2 = vel + 0.5 * h * a1;
      const Eigen::VectorXd a2 = accel(theta + 0.5 * h * v1, v2);
      const Eigen::VectorXd v3 = vel + 0.5 * h * a2;
      const Eigen::VectorXd a3 = accel(theta + 0.5 * h * v2, v3);
      const Eigen::VectorXd v4 = vel + h * a3;
      const Eigen::VectorXd a4 = accel(theta + h * v3, v4);
      theta += (h / 6.0) * (v1 + 2.0 * v2 + 2.0 * v3 + v4);
      vel += (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
      if (!theta.allFinite() || !vel.allFinite()) throw NumericalError("integration diverged");
      if (step % cfg.sample_every == 0 || step == steps) record(step, theta);
    }
  }
  return trace;
}

inline SimTrace simulate(const Network& net, const Eigen::VectorXd& theta0,
                         const std::optional<Eigen::VectorXd>& velocity0, const SimConfig& cfg) {
  return simulate(net, solve_steady_state(net), theta0, velocity0, cfg);
}

/// Exponential decay rate of epsilon(t): minus the least-squares slope of
/// log epsilon over the final `tail` fraction of the horizon. NaN when the
/// tail holds fewer than two positive samples.
inline double fit_decay_rate(const SimTrace& trace, double tail = 0.5) {
  if (trace.t.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double start = trace.t.back() * (1.0 - tail);
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < trace.t.size(); ++i) {
    if (trace.t[i] < start) continue;
    if (!(trace.epsilon[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double x = trace.t[i], y = std::log(trace.epsilon[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++count;
  }
  if (count < 2) return std::numeric_limits<double>::quiet_NaN();
  const double denom = count * sxx - sx * sx;
  if (!(denom > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return -(count * sxy - sx * sy) / denom;
}

struct DisturbanceResponse {
  SteadyState state;
  std::vector<SimTrace> traces;
  std::vector<double> rates;
  double median_rate = std::numeric_limits<double>::quiet_NaN();
};

inline double median(std::vector<double> x) {
  std::erase_if(x, [](double v) { return std::isnan(v); });
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto mid = x.size() / 2;
  std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(mid), x.end());
  double m = x[mid];
  if (x.size() % 2 == 0) m = 0.5 * (m + *std::max_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(mid)));
  return m;
}

/// Gaussian phase kicks delta_i ~ N(0, sigma^2) applied to theta*, one
/// integration per trial. The kick's mean is removed: a uniform shift is a
/// neutral rotation that never decays. Trial k draws from a generator seeded
/// with (seed, k), so results do not depend on trial order.
inline DisturbanceResponse disturbance_response(const Network& net, const SimConfig& cfg, int n_trials) {
  cfg.validate();
  if (n_trials < 0) throw ValidationError("n_trials must be non-negative");
  DisturbanceResponse out;
  out.state = solve_steady_state(net);
  const auto n = static_cast<Eigen::Index>(net.size());
  for (int trial = 0; trial < n_trials; ++trial) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(trial)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd delta(n);
    for (auto& x : delta) x = cfg.disturbance_sigma * normal(rng);
    delta.array() -= delta.mean();
    auto trace = simulate(net, out.state, out.state.theta + delta, std::nullopt, cfg);
    out.rates.push_back(fit_decay_rate(trace));
    out.traces.push_back(std::move(trace));
  }
  out.median_rate = median(out.rates);
  return out;
}

}  // namespace kurastab

#endif  // KURASTAB_DYNAMICS_HPP
