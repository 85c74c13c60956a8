#ifndef KURASTAB_FLOW_HPP
#define KURASTAB_FLOW_HPP

#include <cmath>
#include <numbers>
#include <optional>

#include "network.hpp"

namespace kurastab {

/// Phase-locked state. Gauge: theta[0] == 0 exactly.
struct SteadyState {
  Eigen::VectorXd theta;
  double residual_inf = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Cut-set (DC) potential phi = L[K]^+ omega and per-edge differences
/// beta_cut = phi_v - phi_u, in network edge order.
struct DcPotential {
  Eigen::VectorXd phi;
  Eigen::VectorXd beta_cut;
};

struct SteadyStateOptions {
  double tolerance = 1e-10;
  int max_iterations = 100;
  int max_halvings = 30;
};

/// Wrap an angle into (-pi, pi].
inline double wrap_phase(double x) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::remainder(x, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  return r;
}

/// theta_v - theta_u on every edge, wrapped into (-pi, pi].
inline Eigen::VectorXd edge_phase_differences(const Network& net, const Eigen::VectorXd& theta) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(net.edge_count()));
  for (std::size_t e = 0; e < net.edge_count(); ++e) {
    const auto& edge = net.edges()[e];
    d[static_cast<Eigen::Index>(e)] =
        wrap_phase(theta[static_cast<Eigen::Index>(edge.v)] - theta[static_cast<Eigen::Index>(edge.u)]);
  }
  return d;
}

/// omega_i + sum_j K_ij sin(theta_j - theta_i) for every node.
inline Eigen::VectorXd steady_state_residual(const Network& net, const Eigen::VectorXd& theta) {
  Eigen::VectorXd r = net.omega();
  for (const auto& e : net.edges()) {
    const auto u = static_cast<Eigen::Index>(e.u);
    const auto v = static_cast<Eigen::Index>(e.v);
    const double s = e.k * std::sin(theta[v] - theta[u]);
    r[u] += s;
    r[v] -= s;
  }
  return r;
}

inline DcPotential dc_potential(const Network& net, const LaplacianBundle& lap) {
  DcPotential dc;
  dc.phi = lap.pinv * net.omega();
  dc.beta_cut.resize(static_cast<Eigen::Index>(net.edge_count()));
  for (std::size_t e = 0; e < net.edge_count(); ++e) {
    const auto& edge = net.edges()[e];
    dc.beta_cut[static_cast<Eigen::Index>(e)] =
        dc.phi[static_cast<Eigen::Index>(edge.v)] - dc.phi[static_cast<Eigen::Index>(edge.u)];
  }
  return dc;
}

/// Newton-Raphson on the grounded (node 0) steady-state equations.
///
/// Starts from the DC potential unless `init` is given; halves the step
/// while the residual 2-norm grows. Throws NumericalError when no
/// synchronous state is reached.
inline SteadyState solve_steady_state(const Network& net, const std::optional<Eigen::VectorXd>& init = std::nullopt,
                                      const SteadyStateOptions& opts = {}) {
  const auto n = static_cast<Eigen::Index>(net.size());
  Eigen::VectorXd theta;
  if (init) {
    if (init->size() != n) throw ValidationError("initial phase vector has wrong length");
    theta = *init;
  } else {
    theta = laplacian_pinv(laplacian_matrix(net.size(), net.edges())) * net.omega();
  }
  theta.array() -= theta[0];

  SteadyState state;
  Eigen::VectorXd residual = steady_state_residual(net, theta);
  for (int iter = 0;; ++iter) {
    state.residual_inf = residual.lpNorm<Eigen::Infinity>();
    state.iterations = iter;
    if (state.residual_inf < opts.tolerance) break;
    if (iter >= opts.max_iterations) throw NumericalError("no synchronous state found (Newton did not converge)");

    // Jacobian of the residual is -L(theta); drop the grounded row/column.
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n - 1, n - 1);
    for (const auto& e : net.edges()) {
      const auto u = static_cast<Eigen::Index>(e.u);
      const auto v = static_cast<Eigen::Index>(e.v);
      const double w = e.k * std::cos(theta[v] - theta[u]);
      if (u > 0) jac(u - 1, u - 1) += w;
      if (v > 0) jac(v - 1, v - 1) += w;
      if (u > 0 && v > 0) {
        jac(u - 1, v - 1) -= w;
        jac(v - 1, u - 1) -= w;
      }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    if (!(lu.rcond() > 1e-14)) throw NumericalError("no synchronous state found (singular Jacobian)");
    Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
    step.tail(n - 1) = lu.solve(residual.tail(n - 1));

    const double merit = residual.norm();
    double s = 1.0;
    bool accepted = false;
    for (int h = 0; h <= opts.max_halvings; ++h, s *= 0.5) {
      Eigen::VectorXd trial = theta + s * step;
      Eigen::VectorXd trial_residual = steady_state_residual(net, trial);
      if (trial_residual.allFinite() && trial_residual.norm() < merit) {
        theta = std::move(trial);
        residual = std::move(trial_residual);
        accepted = true;
        break;
      }
    }
    if (!accepted) throw NumericalError("no synchronous state found (line search failed)");
  }
  state.theta = std::move(theta);
  state.converged = true;
  return state;
}

/// Per-edge cycle-space remainder sin(dtheta*) - dphi and its RMSE.
struct FlowDecomposition {
  SteadyState state;
  DcPotential dc;
  Eigen::VectorXd cycle_residual;
  double rmse = 0.0;
};

inline FlowDecomposition flow_decomposition_error(const Network& net) {
  FlowDecomposition out;
  out.state = solve_steady_state(net);
  out.dc = dc_potential(net, build_graph_laplacian(net));
  const Eigen::VectorXd dtheta = edge_phase_differences(net, out.state.theta);
  out.cycle_residual = dtheta.array().sin().matrix() - out.dc.beta_cut;
  out.rmse = out.cycle_residual.size() == 0
                 ? 0.0
                 : std::sqrt(out.cycle_residual.squaredNorm() / static_cast<double>(out.cycle_residual.size()));
  return out;
}

}  // namespace kurastab

#endif  // KURASTAB_FLOW_HPP
