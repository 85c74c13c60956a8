// Test-only oracles. Everything here is computed along routes that do not
// share code with the library paths under test.
#ifndef KURASTAB_TESTS_SUPPORT_HPP
#define KURASTAB_TESTS_SUPPORT_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "kurastab/kurastab.hpp"

namespace kurastab::testing {

inline Eigen::MatrixXd dense_laplacian(std::size_t n, const std::vector<Edge>& edges, const Eigen::VectorXd& w) {
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto u = static_cast<Eigen::Index>(edges[e].u);
    const auto v = static_cast<Eigen::Index>(edges[e].v);
    const double x = w[static_cast<Eigen::Index>(e)];
    lap(u, v) -= x;
    lap(v, u) -= x;
    lap(u, u) += x;
    lap(v, v) += x;
  }
  return lap;
}

// SVD-based pseudoinverse, independent of the rank-one shift route.
inline Eigen::MatrixXd svd_pinv(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd s = svd.singularValues();
  const double cut = 1e-10 * s[0];
  for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = s[i] > cut ? 1.0 / s[i] : 0.0;
  return svd.matrixV() * s.asDiagonal() * svd.matrixU().transpose();
}

inline double second_smallest(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[1];
}

// lambda2(L~(phi)) from scratch for the given couplings and frequencies.
inline double approx_lambda2_oracle(std::size_t n, const std::vector<Edge>& edges, const Eigen::VectorXd& k,
                                    const Eigen::VectorXd& omega) {
  const Eigen::MatrixXd lk = dense_laplacian(n, edges, k);
  const Eigen::VectorXd phi = svd_pinv(lk) * omega;
  Eigen::VectorXd w(k.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double d = phi[static_cast<Eigen::Index>(edges[e].v)] - phi[static_cast<Eigen::Index>(edges[e].u)];
    w[static_cast<Eigen::Index>(e)] = k[static_cast<Eigen::Index>(e)] * std::sqrt(1.0 - d * d);
  }
  return second_smallest(dense_laplacian(n, edges, w));
}

inline Eigen::VectorXd fd_grad_omega(const Network& net, double h = 1e-6) {
  const Eigen::VectorXd k = net.couplings();
  Eigen::VectorXd g(net.omega().size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    Eigen::VectorXd plus = net.omega(), minus = net.omega();
    plus[i] += h;
    minus[i] -= h;
    g[i] = (approx_lambda2_oracle(net.size(), net.edges(), k, plus) -
            approx_lambda2_oracle(net.size(), net.edges(), k, minus)) /
           (2.0 * h);
  }
  return g;
}

inline Eigen::VectorXd fd_grad_coupling(const Network& net, double h = 1e-6) {
  const Eigen::VectorXd k = net.couplings();
  Eigen::VectorXd g(k.size());
  for (Eigen::Index e = 0; e < k.size(); ++e) {
    Eigen::VectorXd plus = k, minus = k;
    plus[e] += h;
    minus[e] -= h;
    g[e] = (approx_lambda2_oracle(net.size(), net.edges(), plus, net.omega()) -
            approx_lambda2_oracle(net.size(), net.edges(), minus, net.omega())) /
           (2.0 * h);
  }
  return g;
}

inline double relative_error(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  const double scale = std::max(want.norm(), 1e-300);
  return (got - want).norm() / scale;
}

// Gaussian frequencies scaled so the largest |dphi| equals `max_dphi`.
inline Network with_dc_stress(const Network& net, double max_dphi) {
  const auto dc = dc_potential(net, build_graph_laplacian(net));
  const double m = dc.beta_cut.lpNorm<Eigen::Infinity>();
  if (m == 0.0) return net;
  return net.with_omega(net.omega() * (max_dphi / m));
}

// Relaxation of theta' = omega + sum K sin(theta_j - theta_i) by forward
// Euler; its fixed points coincide with the steady states.
inline Eigen::VectorXd relax_first_order(const Network& net, double t_end, double dt) {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(net.omega().size());
  const auto steps = static_cast<long>(t_end / dt);
  for (long s = 0; s < steps; ++s) {
    Eigen::VectorXd rate = net.omega();
    for (const auto& e : net.edges()) {
      const double f = e.k * std::sin(theta[static_cast<Eigen::Index>(e.v)] - theta[static_cast<Eigen::Index>(e.u)]);
      rate[static_cast<Eigen::Index>(e.u)] += f;
      rate[static_cast<Eigen::Index>(e.v)] -= f;
    }
    theta += dt * rate;
  }
  theta.array() -= theta[0];
  return theta;
}

}  // namespace kurastab::testing

#endif  // KURASTAB_TESTS_SUPPORT_HPP
