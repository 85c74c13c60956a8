#ifndef KURASTAB_SPECTRAL_HPP
#define KURASTAB_SPECTRAL_HPP

#include <cmath>
#include <complex>
#include <limits>
#include <utility>

#include <Eigen/Eigenvalues>

#include "flow.hpp"

namespace kurastab {

/// Edge weights of a (state-dependent) Laplacian; `edges[e].k` holds W_e.
struct StateWeights {
  std::size_t node_count = 0;
  std::vector<Edge> edges;
  WeightSource source = WeightSource::graph;
};

inline StateWeights graph_weights(const Network& net) { return {net.size(), net.edges(), WeightSource::graph}; }

/// W_ij = K_ij cos(theta_j* - theta_i*).
inline StateWeights exact_weights(const Network& net, const SteadyState& state) {
  if (!state.converged) throw ValidationError("exact weights need a converged steady state");
  StateWeights w{net.size(), net.edges(), WeightSource::exact_state};
  for (auto& e : w.edges) {
    e.k *= std::cos(state.theta[static_cast<Eigen::Index>(e.v)] - state.theta[static_cast<Eigen::Index>(e.u)]);
  }
  return w;
}

/// W~_ij = K_ij sqrt(1 - (phi_j - phi_i)^2); needs |phi_j - phi_i| < 1 everywhere.
inline StateWeights approx_weights(const Network& net, const Eigen::VectorXd& beta_cut) {
  StateWeights w{net.size(), net.edges(), WeightSource::approx_state};
  for (std::size_t e = 0; e < w.edges.size(); ++e) {
    const double p = beta_cut[static_cast<Eigen::Index>(e)];
    if (!(std::abs(p) < 1.0)) throw NumericalError("approximation infeasible; destress required");
    w.edges[e].k *= std::sqrt(1.0 - p * p);
  }
  return w;
}

inline StateWeights approx_weights(const Network& net, const DcPotential& dc) {
  return approx_weights(net, dc.beta_cut);
}

struct SpectralResult {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // orthonormal columns
  double lambda2 = 0.0;
  Eigen::VectorXd v2;
  double degeneracy_gap = 0.0;  // lambda3 - lambda2
  bool degenerate = false;      // gap below 1e-8
  bool unstable = false;        // some weight negative or lambda1 < -1e-9
};

inline constexpr double kDegeneracyThreshold = 1e-8;

/// Flip `v` so its largest-magnitude entry (first on ties) is positive.
inline void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index arg = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  }
  if (v[arg] < 0.0) v = -v;
}

inline SpectralResult eig_laplacian(const Eigen::MatrixXd& lap) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
  if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
  SpectralResult out;
  out.eigenvalues = solver.eigenvalues();
  out.eigenvectors = solver.eigenvectors();
  for (Eigen::Index j = 0; j < out.eigenvectors.cols(); ++j) fix_sign(out.eigenvectors.col(j));
  const auto n = out.eigenvalues.size();
  out.lambda2 = n > 1 ? out.eigenvalues[1] : 0.0;
  out.v2 = n > 1 ? Eigen::VectorXd(out.eigenvectors.col(1)) : Eigen::VectorXd();
  out.degeneracy_gap = n > 2 ? out.eigenvalues[2] - out.eigenvalues[1] : std::numeric_limits<double>::infinity();
  out.degenerate = out.degeneracy_gap < kDegeneracyThreshold;
  out.unstable = n > 0 && out.eigenvalues[0] < -1e-9;
  return out;
}

inline SpectralResult eig_laplacian(const StateWeights& weights) {
  auto out = eig_laplacian(laplacian_matrix(weights.node_count, weights.edges));
  for (const auto& e : weights.edges) out.unstable = out.unstable || e.k < 0.0;
  return out;
}

/// mu_{j+-} = -D/2M +- (1/2) sqrt((D/M)^2 - 4 lambda_j / M); first is the + branch.
inline std::pair<std::complex<double>, std::complex<double>> second_order_spectrum(double lambda_j, double damping,
                                                                                    double inertia) {
  const double ratio = damping / inertia;
  const std::complex<double> root = std::sqrt(std::complex<double>(ratio * ratio - 4.0 * lambda_j / inertia, 0.0));
  return {-0.5 * ratio + 0.5 * root, -0.5 * ratio - 0.5 * root};
}

/// Linearization of M theta'' + D theta' = omega + sum K sin(.) about a
/// steady state, in (velocity, phase) block order:
/// [ -(D/M) I   -(1/M) L ]
/// [    I          0     ]
inline Eigen::MatrixXd jacobian_2nd_order(const StateWeights& weights, double damping, double inertia) {
  if (!(inertia > 0.0) || !(damping > 0.0)) throw ValidationError("inertia and damping must be positive");
  const auto n = static_cast<Eigen::Index>(weights.node_count);
  const Eigen::MatrixXd lap = laplacian_matrix(weights.node_count, weights.edges);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  jac.topLeftCorner(n, n).diagonal().setConstant(-damping / inertia);
  jac.topRightCorner(n, n) = -lap / inertia;
  jac.bottomLeftCorner(n, n).setIdentity();
  return jac;
}

/// Kuramoto order parameter r = |mean_j exp(i theta_j)|.
inline double order_parameter(const Eigen::VectorXd& theta) {
  if (theta.size() == 0) return 0.0;
  std::complex<double> sum{0.0, 0.0};
  for (Eigen::Index j = 0; j < theta.size(); ++j) sum += std::polar(1.0, theta[j]);
  return std::abs(sum) / static_cast<double>(theta.size());
}

/// Spectrum of L(theta*) at a converged steady state.
inline SpectralResult exact_state_spectrum(const Network& net, const SteadyState& state) {
  return eig_laplacian(exact_weights(net, state));
}

}  // namespace kurastab

#endif  // KURASTAB_SPECTRAL_HPP
