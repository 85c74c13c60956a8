#ifndef KURASTAB_SENSITIVITY_HPP
#define KURASTAB_SENSITIVITY_HPP

#include <cmath>

#include "spectral.hpp"

namespace kurastab {

/// Rank-one factors of the per-edge quadratic forms A^(ij) = b b^T with
/// b_k = L+_jk - L+_ik, so that omega^T A^(ij) omega = (phi_j - phi_i)^2.
/// Column e of `b` belongs to edge e of the network; no A^(ij) is ever
/// formed explicitly.
class QuadFormCache {
 public:
  QuadFormCache(const Network& net, const LaplacianBundle& lap) {
    const auto n = static_cast<Eigen::Index>(net.size());
    if (lap.pinv.rows() != n) throw ValidationError("Laplacian bundle does not match network size");
    b_.resize(n, static_cast<Eigen::Index>(net.edge_count()));
    for (std::size_t e = 0; e < net.edge_count(); ++e) {
      const auto& edge = net.edges()[e];
      b_.col(static_cast<Eigen::Index>(e)) =
          lap.pinv.col(static_cast<Eigen::Index>(edge.v)) - lap.pinv.col(static_cast<Eigen::Index>(edge.u));
    }
  }

  const Eigen::MatrixXd& b() const { return b_; }
  Eigen::Index edge_count() const { return b_.cols(); }

  /// b_e . omega = phi_v - phi_u for every edge.
  Eigen::VectorXd projections(const Eigen::VectorXd& omega) const { return b_.transpose() * omega; }

  /// omega^T A^(e) omega.
  double quad_form(Eigen::Index e, const Eigen::VectorXd& omega) const {
    const double p = b_.col(e).dot(omega);
    return p * p;
  }

  /// A^(e) omega = b_e (b_e . omega).
  Eigen::VectorXd a_times_omega(Eigen::Index e, const Eigen::VectorXd& omega) const {
    return b_.col(e) * b_.col(e).dot(omega);
  }

 private:
  Eigen::MatrixXd b_;
};

/// lambda2 of the approximate state Laplacian L~(phi) at an arbitrary omega.
struct ApproxEvaluation {
  Eigen::VectorXd dphi;
  SpectralResult spectrum;
};

inline ApproxEvaluation evaluate_approx(const Network& net, const QuadFormCache& cache, const Eigen::VectorXd& omega) {
  ApproxEvaluation out;
  out.dphi = cache.projections(omega);
  out.spectrum = eig_laplacian(approx_weights(net, out.dphi));
  return out;
}

inline ApproxEvaluation evaluate_approx(const Network& net, const QuadFormCache& cache) {
  return evaluate_approx(net, cache, net.omega());
}

namespace detail {

inline void require_feasible(const Eigen::VectorXd& p) {
  if (!((p.array().abs() < 1.0).all())) throw NumericalError("approximation infeasible; destress required");
}

inline Eigen::VectorXd squared_eigvec_differences(const Network& net, const Eigen::VectorXd& v2) {
  if (v2.size() != static_cast<Eigen::Index>(net.size())) throw ValidationError("eigenvector length mismatch");
  Eigen::VectorXd d(static_cast<Eigen::Index>(net.edge_count()));
  for (std::size_t e = 0; e < net.edge_count(); ++e) {
    const auto& edge = net.edges()[e];
    const double diff = v2[static_cast<Eigen::Index>(edge.u)] - v2[static_cast<Eigen::Index>(edge.v)];
    d[static_cast<Eigen::Index>(e)] = diff * diff;
  }
  return d;
}

}  // namespace detail

/// Gradient of lambda2(L~(phi)) with respect to omega:
///   sum_e K_e * (-(A^(e) omega)_k) / sqrt(1 - omega^T A^(e) omega) * [v2_i - v2_j]^2
inline Eigen::VectorXd grad_lambda2_omega(const Network& net, const QuadFormCache& cache, const Eigen::VectorXd& omega,
                                          const Eigen::VectorXd& v2) {
  const Eigen::VectorXd p = cache.projections(omega);
  detail::require_feasible(p);
  const Eigen::VectorXd d2 = detail::squared_eigvec_differences(net, v2);
  Eigen::VectorXd coeff(p.size());
  for (Eigen::Index e = 0; e < p.size(); ++e) {
    const double f = std::sqrt(1.0 - p[e] * p[e]);
    coeff[e] = -net.edges()[static_cast<std::size_t>(e)].k * p[e] / f * d2[e];
  }
  return cache.b() * coeff;
}

inline Eigen::VectorXd grad_lambda2_omega(const Network& net, const QuadFormCache& cache, const Eigen::VectorXd& v2) {
  return grad_lambda2_omega(net, cache, net.omega(), v2);
}

/// Truncated Hessian: only the curvature of W~ is kept, v2 is held fixed.
struct HessianApprox {
  Eigen::MatrixXd h;
};

/// H = sum_e -K_e [A/f + (A omega)(A omega)^T / f^3] [v2_i - v2_j]^2
///   = B diag(-K_e d_e (1/f_e + p_e^2/f_e^3)) B^T.
inline HessianApprox hessian_lambda2_omega(const Network& net, const QuadFormCache& cache, const Eigen::VectorXd& omega,
                                           const Eigen::VectorXd& v2) {
  const Eigen::VectorXd p = cache.projections(omega);
  detail::require_feasible(p);
  const Eigen::VectorXd d2 = detail::squared_eigvec_differences(net, v2);
  Eigen::VectorXd coeff(p.size());
  for (Eigen::Index e = 0; e < p.size(); ++e) {
    const double f2 = 1.0 - p[e] * p[e];
    const double f = std::sqrt(f2);
    coeff[e] = -net.edges()[static_cast<std::size_t>(e)].k * d2[e] * (1.0 / f + p[e] * p[e] / (f2 * f));
  }
  HessianApprox out;
  out.h = cache.b() * coeff.asDiagonal() * cache.b().transpose();
  out.h = 0.5 * (out.h + out.h.transpose()).eval();
  return out;
}

inline HessianApprox hessian_lambda2_omega(const Network& net, const QuadFormCache& cache, const Eigen::VectorXd& v2) {
  return hessian_lambda2_omega(net, cache, net.omega(), v2);
}

/// dL+/dK_f = -L+ a_f a_f^T L+ = -b_f b_f^T, with a_f the signed incidence
/// vector of edge f. Valid while the graph stays connected.
inline Eigen::MatrixXd pinv_derivative(const QuadFormCache& cache, Eigen::Index edge) {
  return -cache.b().col(edge) * cache.b().col(edge).transpose();
}

/// Gradient of lambda2(L~(phi)) with respect to every edge coupling.
///
/// Direct term sqrt(1 - p_f^2) [v2_k - v2_l]^2 plus the indirect term
/// through dA^(e)/dK_f, which reduces to
///   p_f * sum_e R_ef K_e p_e d_e / f_e,   R_ef = a_f^T b_e.
inline Eigen::VectorXd grad_lambda2_coupling(const Network& net, const LaplacianBundle& lap, const Eigen::VectorXd& v2) {
  const QuadFormCache cache(net, lap);
  const Eigen::VectorXd p = cache.projections(net.omega());
  detail::require_feasible(p);
  const Eigen::VectorXd d2 = detail::squared_eigvec_differences(net, v2);
  Eigen::VectorXd f(p.size());
  Eigen::VectorXd c(p.size());
  for (Eigen::Index e = 0; e < p.size(); ++e) {
    f[e] = std::sqrt(1.0 - p[e] * p[e]);
    c[e] = net.edges()[static_cast<std::size_t>(e)].k * p[e] * d2[e] / f[e];
  }
  const Eigen::VectorXd bc = cache.b() * c;
  Eigen::VectorXd grad(p.size());
  for (Eigen::Index e = 0; e < p.size(); ++e) {
    const auto& edge = net.edges()[static_cast<std::size_t>(e)];
    grad[e] = f[e] * d2[e] + p[e] * (bc[static_cast<Eigen::Index>(edge.v)] - bc[static_cast<Eigen::Index>(edge.u)]);
  }
  return grad;
}

}  // namespace kurastab

#endif  // KURASTAB_SENSITIVITY_HPP
