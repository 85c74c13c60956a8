#ifndef KURASTAB_OPTIMIZER_HPP
#define KURASTAB_OPTIMIZER_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "sensitivity.hpp"

namespace kurastab {

enum class Method { gradient, newton, barrier, pdip, projected_K };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::gradient: return "gradient";
    case Method::newton: return "newton";
    case Method::barrier: return "barrier";
    case Method::pdip: return "pdip";
    case Method::projected_K: return "projected_K";
  }
  return "?";
}

struct OptimizerConfig {
  Method method = Method::newton;  // search direction for unconstrained and barrier-inner steps
  int max_iters = 1000;
  double tol_grad = 1e-8;
  double ls_alpha = 0.3;
  double ls_beta = 0.5;
  int ls_max_halvings = 60;
  double sigma0 = 1e-6;  // Levenberg shift for the Newton system

  double barrier_t0 = 0.0;  // <= 0: pick t0 from the central-path least-squares estimate at the start
  double barrier_mu = 10.0;
  double barrier_tol = 1e-8;  // stop once (number of constraints)/t drops below this
  double inner_tol = 1e-10;   // Newton decrement for a centering step
  int inner_max_iters = 50;

  double pdip_tol = 1e-8;
  double pdip_mu = 10.0;
  double pdip_fraction = 0.99;

  double k_step = 0.5;  // projected-K: first trial step moves the largest coupling by k_step * mean(K)

  int exact_every = 1;  // recompute lambda2(L(theta*)) every k-th iteration; 0 disables

  void validate() const {
    if (!(ls_alpha > 0.0 && ls_alpha < 0.5)) throw ValidationError("line search alpha must lie in (0, 0.5)");
    if (!(ls_beta > 0.0 && ls_beta < 1.0)) throw ValidationError("line search beta must lie in (0, 1)");
    if (max_iters < 0) throw ValidationError("max_iters must be non-negative");
    if (!(barrier_mu > 1.0) || !(pdip_mu > 1.0)) throw ValidationError("barrier/pdip mu must exceed 1");
    if (!(pdip_fraction > 0.0 && pdip_fraction < 1.0)) throw ValidationError("fraction-to-boundary must lie in (0, 1)");
  }
};

struct TraceRow {
  int iter = 0;
  double lambda2_approx = 0.0;
  double lambda2_exact = std::numeric_limits<double>::quiet_NaN();
  double norm2 = 0.0;
  double norm1 = 0.0;
  double step = 0.0;  // step length that led to this iterate (0 for the start)
  double feasibility = 0.0;
  double lambda2_graph = 0.0;
  double k_sum = 0.0;
};

enum class OptimizerStatus { converged, max_iterations, stalled };

inline const char* to_string(OptimizerStatus s) {
  switch (s) {
    case OptimizerStatus::converged: return "converged";
    case OptimizerStatus::max_iterations: return "max_iterations";
    case OptimizerStatus::stalled: return "stalled";
  }
  return "?";
}

struct OptimizerResult {
  Network net;
  std::vector<TraceRow> trace;
  OptimizerStatus status = OptimizerStatus::converged;
  int iterations = 0;
};

/// lambda2(L(theta*)), or NaN if no synchronous state is found.
inline double exact_lambda2(const Network& net) {
  try {
    return exact_state_spectrum(net, solve_steady_state(net)).lambda2;
  } catch (const NumericalError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

/// Scale omega by 0.95 / max|dphi| when some edge has |dphi| >= 1.
inline Network destress(const Network& net) {
  const auto dc = dc_potential(net, build_graph_laplacian(net));
  const double worst = dc.beta_cut.size() ? dc.beta_cut.cwiseAbs().maxCoeff() : 0.0;
  if (worst < 1.0) return net;
  return net.with_omega(net.omega() * (0.95 / worst));
}

/// Scale omega so the largest |dphi| equals `max_dphi` (no-op for omega = 0).
inline Network scale_to_stress(const Network& net, double max_dphi) {
  if (!(max_dphi > 0.0)) throw ValidationError("stress level must be positive");
  const auto dc = dc_potential(net, build_graph_laplacian(net));
  const double worst = dc.beta_cut.size() ? dc.beta_cut.cwiseAbs().maxCoeff() : 0.0;
  if (worst == 0.0) return net;
  return net.with_omega(net.omega() * (max_dphi / worst));
}

namespace detail {

inline constexpr double kArmijoSlack = 1e-14;  // absorbs roundoff in the objective near stationarity

inline void center(Eigen::VectorXd& x) { x.array() -= x.mean(); }

inline Eigen::MatrixXd zero_sum_projector(Eigen::Index n) {
  return Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
}

/// Solve (sigma I - h) x = g with sigma escalated until the shifted matrix is
/// positive definite. h is expected negative semidefinite up to curvature
/// the shift has to absorb.
inline Eigen::VectorXd regularized_ascent_step(const Eigen::MatrixXd& h, const Eigen::VectorXd& g, double sigma0) {
  const auto n = h.rows();
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  for (double sigma = sigma0 * scale; sigma < 1e12 * scale; sigma *= 10.0) {
    Eigen::LLT<Eigen::MatrixXd> llt(sigma * Eigen::MatrixXd::Identity(n, n) - h);
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd x = llt.solve(g);
      if (x.allFinite()) return x;
    }
  }
  return g;
}

inline bool dc_feasible(const QuadFormCache& cache, const Eigen::VectorXd& omega) {
  return (cache.projections(omega).array().abs() < 1.0).all();
}

inline TraceRow omega_row(int iter, const Network& net, const Eigen::VectorXd& omega, double lambda2_approx,
                          double lambda2_graph, double step, double feasibility, const OptimizerConfig& cfg) {
  TraceRow row;
  row.iter = iter;
  row.lambda2_approx = lambda2_approx;
  if (cfg.exact_every > 0 && iter % cfg.exact_every == 0) row.lambda2_exact = exact_lambda2(net.with_omega(omega));
  row.norm2 = omega.norm();
  row.norm1 = omega.lpNorm<1>();
  row.step = step;
  row.feasibility = feasibility;
  row.lambda2_graph = lambda2_graph;
  row.k_sum = net.couplings().sum();
  return row;
}

inline Network finish_omega(const Network& net, Eigen::VectorXd omega) {
  center(omega);
  return net.with_omega(std::move(omega));
}

}  // namespace detail

/// Gradient ascent or regularized Newton on lambda2(L~(phi(omega))), with
/// omega re-centered after every step.
inline OptimizerResult maximize_unconstrained(const Network& net, const OptimizerConfig& cfg = {}) {
  cfg.validate();
  if (cfg.method != Method::gradient && cfg.method != Method::newton) {
    throw ValidationError("unconstrained search needs method gradient or newton");
  }
  const auto lap = build_graph_laplacian(net);
  const QuadFormCache cache(net, lap);
  const double l2_graph = eig_laplacian(lap.laplacian).lambda2;

  Eigen::VectorXd omega = net.omega();
  detail::center(omega);
  auto eval = evaluate_approx(net, cache, omega);

  OptimizerResult out{net, {}, OptimizerStatus::max_iterations, 0};
  double step = 0.0;
  double trial_step = 1.0;
  for (int iter = 0;; ++iter) {
    out.trace.push_back(detail::omega_row(iter, net, omega, eval.spectrum.lambda2, l2_graph, step,
                                          std::abs(omega.sum()), cfg));
    out.iterations = iter;
    const Eigen::VectorXd g = grad_lambda2_omega(net, cache, omega, eval.spectrum.v2);
    if (g.lpNorm<Eigen::Infinity>() < cfg.tol_grad) {
      out.status = OptimizerStatus::converged;
      break;
    }
    if (iter >= cfg.max_iters) break;

    Eigen::VectorXd dir;
    if (cfg.method == Method::newton) {
      const auto h = hessian_lambda2_omega(net, cache, omega, eval.spectrum.v2).h;
      dir = detail::regularized_ascent_step(h, g, cfg.sigma0);
      if (g.dot(dir) < 0.0) dir = -dir;
      trial_step = 1.0;
    } else {
      dir = g;
      trial_step = std::min(2.0 * trial_step, 1e8);
    }
    detail::center(dir);

    const double slope = g.dot(dir);
    const double f0 = eval.spectrum.lambda2;
    bool accepted = false;
    double s = trial_step;
    for (int h = 0; h <= cfg.ls_max_halvings; ++h, s *= cfg.ls_beta) {
      Eigen::VectorXd trial = omega + s * dir;
      detail::center(trial);
      if (!detail::dc_feasible(cache, trial)) continue;
      auto trial_eval = evaluate_approx(net, cache, trial);
      if (trial_eval.spectrum.lambda2 >=
          f0 + cfg.ls_alpha * s * slope - detail::kArmijoSlack * std::max(1.0, std::abs(f0))) {
        omega = std::move(trial);
        eval = std::move(trial_eval);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      out.status = OptimizerStatus::stalled;
      break;
    }
    step = s;
    trial_step = s;
  }
  out.net = detail::finish_omega(net, omega);
  return out;
}

/// Relative slack kept above the norm bound when the barrier result is
/// pulled back to the constraint sphere.
inline constexpr double kBoundaryMargin = 1e-9;

/// Barrier method for  max lambda2(L~)  s.t.  ||omega||_2^2 >= c.
/// c <= 0 makes the constraint vacuous and falls through to the
/// unconstrained solver.
inline OptimizerResult maximize_norm_constrained(const Network& net, double c, const OptimizerConfig& cfg = {}) {
  cfg.validate();
  if (c <= 0.0) {
    OptimizerConfig inner = cfg;
    if (inner.method != Method::gradient) inner.method = Method::newton;
    return maximize_unconstrained(net, inner);
  }
  Eigen::VectorXd omega = net.omega();
  detail::center(omega);
  if (!(omega.squaredNorm() > c)) throw ValidationError("infeasible start: ||omega||^2 must exceed c");

  const auto lap = build_graph_laplacian(net);
  const QuadFormCache cache(net, lap);
  const double l2_graph = eig_laplacian(lap.laplacian).lambda2;
  const auto n = omega.size();
  const Eigen::MatrixXd proj = detail::zero_sum_projector(n);
  const bool newton = cfg.method != Method::gradient;

  auto eval = evaluate_approx(net, cache, omega);
  const auto objective = [&](double lambda2, const Eigen::VectorXd& w, double t) {
    return lambda2 + std::log(w.squaredNorm() - c) / t;
  };

  double t0 = cfg.barrier_t0;
  if (!(t0 > 0.0)) {
    // t minimizing ||P(t g + 2 omega / s)||: the point of the central path
    // closest to the start.
    const Eigen::VectorXd g = proj * grad_lambda2_omega(net, cache, omega, eval.spectrum.v2);
    const Eigen::VectorXd b = proj * ((2.0 / (omega.squaredNorm() - c)) * omega);
    t0 = g.squaredNorm() > 0.0 ? -g.dot(b) / g.squaredNorm() : 0.0;
    t0 = std::clamp(t0, 1.0, 1.0 / cfg.barrier_tol);
  }

  OptimizerResult out{net, {}, OptimizerStatus::converged, 0};
  int iter = 0;
  double step = 0.0;
  out.trace.push_back(
      detail::omega_row(0, net, omega, eval.spectrum.lambda2, l2_graph, 0.0, omega.squaredNorm() - c, cfg));
  for (double t = t0;; t *= cfg.barrier_mu) {
    double trial_step = 1.0;
    for (int inner = 0; inner < cfg.inner_max_iters; ++inner) {
      if (iter >= cfg.max_iters) {
        out.status = OptimizerStatus::max_iterations;
        break;
      }
      const double slack = omega.squaredNorm() - c;
      const Eigen::VectorXd g = grad_lambda2_omega(net, cache, omega, eval.spectrum.v2);
      const Eigen::VectorXd grad = proj * (g + (2.0 / (t * slack)) * omega);
      Eigen::VectorXd dir;
      if (newton) {
        const auto h = hessian_lambda2_omega(net, cache, omega, eval.spectrum.v2).h;
        Eigen::MatrixXd hb = h + (2.0 / (t * slack)) * Eigen::MatrixXd::Identity(n, n) -
                             (4.0 / (t * slack * slack)) * omega * omega.transpose();
        hb = proj * hb * proj;
        dir = detail::regularized_ascent_step(hb, grad, cfg.sigma0);
        if (grad.dot(dir) < 0.0) dir = -dir;
        trial_step = 1.0;
      } else {
        dir = grad;
        trial_step = std::min(2.0 * trial_step, 1e8);
      }
      detail::center(dir);
      const double slope = grad.dot(dir);
      if (slope / 2.0 < cfg.inner_tol || grad.lpNorm<Eigen::Infinity>() < cfg.tol_grad) break;

      const double f0 = objective(eval.spectrum.lambda2, omega, t);
      bool accepted = false;
      double s = trial_step;
      for (int h = 0; h <= cfg.ls_max_halvings; ++h, s *= cfg.ls_beta) {
        Eigen::VectorXd trial = omega + s * dir;
        detail::center(trial);
        if (!(trial.squaredNorm() > c) || !detail::dc_feasible(cache, trial)) continue;
        auto trial_eval = evaluate_approx(net, cache, trial);
        if (objective(trial_eval.spectrum.lambda2, trial, t) >=
            f0 + cfg.ls_alpha * s * slope - detail::kArmijoSlack * std::max(1.0, std::abs(f0))) {
          omega = std::move(trial);
          eval = std::move(trial_eval);
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        // A failed search with a tiny decrement is roundoff at the center.
        if (slope / 2.0 < 1e-8) break;
        out.status = OptimizerStatus::stalled;
        break;
      }
      step = s;
      trial_step = s;
      ++iter;
      out.trace.push_back(detail::omega_row(iter, net, omega, eval.spectrum.lambda2, l2_graph, step,
                                            omega.squaredNorm() - c, cfg));
    }
    if (out.status != OptimizerStatus::converged || 1.0 / t < cfg.barrier_tol) break;
  }

  // The objective can be nearly flat along directions that keep flows off
  // edges where v2 varies, so the barrier leaves omega drifting outward
  // (and an iteration cap can stop it far from the sphere).
  // lambda2(L~) is concave with its maximum at omega = 0, hence never
  // decreases along the ray back to the sphere; pull the iterate onto it.
  const double target = c * (1.0 + kBoundaryMargin);
  if (omega.squaredNorm() > target) {
    const Eigen::VectorXd trial = omega * std::sqrt(target / omega.squaredNorm());
    auto trial_eval = evaluate_approx(net, cache, trial);
    const double f0 = eval.spectrum.lambda2;
    if (trial_eval.spectrum.lambda2 >= f0 - detail::kArmijoSlack * std::max(1.0, std::abs(f0))) {
      step = std::sqrt(target / omega.squaredNorm());
      omega = trial;
      eval = std::move(trial_eval);
      ++iter;
      out.trace.push_back(detail::omega_row(iter, net, omega, eval.spectrum.lambda2, l2_graph, step,
                                            omega.squaredNorm() - c, cfg));
    }
  }
  out.iterations = iter;
  out.net = detail::finish_omega(net, omega);
  return out;
}

/// Primal-dual interior point for
///   max lambda2(L~)  s.t.  lower <= omega <= upper,  sum(omega) = 0.
/// Nodes with lower == upper are pinned. Free variables are rescaled to
/// y in (-1, 1) around the box centers before solving.
inline OptimizerResult maximize_box_constrained(const Network& net, const Eigen::VectorXd& lower,
                                                const Eigen::VectorXd& upper, const OptimizerConfig& cfg = {}) {
  cfg.validate();
  const auto n = static_cast<Eigen::Index>(net.size());
  if (lower.size() != n || upper.size() != n) throw ValidationError("bound vectors must have one entry per node");
  if (!((lower.array() <= upper.array()).all())) throw ValidationError("lower bound exceeds upper bound");

  std::vector<Eigen::Index> free;
  Eigen::VectorXd omega = lower;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (upper[i] > lower[i]) free.push_back(i);
  }
  const auto nf = static_cast<Eigen::Index>(free.size());
  Eigen::VectorXd mid(nf), half(nf);
  for (Eigen::Index j = 0; j < nf; ++j) {
    mid[j] = 0.5 * (lower[free[j]] + upper[free[j]]);
    half[j] = 0.5 * (upper[free[j]] - lower[free[j]]);
  }
  double pinned_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(upper[i] > lower[i])) pinned_sum += lower[i];
  }
  // Balance: sum(half .* y) = target with |y| < 1.
  const double target = -pinned_sum - mid.sum();
  const double reach = half.sum();
  if (nf == 0 ? std::abs(pinned_sum) > 1e-12 * std::max(1.0, lower.lpNorm<1>()) : !(std::abs(target) < reach)) {
    throw ValidationError("infeasible constraint set");
  }

  const auto lap = build_graph_laplacian(net);
  const QuadFormCache cache(net, lap);
  const double l2_graph = eig_laplacian(lap.laplacian).lambda2;

  const auto assemble = [&](const Eigen::VectorXd& y) {
    Eigen::VectorXd w = lower;
    for (Eigen::Index j = 0; j < nf; ++j) w[free[j]] = mid[j] + half[j] * y[j];
    // Roundoff re-balance over the free nodes only, if it keeps the box.
    if (nf > 0) {
      const double shift = -w.sum() / static_cast<double>(nf);
      bool inside = true;
      for (Eigen::Index j = 0; j < nf; ++j) {
        const double v = w[free[j]] + shift;
        inside = inside && v > lower[free[j]] && v < upper[free[j]];
      }
      if (inside) {
        for (Eigen::Index j = 0; j < nf; ++j) w[free[j]] += shift;
      }
    }
    return w;
  };

  OptimizerResult out{net, {}, OptimizerStatus::max_iterations, 0};
  Eigen::VectorXd y = Eigen::VectorXd::Constant(nf, nf ? target / reach : 0.0);
  omega = assemble(y);
  if (!detail::dc_feasible(cache, omega)) throw NumericalError("approximation infeasible; destress required");
  auto eval = evaluate_approx(net, cache, omega);
  if (nf == 0) {
    out.trace.push_back(detail::omega_row(0, net, omega, eval.spectrum.lambda2, l2_graph, 0.0, 0.0, cfg));
    out.status = OptimizerStatus::converged;
    out.net = net.with_omega(omega);
    return out;
  }

  Eigen::VectorXd lam_u = Eigen::VectorXd::Ones(nf);  // multipliers for y <= 1
  Eigen::VectorXd lam_l = Eigen::VectorXd::Ones(nf);  // multipliers for y >= -1
  double nu = 0.0;
  const double m = 2.0 * static_cast<double>(nf);

  // Gradient of the minimized objective -lambda2 in y coordinates.
  const auto grad_y = [&](const Eigen::VectorXd& w, const ApproxEvaluation& ev) {
    const Eigen::VectorXd g = grad_lambda2_omega(net, cache, w, ev.spectrum.v2);
    Eigen::VectorXd gy(nf);
    for (Eigen::Index j = 0; j < nf; ++j) gy[j] = -half[j] * g[free[j]];
    return gy;
  };
  struct Residual {
    Eigen::VectorXd dual, cent_u, cent_l;
    double pri = 0.0;
    double norm() const {
      return std::sqrt(dual.squaredNorm() + cent_u.squaredNorm() + cent_l.squaredNorm() + pri * pri);
    }
  };
  const auto residual = [&](const Eigen::VectorXd& yy, const Eigen::VectorXd& gy, const Eigen::VectorXd& lu,
                            const Eigen::VectorXd& ll, double v, double t) {
    Residual r;
    r.dual = gy + lu - ll + v * half;
    r.cent_u = (lu.array() * (1.0 - yy.array())).matrix() - Eigen::VectorXd::Constant(nf, 1.0 / t);
    r.cent_l = (ll.array() * (1.0 + yy.array())).matrix() - Eigen::VectorXd::Constant(nf, 1.0 / t);
    r.pri = half.dot(yy) - target;
    return r;
  };

  Eigen::VectorXd gy = grad_y(omega, eval);
  double step = 0.0;
  for (int iter = 0;; ++iter) {
    const Eigen::VectorXd su = (1.0 - y.array()).matrix();
    const Eigen::VectorXd sl = (1.0 + y.array()).matrix();
    const double gap = lam_u.dot(su) + lam_l.dot(sl);
    const double kkt_dual = (gy + lam_u - lam_l + nu * half).lpNorm<Eigen::Infinity>();
    const double kkt_pri = std::abs(half.dot(y) - target);
    const double kkt = std::max({kkt_dual, kkt_pri, gap});
    out.trace.push_back(detail::omega_row(iter, net, omega, eval.spectrum.lambda2, l2_graph, step, kkt, cfg));
    out.iterations = iter;
    if (kkt_dual < cfg.pdip_tol && kkt_pri < cfg.pdip_tol && gap < cfg.pdip_tol) {
      out.status = OptimizerStatus::converged;
      break;
    }
    if (iter >= cfg.max_iters) break;

    const double t = cfg.pdip_mu * m / gap;
    // Truncated Hessian of -lambda2 in y coordinates (positive semidefinite).
    const auto h = hessian_lambda2_omega(net, cache, omega, eval.spectrum.v2).h;
    Eigen::MatrixXd kkt_mat = Eigen::MatrixXd::Zero(nf + 1, nf + 1);
    for (Eigen::Index a = 0; a < nf; ++a) {
      for (Eigen::Index b = 0; b < nf; ++b) kkt_mat(a, b) = -half[a] * h(free[a], free[b]) * half[b];
      kkt_mat(a, a) += lam_u[a] / su[a] + lam_l[a] / sl[a];
      kkt_mat(a, nf) = half[a];
      kkt_mat(nf, a) = half[a];
    }
    Eigen::VectorXd rhs(nf + 1);
    rhs.head(nf) = -(gy + nu * half + (1.0 / t) * (su.cwiseInverse() - sl.cwiseInverse()));
    rhs[nf] = -(half.dot(y) - target);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt_mat);
    const Eigen::VectorXd sol = lu.solve(rhs);
    if (!sol.allFinite()) {
      out.status = OptimizerStatus::stalled;
      break;
    }
    const Eigen::VectorXd dy = sol.head(nf);
    const double dnu = sol[nf];
    // From the linearized complementarity conditions.
    const Eigen::VectorXd dlu =
        (-lam_u.array() + (1.0 / t) / su.array() + lam_u.array() * dy.array() / su.array()).matrix();
    const Eigen::VectorXd dll =
        (-lam_l.array() + (1.0 / t) / sl.array() - lam_l.array() * dy.array() / sl.array()).matrix();

    double s = 1.0;
    for (Eigen::Index j = 0; j < nf; ++j) {
      if (dlu[j] < 0.0) s = std::min(s, -lam_u[j] / dlu[j]);
      if (dll[j] < 0.0) s = std::min(s, -lam_l[j] / dll[j]);
    }
    s *= cfg.pdip_fraction;
    const double r0 = residual(y, gy, lam_u, lam_l, nu, t).norm();
    bool accepted = false;
    for (int k = 0; k <= cfg.ls_max_halvings; ++k, s *= cfg.ls_beta) {
      const Eigen::VectorXd yt = y + s * dy;
      if (!((yt.array().abs() < 1.0).all())) continue;
      const Eigen::VectorXd wt = assemble(yt);
      if (!detail::dc_feasible(cache, wt)) continue;
      auto et = evaluate_approx(net, cache, wt);
      const Eigen::VectorXd gt = grad_y(wt, et);
      const Eigen::VectorXd lut = lam_u + s * dlu;
      const Eigen::VectorXd llt = lam_l + s * dll;
      if (residual(yt, gt, lut, llt, nu + s * dnu, t).norm() <= (1.0 - cfg.ls_alpha * s) * r0) {
        y = yt;
        omega = wt;
        eval = std::move(et);
        gy = gt;
        lam_u = lut;
        lam_l = llt;
        nu += s * dnu;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      out.status = OptimizerStatus::stalled;
      break;
    }
    step = s;
  }
  out.net = net.with_omega(omega);
  return out;
}

enum class GridProblem { P1, P2 };

/// Box bounds omega0_i +- alpha |omega0_i|.
/// P1: every node with omega0_i != 0 may move. P2: only supply nodes
/// (omega0_i > 0) may move; demands and relays stay pinned.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> grid_bounds(const Network& net, GridProblem problem,
                                                               double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in (0, 1]");
  const Eigen::VectorXd& w0 = net.omega();
  Eigen::VectorXd lo = w0, hi = w0;
  for (Eigen::Index i = 0; i < w0.size(); ++i) {
    const bool movable = problem == GridProblem::P1 ? w0[i] != 0.0 : w0[i] > 0.0;
    if (movable) {
      lo[i] = w0[i] - alpha * std::abs(w0[i]);
      hi[i] = w0[i] + alpha * std::abs(w0[i]);
    }
  }
  return {lo, hi};
}

inline OptimizerResult maximize_grid_constrained(const Network& net, GridProblem problem, double alpha,
                                                 const OptimizerConfig& cfg = {}) {
  const auto [lo, hi] = grid_bounds(net, problem, alpha);
  return maximize_box_constrained(net, lo, hi, cfg);
}

namespace detail {

/// Projected ascent direction on {sum dK = 0}, with couplings already at
/// zero excluded when the gradient would push them negative.
inline Eigen::VectorXd projected_coupling_direction(const Eigen::VectorXd& k, const Eigen::VectorXd& g) {
  std::vector<bool> active(static_cast<std::size_t>(k.size()), true);
  Eigen::VectorXd dir = Eigen::VectorXd::Zero(k.size());
  for (int pass = 0; pass <= k.size(); ++pass) {
    double sum = 0.0;
    int count = 0;
    for (Eigen::Index e = 0; e < k.size(); ++e) {
      if (active[static_cast<std::size_t>(e)]) {
        sum += g[e];
        ++count;
      }
    }
    if (count == 0) return Eigen::VectorXd::Zero(k.size());
    const double mean = sum / count;
    bool changed = false;
    for (Eigen::Index e = 0; e < k.size(); ++e) {
      dir[e] = active[static_cast<std::size_t>(e)] ? g[e] - mean : 0.0;
      if (active[static_cast<std::size_t>(e)] && k[e] <= 0.0 && dir[e] < 0.0) {
        active[static_cast<std::size_t>(e)] = false;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return dir;
}

}  // namespace detail

/// Projected gradient ascent on the couplings with sum(K) = k_total and
/// K >= 0; omega stays fixed. After each step negatives are clipped to zero
/// and the rest rescaled to restore the budget.
inline OptimizerResult maximize_coupling(const Network& net, double k_total, const OptimizerConfig& cfg = {}) {
  cfg.validate();
  Eigen::VectorXd k = net.couplings();
  if (!(k_total > 0.0) || std::abs(k.sum() - k_total) > 1e-9 * k_total) {
    throw ValidationError("coupling budget must equal the current sum of couplings");
  }
  const auto budget = [&](Eigen::VectorXd x) {
    x = x.cwiseMax(0.0);
    x *= k_total / x.sum();
    return x;
  };
  k = budget(k);
  Network cur = net.with_couplings(k);

  struct Eval {
    LaplacianBundle lap;
    ApproxEvaluation approx;
  };
  const auto evaluate = [&](const Network& candidate) {
    Eval ev{build_graph_laplacian(candidate), {}};
    ev.approx = evaluate_approx(candidate, QuadFormCache(candidate, ev.lap));
    return ev;
  };
  auto ev = evaluate(cur);

  const auto row = [&](int iter, double step) {
    TraceRow r = detail::omega_row(iter, cur, cur.omega(), ev.approx.spectrum.lambda2,
                                   eig_laplacian(ev.lap.laplacian).lambda2, step, 0.0, cfg);
    r.feasibility = std::abs(r.k_sum - k_total);
    return r;
  };

  OptimizerResult out{cur, {}, OptimizerStatus::max_iterations, 0};
  double step = 0.0;
  bool flat = false;
  for (int iter = 0;; ++iter) {
    out.trace.push_back(row(iter, step));
    out.iterations = iter;
    const Eigen::VectorXd g = grad_lambda2_coupling(cur, ev.lap, ev.approx.spectrum.v2);
    const Eigen::VectorXd dir = detail::projected_coupling_direction(k, g);
    const double dmax = dir.lpNorm<Eigen::Infinity>();
    if (flat || dmax < cfg.tol_grad) {
      out.status = OptimizerStatus::converged;
      break;
    }
    if (iter >= cfg.max_iters) break;

    const double f0 = ev.approx.spectrum.lambda2;
    double s = cfg.k_step * (k_total / static_cast<double>(k.size())) / dmax;
    bool accepted = false;
    for (int h = 0; h <= cfg.ls_max_halvings; ++h, s *= cfg.ls_beta) {
      const Eigen::VectorXd trial_k = budget(k + s * dir);
      std::vector<Edge> trial_edges = cur.edges();
      for (std::size_t e = 0; e < trial_edges.size(); ++e) trial_edges[e].k = trial_k[static_cast<Eigen::Index>(e)];
      if (!is_connected(cur.size(), trial_edges)) continue;
      const Network candidate = cur.with_couplings(trial_k);
      Eval trial_ev;
      try {
        trial_ev = evaluate(candidate);
      } catch (const NumericalError&) {
        continue;  // left the region where the approximation is defined
      }
      if (trial_ev.approx.spectrum.lambda2 >=
          f0 + cfg.ls_alpha * g.dot(trial_k - k) - detail::kArmijoSlack * std::max(1.0, std::abs(f0))) {
        if ((trial_k - k).lpNorm<Eigen::Infinity>() == 0.0) break;
        k = trial_k;
        cur = candidate;
        ev = std::move(trial_ev);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      out.status = OptimizerStatus::stalled;
      break;
    }
    step = s;
    // At the optimum lambda2 typically merges with lambda3; the maximum is
    // then nonsmooth and the projected gradient never vanishes.
    flat = ev.approx.spectrum.lambda2 - f0 < cfg.tol_grad * std::max(1.0, std::abs(f0));
  }
  out.net = cur;
  return out;
}

}  // namespace kurastab

#endif  // KURASTAB_OPTIMIZER_HPP
