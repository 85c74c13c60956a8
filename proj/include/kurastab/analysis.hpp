#ifndef KURASTAB_ANALYSIS_HPP
#define KURASTAB_ANALYSIS_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "dynamics.hpp"
#include "generators.hpp"
#include "optimizer.hpp"

namespace kurastab {

/// Pearson correlation; nullopt when either sample has zero variance.
inline std::optional<double> pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const Eigen::VectorXd a = x.array() - x.mean();
  const Eigen::VectorXd b = y.array() - y.mean();
  const double den = std::sqrt(a.squaredNorm() * b.squaredNorm());
  if (!(den > 0.0)) return std::nullopt;
  return a.dot(b) / den;
}

// ---------------------------------------------------------------------------
// Alignment of omega with graph-Laplacian eigenvectors

struct AlignmentSpectrum {
  Eigen::VectorXd projections;  // |<v_i|omega>|^2, ascending eigenvalue order
  Eigen::VectorXd bins;         // contiguous index blocks, summed
};

/// Index i goes to bin floor(i * bins / N).
inline Eigen::VectorXd bin_sums(const Eigen::VectorXd& values, int bins) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(bins);
  const auto n = values.size();
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<Eigen::Index>(i * bins / n)] += values[i];
  return out;
}

inline AlignmentSpectrum alignment_spectrum(const Network& net, Eigen::VectorXd omega, int bins = 10) {
  if (omega.size() != static_cast<Eigen::Index>(net.size())) throw ValidationError("omega has wrong length");
  if (bins < 1) throw ValidationError("need at least one bin");
  omega.array() -= omega.mean();
  const auto s = eig_laplacian(build_graph_laplacian(net).laplacian);
  AlignmentSpectrum out;
  out.projections = (s.eigenvectors.transpose() * omega).array().square();
  out.bins = bin_sums(out.projections, bins);
  return out;
}

struct BinSummary {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // sample standard deviation
};

inline BinSummary summarize_bins(const std::vector<AlignmentSpectrum>& spectra) {
  BinSummary out;
  if (spectra.empty()) return out;
  const auto b = spectra.front().bins.size();
  out.mean = Eigen::VectorXd::Zero(b);
  out.stddev = Eigen::VectorXd::Zero(b);
  for (const auto& s : spectra) out.mean += s.bins;
  out.mean /= static_cast<double>(spectra.size());
  if (spectra.size() > 1) {
    for (const auto& s : spectra) out.stddev += (s.bins - out.mean).array().square().matrix();
    out.stddev = (out.stddev / static_cast<double>(spectra.size() - 1)).array().sqrt();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Neighbor frequencies

struct NeighborStats {
  Eigen::VectorXd neighbor_mean;      // <omega>_i = sum_{j in N(i)} omega_j / d_i
  std::optional<double> correlation;  // corr(omega_i, <omega>_i); nullopt if undefined
};

inline NeighborStats neighbor_correlation(const Network& net, const Eigen::VectorXd& omega) {
  if (omega.size() != static_cast<Eigen::Index>(net.size())) throw ValidationError("omega has wrong length");
  NeighborStats out;
  out.neighbor_mean.resize(omega.size());
  for (std::size_t i = 0; i < net.size(); ++i) {
    double sum = 0.0;
    std::size_t degree = 0;
    for (const auto& nb : net.neighbors(i)) {
      if (net.edges()[nb.edge].k <= 0.0) continue;
      sum += omega[static_cast<Eigen::Index>(nb.node)];
      ++degree;
    }
    if (degree == 0) throw ValidationError("isolated node in neighbor statistics");
    out.neighbor_mean[static_cast<Eigen::Index>(i)] = sum / static_cast<double>(degree);
  }
  out.correlation = pearson(omega, out.neighbor_mean);
  return out;
}

// ---------------------------------------------------------------------------
// Phase-difference changes

struct PhaseDiffHistogram {
  Eigen::VectorXd changes;  // |dtheta_after| - |dtheta_before| per edge
  Eigen::VectorXd edges;    // bin boundaries, bins + 1 entries, symmetric about 0
  std::vector<int> counts;
  double fraction_negative = 0.0;
};

/// Histogram over [-m, m] with m the largest |change| (1 if all are zero).
/// An odd bin count keeps 0 inside the middle bin.
inline PhaseDiffHistogram phase_diff_histogram(const SteadyState& before, const SteadyState& after,
                                               const Network& net, int bins = 21) {
  if (bins < 1) throw ValidationError("need at least one bin");
  if (!before.converged || !after.converged) throw ValidationError("phase histogram needs converged states");
  PhaseDiffHistogram out;
  out.changes = edge_phase_differences(net, after.theta).cwiseAbs() - edge_phase_differences(net, before.theta).cwiseAbs();
  const double m = out.changes.size() && out.changes.cwiseAbs().maxCoeff() > 0.0 ? out.changes.cwiseAbs().maxCoeff() : 1.0;
  out.edges = Eigen::VectorXd::LinSpaced(bins + 1, -m, m);
  out.counts.assign(static_cast<std::size_t>(bins), 0);
  int negative = 0;
  for (const double c : out.changes) {
    auto b = static_cast<int>(std::floor((c + m) / (2.0 * m) * bins));
    b = std::clamp(b, 0, bins - 1);
    ++out.counts[static_cast<std::size_t>(b)];
    negative += c < 0.0 ? 1 : 0;
  }
  out.fraction_negative = out.changes.size() ? static_cast<double>(negative) / static_cast<double>(out.changes.size()) : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// lambda2 against the order parameter

struct StatePair {
  Network before;
  Network after;
};

struct Lambda2VsR {
  Eigen::VectorXd lambda2_before, lambda2_after, r_before, r_after;
  Eigen::VectorXd d_lambda2, d_r;
  std::optional<double> correlation;
};

inline Lambda2VsR lambda2_vs_r_study(const std::vector<StatePair>& pairs) {
  const auto n = static_cast<Eigen::Index>(pairs.size());
  Lambda2VsR out;
  out.lambda2_before.resize(n);
  out.lambda2_after.resize(n);
  out.r_before.resize(n);
  out.r_after.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = pairs[static_cast<std::size_t>(i)];
    const auto sb = solve_steady_state(p.before);
    const auto sa = solve_steady_state(p.after);
    out.lambda2_before[i] = exact_state_spectrum(p.before, sb).lambda2;
    out.lambda2_after[i] = exact_state_spectrum(p.after, sa).lambda2;
    out.r_before[i] = order_parameter(sb.theta);
    out.r_after[i] = order_parameter(sa.theta);
  }
  out.d_lambda2 = out.lambda2_after - out.lambda2_before;
  out.d_r = out.r_after - out.r_before;
  out.correlation = pearson(out.d_lambda2, out.d_r);
  return out;
}

// ---------------------------------------------------------------------------
// Two-module contrast: higher lambda2 with lower coherence

struct TwoModuleContrast {
  Network stressed;    // omega = +a on module 0, -a on module 1: all transfer crosses the bridges
  Network relaxed;     // same ||omega||_2, less inter-module transfer, more intra-module spread
                       // (equal to `stressed` when nothing was found)
  double r_stressed = 0.0, r_relaxed = 0.0;
  double lambda2_stressed = 0.0, lambda2_relaxed = 0.0;
  bool found = false;
};

struct ContrastSearch {
  double bridge_stress = 0.9;  // max |dphi| of the stressed assignment
  int random_directions = 20;
  std::uint64_t seed = 0;
};

/// Search omega_2 = beta omega_1 + gamma u at ||omega_2|| = ||omega_1||,
/// with u zero-sum inside each module (module Fiedler vectors and random
/// directions), for a pair where r drops while lambda2(L(theta*)) rises.
/// Returns the candidate with the largest lambda2 gain.
inline TwoModuleContrast two_module_contrast(const Network& net, std::size_t n_per_module,
                                             const ContrastSearch& search = {}) {
  const auto n = static_cast<Eigen::Index>(net.size());
  if (n != static_cast<Eigen::Index>(2 * n_per_module)) throw ValidationError("network is not a two-module graph");
  const auto lap = build_graph_laplacian(net);

  Eigen::VectorXd w1(n);
  for (Eigen::Index i = 0; i < n; ++i) w1[i] = module_of(static_cast<std::size_t>(i), n_per_module) == 0 ? 1.0 : -1.0;
  const Eigen::VectorXd unit_cut = QuadFormCache(net, lap).projections(w1);
  w1 *= search.bridge_stress / unit_cut.cwiseAbs().maxCoeff();

  const Network stressed = net.with_omega(w1);
  TwoModuleContrast out{stressed, stressed};
  const auto s1 = solve_steady_state(out.stressed);
  out.r_stressed = order_parameter(s1.theta);
  out.lambda2_stressed = exact_state_spectrum(out.stressed, s1).lambda2;

  // Intra-module directions.
  std::vector<Eigen::VectorXd> dirs;
  for (int module = 0; module < 2; ++module) {
    std::vector<Edge> inner;
    const std::size_t off = module * n_per_module;
    for (const auto& e : net.edges()) {
      if (!is_bridge(e, n_per_module) && module_of(e.u, n_per_module) == module) {
        inner.push_back({e.u - off, e.v - off, e.k});
      }
    }
    const auto s = eig_laplacian(laplacian_matrix(n_per_module, inner));
    for (Eigen::Index j = 1; j < std::min<Eigen::Index>(3, s.eigenvalues.size()); ++j) {
      Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
      u.segment(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(n_per_module)) = s.eigenvectors.col(j);
      dirs.push_back(u);
    }
  }
  std::mt19937_64 rng(search.seed);
  std::normal_distribution<double> normal;
  for (int k = 0; k < search.random_directions; ++k) {
    Eigen::VectorXd u(n);
    for (auto& x : u) x = normal(rng);
    for (int module = 0; module < 2; ++module) {
      auto seg = u.segment(static_cast<Eigen::Index>(module * n_per_module), static_cast<Eigen::Index>(n_per_module));
      seg.array() -= seg.mean();
    }
    dirs.push_back(u);
  }

  const double norm = w1.norm();
  double best_gain = 0.0;
  for (const auto& u : dirs) {
    for (double beta = 0.9; beta > 0.05; beta -= 0.1) {
      const Eigen::VectorXd w2 = beta * w1 + std::sqrt(1.0 - beta * beta) * norm * u.normalized();
      const Network candidate = net.with_omega(w2);
      SteadyState s2;
      try {
        s2 = solve_steady_state(candidate);
      } catch (const NumericalError&) {
        continue;
      }
      const auto spec = exact_state_spectrum(candidate, s2);
      if (spec.unstable) continue;
      const double r2 = order_parameter(s2.theta);
      const double gain = spec.lambda2 - out.lambda2_stressed;
      if (r2 < out.r_stressed && gain > best_gain) {
        best_gain = gain;
        out.relaxed = candidate;
        out.r_relaxed = r2;
        out.lambda2_relaxed = spec.lambda2;
        out.found = true;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// ER ensemble of norm-constrained optimizations

struct EnsembleConfig {
  int instances = 100;
  std::size_t n = 50;
  double p = 0.1;
  double omega_norm = 3.0;   // ||omega_0||_2 before destressing
  double c_fraction = 0.99;  // c = c_fraction * ||omega_0||^2
  std::uint64_t seed = 0;
  OptimizerConfig optimizer{};
};

struct EnsembleInstance {
  Network before;
  Network after;
  Eigen::VectorXd random_omega;  // Gaussian zero-sum baseline at ||after.omega||
};

struct EnsembleSummary {
  std::vector<EnsembleInstance> instances;
  Lambda2VsR lambda2_vs_r;
  Eigen::VectorXd neighbor_correlation;  // per optimized instance (NaN when undefined)
  double neighbor_correlation_mean = 0.0;
  Eigen::VectorXd fraction_negative;     // phase-difference decreases per instance
  double pooled_fraction_negative = 0.0;
  BinSummary optimized_alignment, random_alignment;
};

inline EnsembleSummary run_property_ensemble(const EnsembleConfig& cfg) {
  EnsembleSummary out;
  std::vector<StatePair> pairs;
  std::vector<AlignmentSpectrum> opt_align, rnd_align;
  std::vector<double> ncorr, fneg;
  long long neg = 0, total = 0;
  for (int k = 0; k < cfg.instances; ++k) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(k);
    auto base = generate_er(cfg.n, cfg.p, seed);
    base = destress(base.with_omega(base.omega().normalized() * cfg.omega_norm));
    const double c = cfg.c_fraction * base.omega().squaredNorm();
    auto result = maximize_norm_constrained(base, c, cfg.optimizer);

    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> normal;
    Eigen::VectorXd rnd(static_cast<Eigen::Index>(cfg.n));
    for (auto& x : rnd) x = normal(rng);
    rnd.array() -= rnd.mean();
    rnd *= result.net.omega().norm() / rnd.norm();

    const auto sb = solve_steady_state(base);
    const auto sa = solve_steady_state(result.net);
    const auto hist = phase_diff_histogram(sb, sa, base);
    for (const double c2 : hist.changes) neg += c2 < 0.0 ? 1 : 0;
    total += hist.changes.size();
    fneg.push_back(hist.fraction_negative);
    const auto nc = neighbor_correlation(result.net, result.net.omega()).correlation;
    ncorr.push_back(nc ? *nc : std::numeric_limits<double>::quiet_NaN());
    opt_align.push_back(alignment_spectrum(result.net, result.net.omega()));
    rnd_align.push_back(alignment_spectrum(result.net, rnd));
    pairs.push_back({base, result.net});
    out.instances.push_back({base, result.net, rnd});
  }
  out.lambda2_vs_r = lambda2_vs_r_study(pairs);
  out.neighbor_correlation = Eigen::Map<Eigen::VectorXd>(ncorr.data(), static_cast<Eigen::Index>(ncorr.size()));
  int defined = 0;
  for (const double v : ncorr) {
    if (!std::isnan(v)) {
      out.neighbor_correlation_mean += v;
      ++defined;
    }
  }
  out.neighbor_correlation_mean = defined ? out.neighbor_correlation_mean / defined : std::numeric_limits<double>::quiet_NaN();
  out.fraction_negative = Eigen::Map<Eigen::VectorXd>(fneg.data(), static_cast<Eigen::Index>(fneg.size()));
  out.pooled_fraction_negative = total ? static_cast<double>(neg) / static_cast<double>(total) : 0.0;
  out.optimized_alignment = summarize_bins(opt_align);
  out.random_alignment = summarize_bins(rnd_align);
  return out;
}

}  // namespace kurastab

#endif  // KURASTAB_ANALYSIS_HPP
