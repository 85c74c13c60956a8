#ifndef KURASTAB_GENERATORS_HPP
#define KURASTAB_GENERATORS_HPP

#include <cstdint>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "network.hpp"

namespace kurastab {

namespace detail {

inline constexpr int kMaxConnectivityResamples = 1000;

inline Eigen::VectorXd gaussian_zero_sum(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd omega(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < omega.size(); ++i) omega[i] = normal(rng);
  omega.array() -= omega.mean();
  return omega;
}

// Connected G(n, p) edge list with unit couplings on nodes [offset, offset + n).
inline std::vector<Edge> connected_er_edges(std::size_t n, double p, std::size_t offset, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  for (int attempt = 0; attempt < kMaxConnectivityResamples; ++attempt) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (coin(rng)) edges.push_back({i, j, 1.0});
      }
    }
    if (is_connected(n, edges)) {
      for (auto& e : edges) {
        e.u += offset;
        e.v += offset;
      }
      return edges;
    }
  }
  throw ValidationError("no connected sample after 1000 resamples; edge probability too small");
}

}  // namespace detail

/// Connected Erdos-Renyi graph with unit couplings and zero-sum Gaussian
/// natural frequencies. Deterministic under `seed`.
inline Network generate_er(std::size_t n, double p, std::uint64_t seed) {
  if (n < 2) throw ValidationError("generate_er: n must be at least 2");
  if (!(p > 0.0 && p <= 1.0)) throw ValidationError("generate_er: p must lie in (0, 1]");
  std::mt19937_64 rng(seed);
  auto edges = detail::connected_er_edges(n, p, 0, rng);
  auto omega = detail::gaussian_zero_sum(n, rng);
  return Network(n, std::move(omega), std::move(edges));
}

/// Two connected ER blocks of `n_per_module` nodes each (nodes [0, n) and
/// [n, 2n)) joined by `n_bridges` distinct random inter-module edges.
inline Network generate_two_module(std::size_t n_per_module, double p_in, std::size_t n_bridges,
                                   std::uint64_t seed) {
  if (n_per_module < 2) throw ValidationError("generate_two_module: need at least 2 nodes per module");
  if (n_bridges < 1) throw ValidationError("generate_two_module: need at least one bridge");
  if (n_bridges > n_per_module * n_per_module) {
    throw ValidationError("generate_two_module: more bridges than node pairs");
  }
  if (!(p_in > 0.0 && p_in <= 1.0)) throw ValidationError("generate_two_module: p_in must lie in (0, 1]");
  std::mt19937_64 rng(seed);
  auto edges = detail::connected_er_edges(n_per_module, p_in, 0, rng);
  auto second = detail::connected_er_edges(n_per_module, p_in, n_per_module, rng);
  edges.insert(edges.end(), second.begin(), second.end());

  std::uniform_int_distribution<std::size_t> pick(0, n_per_module - 1);
  std::set<std::pair<std::size_t, std::size_t>> bridges;
  while (bridges.size() < n_bridges) bridges.insert({pick(rng), n_per_module + pick(rng)});
  for (const auto& [a, b] : bridges) edges.push_back({a, b, 1.0});

  auto omega = detail::gaussian_zero_sum(2 * n_per_module, rng);
  return Network(2 * n_per_module, std::move(omega), std::move(edges));
}

/// Module index (0 or 1) of a node in a two-module graph.
inline int module_of(std::size_t node, std::size_t n_per_module) { return node < n_per_module ? 0 : 1; }

inline bool is_bridge(const Edge& e, std::size_t n_per_module) {
  return module_of(e.u, n_per_module) != module_of(e.v, n_per_module);
}

/// Uniform random recursive tree (each node attaches to an earlier one),
/// unit couplings, zero-sum Gaussian frequencies.
inline Network generate_tree(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw ValidationError("generate_tree: n must be at least 2");
  std::mt19937_64 rng(seed);
  std::vector<Edge> edges;
  for (std::size_t i = 1; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> parent(0, i - 1);
    edges.push_back({parent(rng), i, 1.0});
  }
  auto omega = detail::gaussian_zero_sum(n, rng);
  return Network(n, std::move(omega), std::move(edges));
}

}  // namespace kurastab

#endif  // KURASTAB_GENERATORS_HPP
