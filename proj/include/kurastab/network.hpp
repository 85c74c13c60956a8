#ifndef KURASTAB_NETWORK_HPP
#define KURASTAB_NETWORK_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace kurastab {

/// Undirected edge, stored with u < v. `k` is the coupling strength K_uv
/// (or, inside StateWeights, the state-dependent weight).
struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;
  double k = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

namespace detail {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0), count_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    --count_;
  }

  std::size_t count() const { return count_; }

 private:
  std::vector<std::size_t> parent_;
  std::vector<int> rank_;
  std::size_t count_;
};

}  // namespace detail

/// Number of connected components when only edges with positive weight count.
inline std::size_t component_count(std::size_t node_count, const std::vector<Edge>& edges) {
  detail::DisjointSets sets(node_count);
  for (const auto& e : edges) {
    if (e.k > 0.0) sets.unite(e.u, e.v);
  }
  return sets.count();
}

inline bool is_connected(std::size_t node_count, const std::vector<Edge>& edges) {
  return node_count > 0 && component_count(node_count, edges) == 1;
}

/// Oscillator network: natural frequencies on nodes, couplings on edges.
///
/// Immutable once constructed. The constructor canonicalizes edge order
/// (u < v, sorted lexicographically), rejects self-loops, duplicates,
/// negative or non-finite couplings and disconnected graphs, and removes
/// the mean of omega so the frequencies sum to zero.
class Network {
 public:
  Network(std::size_t node_count, Eigen::VectorXd omega, std::vector<Edge> edges,
          std::vector<std::string> labels = {})
      : omega_(std::move(omega)), edges_(std::move(edges)), labels_(std::move(labels)) {
    if (node_count < 2) throw ValidationError("network needs at least 2 nodes");
    if (static_cast<std::size_t>(omega_.size()) != node_count) {
      throw ValidationError("omega has " + std::to_string(omega_.size()) + " entries, expected " +
                            std::to_string(node_count));
    }
    if (!labels_.empty() && labels_.size() != node_count) {
      throw ValidationError("label count does not match node count");
    }
    for (Eigen::Index i = 0; i < omega_.size(); ++i) {
      if (!std::isfinite(omega_[i])) throw ValidationError("non-finite omega at node " + std::to_string(i));
    }
    for (auto& e : edges_) {
      if (e.u >= node_count || e.v >= node_count) {
        throw ValidationError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                              ") references a missing node");
      }
      if (e.u == e.v) throw ValidationError("self-loop at node " + std::to_string(e.u));
      if (!std::isfinite(e.k) || e.k < 0.0) {
        throw ValidationError("negative or non-finite coupling on edge (" + std::to_string(e.u) + "," +
                              std::to_string(e.v) + ")");
      }
      if (e.u > e.v) std::swap(e.u, e.v);
    }
    std::sort(edges_.begin(), edges_.end(),
              [](const Edge& a, const Edge& b) { return std::pair(a.u, a.v) < std::pair(b.u, b.v); });
    for (std::size_t i = 1; i < edges_.size(); ++i) {
      if (edges_[i].u == edges_[i - 1].u && edges_[i].v == edges_[i - 1].v) {
        throw ValidationError("duplicate edge (" + std::to_string(edges_[i].u) + "," +
                              std::to_string(edges_[i].v) + ")");
      }
    }
    if (!is_connected(node_count, edges_)) throw ValidationError("graph not connected");

    // Sums already at roundoff level are left alone so that reloading a
    // saved network reproduces it bit for bit.
    const double sum = omega_.sum();
    if (std::abs(sum) > 1e-14 * std::max(1.0, omega_.lpNorm<1>())) {
      omega_.array() -= sum / static_cast<double>(node_count);
    }

    adjacency_.resize(node_count);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      adjacency_[edges_[e].u].push_back({edges_[e].v, e});
      adjacency_[edges_[e].v].push_back({edges_[e].u, e});
    }
  }

  std::size_t size() const { return adjacency_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  const Eigen::VectorXd& omega() const { return omega_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::string>& labels() const { return labels_; }

  struct Neighbor {
    std::size_t node;
    std::size_t edge;
  };
  const std::vector<Neighbor>& neighbors(std::size_t i) const { return adjacency_[i]; }

  Eigen::VectorXd couplings() const {
    Eigen::VectorXd k(static_cast<Eigen::Index>(edges_.size()));
    for (std::size_t e = 0; e < edges_.size(); ++e) k[static_cast<Eigen::Index>(e)] = edges_[e].k;
    return k;
  }

  std::optional<std::size_t> find_edge(std::size_t a, std::size_t b) const {
    if (a >= size() || b >= size()) return std::nullopt;
    for (const auto& nb : adjacency_[a]) {
      if (nb.node == b) return nb.edge;
    }
    return std::nullopt;
  }

  std::string label(std::size_t i) const { return labels_.empty() ? std::to_string(i) : labels_[i]; }

  Network with_omega(Eigen::VectorXd omega) const { return Network(size(), std::move(omega), edges_, labels_); }

  Network with_couplings(const Eigen::VectorXd& k) const {
    if (static_cast<std::size_t>(k.size()) != edges_.size()) {
      throw ValidationError("coupling vector length does not match edge count");
    }
    auto edges = edges_;
    for (std::size_t e = 0; e < edges.size(); ++e) edges[e].k = k[static_cast<Eigen::Index>(e)];
    return Network(size(), omega_, std::move(edges), labels_);
  }

  friend bool operator==(const Network& a, const Network& b) {
    return a.omega_.size() == b.omega_.size() && a.omega_ == b.omega_ && a.edges_ == b.edges_ &&
           a.labels_ == b.labels_;
  }

 private:
  Eigen::VectorXd omega_;
  std::vector<Edge> edges_;
  std::vector<std::string> labels_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

/// Which edge weights a Laplacian was assembled from.
enum class WeightSource { graph, exact_state, approx_state };

inline const char* to_string(WeightSource s) {
  switch (s) {
    case WeightSource::graph: return "graph";
    case WeightSource::exact_state: return "exact_state";
    case WeightSource::approx_state: return "approx_state";
  }
  return "unknown";
}

struct LaplacianBundle {
  Eigen::MatrixXd laplacian;
  Eigen::MatrixXd pinv;
  WeightSource source = WeightSource::graph;
};

/// Dense weighted Laplacian: L_ii = sum_l w_il, L_ij = -w_ij.
inline Eigen::MatrixXd laplacian_matrix(std::size_t node_count, const std::vector<Edge>& edges) {
  const auto n = static_cast<Eigen::Index>(node_count);
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : edges) {
    const auto u = static_cast<Eigen::Index>(e.u);
    const auto v = static_cast<Eigen::Index>(e.v);
    lap(u, u) += e.k;
    lap(v, v) += e.k;
    lap(u, v) -= e.k;
    lap(v, u) -= e.k;
  }
  return lap;
}

/// Moore-Penrose pseudoinverse of a connected Laplacian through the
/// rank-one shift (L + J/N)^-1 - J/N.
inline Eigen::MatrixXd laplacian_pinv(const Eigen::MatrixXd& lap) {
  const auto n = lap.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd shifted = lap;
  shifted.array() += inv_n;
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success) throw ValidationError("graph not connected");
  Eigen::MatrixXd pinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  pinv.array() -= inv_n;
  // Symmetrize away roundoff; downstream code relies on exact symmetry.
  pinv = 0.5 * (pinv + pinv.transpose()).eval();
  return pinv;
}

inline LaplacianBundle build_graph_laplacian(const Network& net) {
  LaplacianBundle bundle;
  bundle.laplacian = laplacian_matrix(net.size(), net.edges());
  bundle.pinv = laplacian_pinv(bundle.laplacian);
  bundle.source = WeightSource::graph;
  return bundle;
}

}  // namespace kurastab

#endif  // KURASTAB_NETWORK_HPP
