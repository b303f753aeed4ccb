#pragma once

#include "dgd/core.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cstddef>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace dgd {

/// Simple connected undirected graph on nodes 0..n-1.
class Graph {
 public:
  using Edge = std::pair<std::size_t, std::size_t>;

  Graph(std::size_t node_count, std::vector<Edge> edges)
      : node_count_(node_count) {
    if (node_count == 0) throw ValidationError("graph: node_count must be positive");
    for (auto [i, j] : edges) {
      if (i >= node_count || j >= node_count) {
        throw ValidationError("graph: edge (" + std::to_string(i) + "," +
                              std::to_string(j) + ") references a missing node");
      }
      if (i == j) {
        throw ValidationError("graph: self-loop at node " + std::to_string(i));
      }
      edges_.emplace_back(std::min(i, j), std::max(i, j));
    }
    std::sort(edges_.begin(), edges_.end());
    auto dup = std::adjacent_find(edges_.begin(), edges_.end());
    if (dup != edges_.end()) {
      throw ValidationError("graph: duplicate edge (" + std::to_string(dup->first) +
                            "," + std::to_string(dup->second) + ")");
    }
    adjacency_.resize(node_count);
    for (auto [i, j] : edges_) {
      adjacency_[i].push_back(j);
      adjacency_[j].push_back(i);
    }
    for (auto& row : adjacency_) std::sort(row.begin(), row.end());

    auto parts = components();
    if (parts.size() > 1) {
      std::ostringstream msg;
      msg << "graph: disconnected, components:";
      for (const auto& part : parts) {
        msg << " {";
        for (std::size_t k = 0; k < part.size(); ++k) msg << (k ? "," : "") << part[k];
        msg << "}";
      }
      throw ValidationError(msg.str());
    }
  }

  std::size_t node_count() const { return node_count_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return adjacency_[i]; }
  std::size_t degree(std::size_t i) const { return adjacency_[i].size(); }

  bool has_edge(std::size_t i, std::size_t j) const {
    const auto& row = adjacency_[i];
    return std::binary_search(row.begin(), row.end(), j);
  }

 private:
  std::vector<std::vector<std::size_t>> components() const {
    std::vector<std::vector<std::size_t>> parts;
    std::vector<bool> seen(node_count_, false);
    for (std::size_t start = 0; start < node_count_; ++start) {
      if (seen[start]) continue;
      std::vector<std::size_t> part;
      std::queue<std::size_t> frontier;
      frontier.push(start);
      seen[start] = true;
      while (!frontier.empty()) {
        std::size_t v = frontier.front();
        frontier.pop();
        part.push_back(v);
        for (std::size_t w : adjacency_[v]) {
          if (!seen[w]) {
            seen[w] = true;
            frontier.push(w);
          }
        }
      }
      std::sort(part.begin(), part.end());
      parts.push_back(std::move(part));
    }
    return parts;
  }

  std::size_t node_count_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

inline Graph path_graph(std::size_t n) {
  std::vector<Graph::Edge> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  return Graph(n, std::move(edges));
}

inline Graph cycle_graph(std::size_t n) {
  if (n < 3) return path_graph(n);
  std::vector<Graph::Edge> edges;
  for (std::size_t i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
  return Graph(n, std::move(edges));
}

inline Graph complete_graph(std::size_t n) {
  std::vector<Graph::Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) edges.emplace_back(i, j);
  return Graph(n, std::move(edges));
}

inline Graph star_graph(std::size_t n) {
  std::vector<Graph::Edge> edges;
  for (std::size_t i = 1; i < n; ++i) edges.emplace_back(0, i);
  return Graph(n, std::move(edges));
}

/// Step-size ceilings implied by the mixing spectrum.
struct StepBounds {
  /// (1 + lambda_n) / L_f: DGD, and Prox-DGD with convex regularizers.
  double dgd;
  /// lambda_n / L_f, present only when lambda_n > 0 (nonconvex regularizers).
  std::optional<double> proxdgd_nonconvex;
};

/// Validated symmetric doubly stochastic mixing matrix with its spectrum.
///
/// Construction enforces: exact symmetry, the graph's sparsity pattern with
/// positive edge weights, unit row sums (1e-12), a simple top eigenvalue
/// equal to 1, and lambda_n > -1. Immutable afterwards.
class MixingSpec {
 public:
  static constexpr double kRowSumTolerance = 1e-12;
  static constexpr double kSpectralTolerance = 1e-10;

  static MixingSpec from_matrix(const Matrix& entries, Graph graph) {
    return MixingSpec(entries, std::move(graph));
  }

  const Matrix& weights() const { return weights_; }
  const Graph& graph() const { return graph_; }
  std::size_t size() const { return graph_.node_count(); }
  /// Eigenvalues, nonincreasing.
  const Point& spectrum() const { return spectrum_; }
  double zeta() const { return zeta_; }
  double lambda_min() const { return spectrum_(spectrum_.size() - 1); }

  /// W x with a fixed row-major, ascending-j accumulation order.
  IterateMatrix mix(const IterateMatrix& x) const {
    IterateMatrix out = IterateMatrix::Zero(x.rows(), x.cols());
    for (std::size_t i = 0; i < stencil_.size(); ++i) {
      auto row = out.row(static_cast<Eigen::Index>(i));
      for (const auto& [j, w] : stencil_[i]) {
        row.noalias() += w * x.row(static_cast<Eigen::Index>(j));
      }
    }
    return out;
  }

  /// (I - W) x.
  IterateMatrix laplacian(const IterateMatrix& x) const { return x - mix(x); }

  /// <x, (I - W) x>, the squared (I-W) semi-norm.
  double semi_norm_sq(const IterateMatrix& x) const {
    return (x.array() * laplacian(x).array()).sum();
  }

 private:
  MixingSpec(const Matrix& w, Graph graph) : weights_(w), graph_(std::move(graph)) {
    const auto n = static_cast<Eigen::Index>(graph_.node_count());
    if (w.rows() != n || w.cols() != n) {
      throw ValidationError("mixing: matrix is " + std::to_string(w.rows()) + "x" +
                            std::to_string(w.cols()) + " but graph has " +
                            std::to_string(n) + " nodes");
    }
    if (!w.allFinite()) throw ValidationError("mixing: non-finite entry");
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (w(i, j) != w(j, i)) {
          throw ValidationError("mixing: asymmetry at (" + std::to_string(i) + "," +
                                std::to_string(j) + ")");
        }
        if (i == j) continue;
        const bool edge = graph_.has_edge(static_cast<std::size_t>(i),
                                          static_cast<std::size_t>(j));
        if (!edge && w(i, j) != 0.0) {
          throw ValidationError("mixing: wrong sparsity, nonzero weight off the graph at (" +
                                std::to_string(i) + "," + std::to_string(j) + ")");
        }
        if (edge && !(w(i, j) > 0.0)) {
          throw ValidationError("mixing: wrong sparsity, nonpositive weight on edge (" +
                                std::to_string(i) + "," + std::to_string(j) + ")");
        }
      }
      const double row_sum = w.row(i).sum();
      if (std::abs(row_sum - 1.0) > kRowSumTolerance) {
        throw ValidationError("mixing: row sum " + std::to_string(row_sum) + " != 1 in row " +
                              std::to_string(i));
      }
    }

    Eigen::SelfAdjointEigenSolver<Matrix> solver(w, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw ValidationError("mixing: eigensolver failed");
    spectrum_ = solver.eigenvalues().reverse();
    const double top = spectrum_(0);
    if (std::abs(top - 1.0) > kSpectralTolerance) {
      throw ValidationError("mixing: largest eigenvalue " + std::to_string(top) + " != 1");
    }
    if (n > 1 && !(top - spectrum_(1) > kSpectralTolerance)) {
      throw ValidationError(
          "mixing: null space of I-W larger than span{1} (eigenvalue 1 has multiplicity > 1)");
    }
    if (!(lambda_min() > -1.0 + kSpectralTolerance)) {
      throw ValidationError("mixing: lambda_n = " + std::to_string(lambda_min()) +
                            " violates lambda_n > -1");
    }
    zeta_ = n > 1 ? std::max(std::abs(spectrum_(1)), std::abs(lambda_min())) : 0.0;

    stencil_.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (w(i, j) != 0.0) stencil_[static_cast<std::size_t>(i)].emplace_back(j, w(i, j));
  }

  Matrix weights_;
  Graph graph_;
  Point spectrum_;
  double zeta_ = 0.0;
  std::vector<std::vector<std::pair<Eigen::Index, double>>> stencil_;
};

/// Metropolis weights: w_ij = 1 / (1 + max(deg_i, deg_j)) on edges.
inline MixingSpec build_metropolis(const Graph& graph) {
  const auto n = static_cast<Eigen::Index>(graph.node_count());
  Matrix w = Matrix::Zero(n, n);
  for (auto [i, j] : graph.edges()) {
    const double weight = 1.0 / (1.0 + static_cast<double>(std::max(graph.degree(i),
                                                                    graph.degree(j))));
    w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = weight;
    w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = weight;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) off += w(i, j);
    w(i, i) = 1.0 - off;
  }
  return MixingSpec::from_matrix(w, graph);
}

/// beta I + (1 - beta) W. Shifts lambda_n to beta + (1 - beta) lambda_n.
inline MixingSpec make_lazy(const MixingSpec& mix, double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) throw ValidationError("lazy: beta must lie in [0, 1)");
  const auto n = static_cast<Eigen::Index>(mix.size());
  Matrix w = (1.0 - beta) * mix.weights();
  w.diagonal().array() += beta;
  // Rebalance the diagonal so rows sum to one after rounding.
  for (Eigen::Index i = 0; i < n; ++i) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) off += w(i, j);
    w(i, i) = 1.0 - off;
  }
  return MixingSpec::from_matrix(w, mix.graph());
}

/// Spectral norm of W^k - (1/n) 1 1^T.
///
/// Powers the deviation D = W - (1/n) 1 1^T directly (D^k = W^k - (1/n) 1 1^T),
/// which keeps relative accuracy when the result is tiny.
inline double power_deviation(const MixingSpec& mix, unsigned k) {
  const auto n = static_cast<Eigen::Index>(mix.size());
  if (n == 1) return 0.0;
  const Matrix deviation =
      mix.weights() - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  Matrix result = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  Matrix base = deviation;
  for (unsigned e = k; e > 0; e >>= 1) {
    if (e & 1u) result = (result * base).eval();
    base = (base * base).eval();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(result, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

inline StepBounds safe_step_bounds(const MixingSpec& mix, double lipschitz) {
  if (!(lipschitz > 0.0)) throw ValidationError("safe_step_bounds: L_f must be positive");
  StepBounds bounds{(1.0 + mix.lambda_min()) / lipschitz, std::nullopt};
  // lambda_n within rounding of 0 counts as 0.
  if (mix.lambda_min() > MixingSpec::kSpectralTolerance) bounds.proxdgd_nonconvex = mix.lambda_min() / lipschitz;
  return bounds;
}

}  // namespace dgd
