#pragma once

#include "dgd/core.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dgd {

/// A Lipschitz-differentiable f_i : R^p -> R with its analytic gradient.
struct SmoothObjective {
  std::size_t dimension = 1;
  std::function<double(const Point&)> value;
  std::function<Point(const Point&)> gradient;
  double lipschitz = 1.0;
  std::optional<double> gradient_bound;
};

/// The n agents' objectives stacked as 1^T f(x) = sum_i f_i(x_(i)).
class StackedObjective {
 public:
  explicit StackedObjective(std::vector<SmoothObjective> agents)
      : agents_(std::move(agents)) {
    if (agents_.empty()) throw ValidationError("objective: at least one agent required");
    const std::size_t p = agents_.front().dimension;
    for (const auto& a : agents_) {
      if (a.dimension != p) throw ValidationError("objective: agents disagree on dimension");
      if (!(a.lipschitz > 0.0)) throw ValidationError("objective: Lipschitz constant must be positive");
      if (!a.value || !a.gradient) throw ValidationError("objective: missing value or gradient");
      lipschitz_ = std::max(lipschitz_, a.lipschitz);
    }
  }

  std::size_t agent_count() const { return agents_.size(); }
  std::size_t dimension() const { return agents_.front().dimension; }
  const SmoothObjective& agent(std::size_t i) const { return agents_[i]; }
  const std::vector<SmoothObjective>& agents() const { return agents_; }
  /// L_f = max_i L_{f_i}.
  double lipschitz() const { return lipschitz_; }

  /// f(u) = sum_i f_i(u) for a single consensual point.
  double consensual_value(const Point& u) const {
    double total = 0.0;
    for (const auto& a : agents_) total += a.value(u);
    return total;
  }

 private:
  std::vector<SmoothObjective> agents_;
  double lipschitz_ = 0.0;
};

namespace detail {
inline void check_shape(const StackedObjective& obj, const IterateMatrix& x) {
  if (static_cast<std::size_t>(x.rows()) != obj.agent_count() ||
      static_cast<std::size_t>(x.cols()) != obj.dimension()) {
    throw ValidationError("objective: iterate is " + std::to_string(x.rows()) + "x" +
                          std::to_string(x.cols()) + ", expected " +
                          std::to_string(obj.agent_count()) + "x" +
                          std::to_string(obj.dimension()));
  }
}
}  // namespace detail

inline double stacked_value(const StackedObjective& obj, const IterateMatrix& x) {
  detail::check_shape(obj, x);
  double total = 0.0;
  for (std::size_t i = 0; i < obj.agent_count(); ++i) {
    total += obj.agent(i).value(x.row(static_cast<Eigen::Index>(i)).transpose());
  }
  return total;
}

/// Row i is grad f_i(x_(i)).
inline IterateMatrix stacked_gradient(const StackedObjective& obj, const IterateMatrix& x) {
  detail::check_shape(obj, x);
  IterateMatrix g(x.rows(), x.cols());
  for (std::size_t i = 0; i < obj.agent_count(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    g.row(row) = obj.agent(i).gradient(x.row(row).transpose()).transpose();
  }
  return g;
}

/// Scalar piecewise objective: a polynomial core on |x| <= 10 extended by
/// its tangent lines, which keeps it C^1 with bounded derivative.
struct ToyPiece {
  std::function<double(double)> core;
  std::function<double(double)> core_slope;
  double lipschitz;

  static constexpr double kJunction = 10.0;

  double value(double x) const {
    if (x > kJunction) return core(kJunction) + core_slope(kJunction) * (x - kJunction);
    if (x < -kJunction) return core(-kJunction) + core_slope(-kJunction) * (x + kJunction);
    return core(x);
  }
  double slope(double x) const {
    if (x > kJunction) return core_slope(kJunction);
    if (x < -kJunction) return core_slope(-kJunction);
    return core_slope(x);
  }
};

/// The three one-dimensional cubic agents of the nonconvex DGD experiment.
inline std::vector<ToyPiece> paper_toy_pieces() {
  return {
      // (x^3 - 16x)(x + 2) = x^4 + 2x^3 - 16x^2 - 32x
      {[](double x) { return (x * x * x - 16.0 * x) * (x + 2.0); },
       [](double x) { return 4.0 * x * x * x + 6.0 * x * x - 32.0 * x - 32.0; }, 1288.0},
      // (0.5x^3 + x^2)(x - 4) = 0.5x^4 - x^3 - 4x^2; |f''| peaks at x = -10.
      {[](double x) { return (0.5 * x * x * x + x * x) * (x - 4.0); },
       [](double x) { return 2.0 * x * x * x - 3.0 * x * x - 8.0 * x; }, 652.0},
      // (x + 2)^2 (x - 4) = x^3 - 12x - 16
      {[](double x) { return (x + 2.0) * (x + 2.0) * (x - 4.0); },
       [](double x) { return 3.0 * x * x - 12.0; }, 60.0},
  };
}

inline StackedObjective paper_toy_problem() {
  std::vector<SmoothObjective> agents;
  for (auto piece : paper_toy_pieces()) {
    // Bounded slope: the extension slope dominates the core on |x| <= 10.
    const double bound = std::max(std::abs(piece.slope(10.0)), std::abs(piece.slope(-10.0)));
    agents.push_back(SmoothObjective{
        1,
        [piece](const Point& u) { return piece.value(u(0)); },
        [piece](const Point& u) { return Point::Constant(1, piece.slope(u(0))); },
        piece.lipschitz,
        bound,
    });
  }
  return StackedObjective(std::move(agents));
}

/// Per-agent data of a planted sparse least-squares instance.
struct LeastSquaresData {
  std::vector<Matrix> design;    // B_(i), m_i x p
  std::vector<Point> response;   // b_(i)
  Point ground_truth;            // planted x with `sparsity` nonzeros
};

struct LeastSquaresProblem {
  StackedObjective objective;
  Point ground_truth;
  LeastSquaresData data;
};

/// f_i(x) = 0.5 ||B_(i) x - b_(i)||^2 with standard-normal B_(i) and
/// b_(i) = B_(i) x_planted + noise * N(0, 1).
///
/// Generation order from the seed: support (partial Fisher-Yates), planted
/// values, then for each agent its design row-major followed by its noise.
inline LeastSquaresProblem decentralized_least_squares(std::uint64_t seed, std::size_t n,
                                                       std::size_t p, std::size_t rows,
                                                       std::size_t sparsity,
                                                       double noise = 0.0) {
  if (n == 0 || p == 0 || rows == 0)
    throw ValidationError("least_squares: n, p and m_i must be positive");
  if (sparsity > p) throw ValidationError("least_squares: sparsity exceeds dimension");
  if (!(noise >= 0.0)) throw ValidationError("least_squares: noise must be nonnegative");

  NormalGenerator gen(seed);
  std::vector<std::size_t> index(p);
  for (std::size_t j = 0; j < p; ++j) index[j] = j;
  for (std::size_t j = 0; j < sparsity; ++j) {
    const std::size_t pick = j + static_cast<std::size_t>(gen.next_bits() % (p - j));
    std::swap(index[j], index[pick]);
  }
  Point truth = Point::Zero(static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < sparsity; ++j) truth(static_cast<Eigen::Index>(index[j])) = gen();

  LeastSquaresData data;
  data.ground_truth = truth;
  std::vector<SmoothObjective> agents;
  for (std::size_t i = 0; i < n; ++i) {
    Matrix b(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(p));
    for (Eigen::Index r = 0; r < b.rows(); ++r)
      for (Eigen::Index c = 0; c < b.cols(); ++c) b(r, c) = gen();
    Point response = b * truth;
    if (noise > 0.0)
      for (Eigen::Index r = 0; r < response.size(); ++r) response(r) += noise * gen();

    Eigen::SelfAdjointEigenSolver<Matrix> solver(b.transpose() * b, Eigen::EigenvaluesOnly);
    const double lipschitz = std::max(solver.eigenvalues().maxCoeff(), 1e-12);

    agents.push_back(SmoothObjective{
        p,
        [b, response](const Point& x) { return 0.5 * (b * x - response).squaredNorm(); },
        [b, response](const Point& x) -> Point { return b.transpose() * (b * x - response); },
        lipschitz,
        std::nullopt,
    });
    data.design.push_back(std::move(b));
    data.response.push_back(std::move(response));
  }
  return {StackedObjective(std::move(agents)), truth, std::move(data)};
}

/// Minimizer of sum_i f_i(u) from the aggregated normal equations.
inline Point aggregated_least_squares_solution(const LeastSquaresData& data) {
  const auto p = data.ground_truth.size();
  Matrix gram = Matrix::Zero(p, p);
  Point rhs = Point::Zero(p);
  for (std::size_t i = 0; i < data.design.size(); ++i) {
    gram.noalias() += data.design[i].transpose() * data.design[i];
    rhs.noalias() += data.design[i].transpose() * data.response[i];
  }
  return gram.ldlt().solve(rhs);
}

}  // namespace dgd
