#pragma once

#include "dgd/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace dgd {

namespace penalty {
struct Zero {};
struct L1 { double lambda; };
struct L0 { double lambda; };
/// lambda * sum_j |u_j|^q, 0 <= q < 1, with 0^0 = 0.
struct Lq { double lambda; double q; };
struct Scad { double lambda; double a = 3.7; };
struct Mcp { double lambda; double gamma = 2.0; };
/// Indicator of [lo, hi] applied to every component.
struct Box { double lo; double hi; };
/// Indicator of the Euclidean ball of the given radius.
struct Ball { double radius; };
}  // namespace penalty

using Penalty = std::variant<penalty::Zero, penalty::L1, penalty::L0, penalty::Lq,
                             penalty::Scad, penalty::Mcp, penalty::Box, penalty::Ball>;

namespace scalar {

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

inline double soft_threshold(double v, double t) {
  return sign(v) * std::max(std::abs(v) - t, 0.0);
}

/// Hard threshold at t; a tie |v| == t returns 0.
inline double hard_threshold(double v, double t) { return std::abs(v) > t ? v : 0.0; }

inline double scad_penalty(double t, double lambda, double a) {
  t = std::abs(t);
  if (t <= lambda) return lambda * t;
  if (t <= a * lambda) return (2.0 * a * lambda * t - t * t - lambda * lambda) / (2.0 * (a - 1.0));
  return 0.5 * lambda * lambda * (a + 1.0);
}

inline double mcp_penalty(double t, double lambda, double gamma) {
  t = std::abs(t);
  if (t <= gamma * lambda) return lambda * t - t * t / (2.0 * gamma);
  return 0.5 * gamma * lambda * lambda;
}

inline double lq_penalty(double t, double lambda, double q) {
  if (t == 0.0) return 0.0;
  if (q == 0.0) return lambda;
  return lambda * std::pow(std::abs(t), q);
}

/// Picks the candidate minimizing penalty(u) * alpha + (u - v)^2 / 2;
/// ties go to the candidate of smaller magnitude.
template <typename Fn, std::size_t N>
double best_candidate(const std::array<double, N>& candidates, double v, double alpha,
                      Fn&& pen) {
  double best = 0.0;
  double best_obj = kInfinity;
  for (double u : candidates) {
    const double obj = alpha * pen(u) + 0.5 * (u - v) * (u - v);
    if (obj < best_obj || (obj == best_obj && std::abs(u) < std::abs(best))) {
      best = u;
      best_obj = obj;
    }
  }
  return best;
}

/// Global minimizer of alpha*SCAD(u) + (u-v)^2/2, enumerating the stationary
/// point of each quadratic piece (clamped to its interval) and the breakpoints.
inline double scad_prox(double v, double alpha, double lambda, double a) {
  const double s = sign(v);
  const double m = std::abs(v);
  const double t1 = std::clamp(m - alpha * lambda, 0.0, lambda);
  double t2 = a * lambda;
  const double curvature = 1.0 - alpha / (a - 1.0);
  if (curvature > 0.0) {
    t2 = std::clamp((m - alpha * a * lambda / (a - 1.0)) / curvature, lambda, a * lambda);
  }
  const double t3 = std::max(m, a * lambda);
  const std::array<double, 5> cands{0.0, t1, lambda, t2, t3};
  const double t = best_candidate(cands, m, alpha, [&](double u) {
    return scad_penalty(u, lambda, a);
  });
  return s * t;
}

inline double mcp_prox(double v, double alpha, double lambda, double gamma) {
  const double s = sign(v);
  const double m = std::abs(v);
  const double knee = gamma * lambda;
  double t1 = knee;
  const double curvature = 1.0 - alpha / gamma;
  if (curvature > 0.0) t1 = std::clamp((m - alpha * lambda) / curvature, 0.0, knee);
  const double t2 = std::max(m, knee);
  const std::array<double, 4> cands{0.0, t1, knee, t2};
  const double t = best_candidate(cands, m, alpha, [&](double u) {
    return mcp_penalty(u, lambda, gamma);
  });
  return s * t;
}

/// Smallest nonzero magnitude a minimizer of mu*|u|^q + (u-v)^2/2 can have:
/// (2 mu (1 - q))^(1/(2-q)), mu = alpha * lambda.
inline double lq_lower_bound(double alpha, double lambda, double q) {
  return std::pow(2.0 * alpha * lambda * (1.0 - q), 1.0 / (2.0 - q));
}

/// Larger root of h(u) = u - m + mu q u^(q-1) on [u_turn, m], where h is
/// convex and u_turn is its minimizer; nullopt when h stays positive.
inline std::optional<double> lq_stationary_root(double m, double mu, double q) {
  auto h = [&](double u) { return u - m + mu * q * std::pow(u, q - 1.0); };
  const double turn = std::pow(mu * q * (1.0 - q), 1.0 / (2.0 - q));
  if (turn >= m || h(turn) > 0.0) return std::nullopt;
  double lo = turn;
  double hi = m;  // h(m) = mu q m^(q-1) > 0
  double u = hi;
  for (int it = 0; it < 200; ++it) {
    // Newton from the right stays in the bracket because h is convex and
    // increasing there; fall back to bisection if it escapes.
    const double dh = 1.0 + mu * q * (q - 1.0) * std::pow(u, q - 2.0);
    double next = dh > 0.0 ? u - h(u) / dh : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (h(next) > 0.0) hi = next; else lo = next;
    if (std::abs(next - u) <= 1e-15 * std::max(1.0, u)) {
      u = next;
      break;
    }
    u = next;
  }
  return u;
}

/// Half thresholding (q = 1/2), closed form for min mu |u|^(1/2) + (u-v)^2/2.
inline double half_threshold_candidate(double m, double mu) {
  // In the (u - v)^2 + lam |u|^(1/2) scaling, lam = 2 mu.
  const double lam = 2.0 * mu;
  const double threshold = std::cbrt(54.0) / 4.0 * std::pow(lam, 2.0 / 3.0);
  if (m <= threshold) return 0.0;
  const double phi = std::acos(std::clamp(lam / 8.0 * std::pow(m / 3.0, -1.5), -1.0, 1.0));
  return 2.0 / 3.0 * m * (1.0 + std::cos(2.0 * M_PI / 3.0 - 2.0 * phi / 3.0));
}

/// Two-thirds thresholding, closed form for min mu |u|^(2/3) + (u-v)^2/2.
inline double two_thirds_threshold_candidate(double m, double mu) {
  const double lam = 2.0 * mu;
  const double threshold = 2.0 / 3.0 * std::pow(3.0 * lam * lam * lam, 0.25);
  if (m <= threshold) return 0.0;
  const double phi = std::acosh(27.0 / 16.0 * m * m * std::pow(lam, -1.5));
  const double big_a = 2.0 / std::sqrt(3.0) * std::pow(lam, 0.25) * std::sqrt(std::cosh(phi / 3.0));
  const double inner = big_a + std::sqrt(std::max(2.0 * m / big_a - big_a * big_a, 0.0));
  return inner * inner * inner / 8.0;
}

inline double lq_prox(double v, double alpha, double lambda, double q) {
  const double mu = alpha * lambda;
  if (q == 0.0) return hard_threshold(v, std::sqrt(2.0 * mu));
  const double s = sign(v);
  const double m = std::abs(v);
  double candidate = 0.0;
  if (q == 0.5) {
    candidate = half_threshold_candidate(m, mu);
  } else if (std::abs(q - 2.0 / 3.0) < 1e-15) {
    candidate = two_thirds_threshold_candidate(m, mu);
  } else if (auto root = lq_stationary_root(m, mu, q)) {
    candidate = *root;
  }
  const std::array<double, 2> cands{0.0, candidate};
  return s * best_candidate(cands, m, alpha, [&](double u) { return lq_penalty(u, lambda, q); });
}

}  // namespace scalar

/// A proximable per-agent function r_i.
class Regularizer {
 public:
  Regularizer() = default;
  explicit Regularizer(Penalty penalty) : penalty_(penalty) { validate(); }

  static Regularizer zero() { return Regularizer(penalty::Zero{}); }
  static Regularizer l1(double lambda) { return Regularizer(penalty::L1{lambda}); }
  static Regularizer l0(double lambda) { return Regularizer(penalty::L0{lambda}); }
  static Regularizer lq(double lambda, double q) { return Regularizer(penalty::Lq{lambda, q}); }
  static Regularizer scad(double lambda, double a = 3.7) { return Regularizer(penalty::Scad{lambda, a}); }
  static Regularizer mcp(double lambda, double gamma = 2.0) { return Regularizer(penalty::Mcp{lambda, gamma}); }
  static Regularizer box(double lo, double hi) { return Regularizer(penalty::Box{lo, hi}); }
  static Regularizer ball(double radius) { return Regularizer(penalty::Ball{radius}); }

  const Penalty& penalty() const { return penalty_; }

  std::string kind() const {
    static constexpr std::array<const char*, 8> names{"zero", "l1", "l0", "lq",
                                                      "scad", "mcp", "box", "ball"};
    return names[penalty_.index()];
  }

  bool is_zero() const { return std::holds_alternative<penalty::Zero>(penalty_); }

  bool is_convex() const {
    return std::visit(
        [](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          return std::is_same_v<T, penalty::Zero> || std::is_same_v<T, penalty::L1> ||
                 std::is_same_v<T, penalty::Box> || std::is_same_v<T, penalty::Ball>;
        },
        penalty_);
  }

  /// Componentwise prox; false only for the ball.
  bool is_separable() const { return !std::holds_alternative<penalty::Ball>(penalty_); }

  /// B_{r_i} bounding every subgradient, when one exists.
  std::optional<double> subgradient_bound(std::size_t dimension) const {
    if (is_zero()) return 0.0;
    if (const auto* p = std::get_if<penalty::L1>(&penalty_))
      return p->lambda * std::sqrt(static_cast<double>(dimension));
    return std::nullopt;
  }

  /// r(v); +infinity outside an indicator's set.
  double value(const Point& v) const {
    return std::visit(
        [&](const auto& p) -> double {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, penalty::Zero>) {
            return 0.0;
          } else if constexpr (std::is_same_v<T, penalty::L1>) {
            return p.lambda * v.lpNorm<1>();
          } else if constexpr (std::is_same_v<T, penalty::L0>) {
            return p.lambda * static_cast<double>((v.array() != 0.0).count());
          } else if constexpr (std::is_same_v<T, penalty::Lq>) {
            double total = 0.0;
            for (double t : v) total += scalar::lq_penalty(t, p.lambda, p.q);
            return total;
          } else if constexpr (std::is_same_v<T, penalty::Scad>) {
            double total = 0.0;
            for (double t : v) total += scalar::scad_penalty(t, p.lambda, p.a);
            return total;
          } else if constexpr (std::is_same_v<T, penalty::Mcp>) {
            double total = 0.0;
            for (double t : v) total += scalar::mcp_penalty(t, p.lambda, p.gamma);
            return total;
          } else if constexpr (std::is_same_v<T, penalty::Box>) {
            return ((v.array() >= p.lo) && (v.array() <= p.hi)).all() ? 0.0 : kInfinity;
          } else {
            return v.norm() <= p.radius ? 0.0 : kInfinity;
          }
        },
        penalty_);
  }

  /// argmin_u alpha r(u) + ||u - v||^2 / 2.
  Point prox(const Point& v, double alpha) const {
    if (!(alpha > 0.0)) throw ValidationError("prox: alpha must be positive");
    if (const auto* ball = std::get_if<penalty::Ball>(&penalty_)) {
      const double norm = v.norm();
      return norm <= ball->radius ? v : Point(v * (ball->radius / norm));
    }
    Point out(v.size());
    for (Eigen::Index j = 0; j < v.size(); ++j) out(j) = prox_scalar(v(j), alpha);
    return out;
  }

  /// Componentwise prox for separable kinds.
  double prox_scalar(double v, double alpha) const {
    return std::visit(
        [&](const auto& p) -> double {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, penalty::Zero>) {
            return v;
          } else if constexpr (std::is_same_v<T, penalty::L1>) {
            return scalar::soft_threshold(v, alpha * p.lambda);
          } else if constexpr (std::is_same_v<T, penalty::L0>) {
            return scalar::hard_threshold(v, std::sqrt(2.0 * alpha * p.lambda));
          } else if constexpr (std::is_same_v<T, penalty::Lq>) {
            return scalar::lq_prox(v, alpha, p.lambda, p.q);
          } else if constexpr (std::is_same_v<T, penalty::Scad>) {
            return scalar::scad_prox(v, alpha, p.lambda, p.a);
          } else if constexpr (std::is_same_v<T, penalty::Mcp>) {
            return scalar::mcp_prox(v, alpha, p.lambda, p.gamma);
          } else if constexpr (std::is_same_v<T, penalty::Box>) {
            return std::clamp(v, p.lo, p.hi);
          } else {
            return std::clamp(v, -p.radius, p.radius);
          }
        },
        penalty_);
  }

 private:
  void validate() const {
    std::visit(
        [](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, penalty::L1> || std::is_same_v<T, penalty::L0>) {
            if (!(p.lambda >= 0.0)) throw ValidationError("regularizer: lambda must be >= 0");
          } else if constexpr (std::is_same_v<T, penalty::Lq>) {
            if (!(p.lambda >= 0.0)) throw ValidationError("regularizer: lambda must be >= 0");
            if (!(p.q >= 0.0 && p.q < 1.0)) throw ValidationError("regularizer: lq needs q in [0, 1)");
          } else if constexpr (std::is_same_v<T, penalty::Scad>) {
            if (!(p.lambda >= 0.0)) throw ValidationError("regularizer: lambda must be >= 0");
            if (!(p.a > 2.0)) throw ValidationError("regularizer: scad needs a > 2");
          } else if constexpr (std::is_same_v<T, penalty::Mcp>) {
            if (!(p.lambda >= 0.0)) throw ValidationError("regularizer: lambda must be >= 0");
            if (!(p.gamma > 1.0)) throw ValidationError("regularizer: mcp needs gamma > 1");
          } else if constexpr (std::is_same_v<T, penalty::Box>) {
            if (!(p.lo <= p.hi)) throw ValidationError("regularizer: box needs lo <= hi");
          } else if constexpr (std::is_same_v<T, penalty::Ball>) {
            if (!(p.radius >= 0.0)) throw ValidationError("regularizer: ball radius must be >= 0");
          }
        },
        penalty_);
  }

  Penalty penalty_ = penalty::Zero{};
};

/// r(x) = sum_i r_i(x_(i)).
inline double stacked_regularizer_value(const std::vector<Regularizer>& regs,
                                        const IterateMatrix& x) {
  if (regs.size() != static_cast<std::size_t>(x.rows()))
    throw ValidationError("regularizer: list length does not match agent count");
  double total = 0.0;
  for (std::size_t i = 0; i < regs.size(); ++i)
    total += regs[i].value(x.row(static_cast<Eigen::Index>(i)).transpose());
  return total;
}

/// Row i is prox(r_i, x_(i), alpha).
inline IterateMatrix stacked_prox(const std::vector<Regularizer>& regs, const IterateMatrix& x,
                                  double alpha) {
  if (regs.size() != static_cast<std::size_t>(x.rows()))
    throw ValidationError("regularizer: list length does not match agent count");
  if (!(alpha > 0.0)) throw ValidationError("prox: alpha must be positive");
  IterateMatrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < regs.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    out.row(row) = regs[i].prox(x.row(row).transpose(), alpha).transpose();
  }
  return out;
}

}  // namespace dgd
