#pragma once

#include "dgd/core.hpp"

#include <cmath>
#include <optional>
#include <string>

namespace dgd {

/// Fixed alpha, or alpha_k = c / (L_f (k+1)^eps) with 0 < eps <= 1.
class StepSchedule {
 public:
  enum class Kind { Fixed, Decreasing };

  /// Constant step; `bound` is the theorem ceiling it is compared against.
  /// A step at or above the bound is flagged unsafe but still usable.
  static StepSchedule make_fixed(double alpha, double bound) {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
      throw ValidationError("schedule: fixed alpha must be positive");
    StepSchedule s;
    s.kind_ = Kind::Fixed;
    s.alpha_ = alpha;
    s.bound_ = bound;
    return s;
  }

  static StepSchedule make_decreasing(double epsilon, double lipschitz, double numerator = 1.0) {
    if (!(epsilon > 0.0 && epsilon <= 1.0))
      throw ValidationError("schedule: epsilon must lie in (0, 1]");
    if (!(lipschitz > 0.0)) throw ValidationError("schedule: L_f must be positive");
    if (!(numerator > 0.0)) throw ValidationError("schedule: numerator must be positive");
    StepSchedule s;
    s.kind_ = Kind::Decreasing;
    s.epsilon_ = epsilon;
    s.lipschitz_ = lipschitz;
    s.numerator_ = numerator;
    return s;
  }

  Kind kind() const { return kind_; }
  bool is_fixed() const { return kind_ == Kind::Fixed; }

  double at(std::size_t k) const {
    if (kind_ == Kind::Fixed) return alpha_;
    return numerator_ / (lipschitz_ * std::pow(static_cast<double>(k) + 1.0, epsilon_));
  }

  /// Fixed kind: alpha strictly below the bound.
  bool safe() const { return kind_ == Kind::Fixed && alpha_ < bound_; }
  std::string regime() const {
    if (kind_ == Kind::Decreasing) return "decreasing";
    return safe() ? "safe" : "unsafe";
  }

  double alpha() const { return alpha_; }
  double bound() const { return bound_; }
  double epsilon() const { return epsilon_; }
  double lipschitz() const { return lipschitz_; }
  double numerator() const { return numerator_; }

  /// Ceiling on alpha_{k+1}^{-1} - alpha_k^{-1}: 2 eps L_f (k+1)^(eps-1) / c.
  double inverse_difference_bound(std::size_t k) const {
    if (kind_ == Kind::Fixed) return 0.0;
    return 2.0 * epsilon_ * lipschitz_ *
           std::pow(static_cast<double>(k) + 1.0, epsilon_ - 1.0) / numerator_;
  }

 private:
  StepSchedule() = default;

  Kind kind_ = Kind::Fixed;
  double alpha_ = 0.0;
  double bound_ = 0.0;
  double epsilon_ = 0.0;
  double lipschitz_ = 0.0;
  double numerator_ = 1.0;
};

}  // namespace dgd
