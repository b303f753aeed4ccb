#pragma once

#include "dgd/core.hpp"
#include "dgd/network.hpp"
#include "dgd/objectives.hpp"
#include "dgd/regularizers.hpp"
#include "dgd/schedules.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dgd {

/// Smooth part plus optional per-agent regularizers (empty means plain DGD).
struct ProblemSpec {
  StackedObjective objective;
  std::vector<Regularizer> regularizers;

  bool composite() const { return !regularizers.empty(); }
  bool regularizers_convex() const {
    for (const auto& r : regularizers)
      if (!r.is_convex()) return false;
    return true;
  }
};

/// W x - alpha grad f(x).
inline IterateMatrix dgd_step(const IterateMatrix& x, const MixingSpec& mix,
                              const StackedObjective& obj, double alpha) {
  if (!(alpha > 0.0)) throw ValidationError("dgd_step: alpha must be positive");
  IterateMatrix next = mix.mix(x);
  next.noalias() -= alpha * stacked_gradient(obj, x);
  if (!all_finite(next)) throw NumericalError("dgd_step: non-finite iterate");
  return next;
}

struct ProxStep {
  IterateMatrix next;
  /// Subgradient picked by the prox: next = W x - alpha (grad f(x) + xi).
  IterateMatrix xi;
};

inline ProxStep proxdgd_step(const IterateMatrix& x, const MixingSpec& mix,
                             const StackedObjective& obj, const std::vector<Regularizer>& regs,
                             double alpha) {
  if (!(alpha > 0.0)) throw ValidationError("proxdgd_step: alpha must be positive");
  IterateMatrix forward = mix.mix(x);
  forward.noalias() -= alpha * stacked_gradient(obj, x);
  IterateMatrix next = stacked_prox(regs, forward, alpha);
  if (!all_finite(next)) throw NumericalError("proxdgd_step: non-finite iterate");
  IterateMatrix xi = (forward - next) / alpha;
  return {std::move(next), std::move(xi)};
}

/// grad L_alpha(x) = grad f(x) + alpha^{-1} (I - W) x.
inline IterateMatrix lyapunov_gradient(const IterateMatrix& x, const MixingSpec& mix,
                                       const StackedObjective& obj, double alpha) {
  return stacked_gradient(obj, x) + mix.laplacian(x) / alpha;
}

/// L_alpha(x) = 1^T f(x) + ||x||^2_{I-W} / (2 alpha).
inline double lyapunov(const IterateMatrix& x, const MixingSpec& mix,
                       const StackedObjective& obj, double alpha) {
  if (!(alpha > 0.0)) throw ValidationError("lyapunov: alpha must be positive");
  return stacked_value(obj, x) + mix.semi_norm_sq(x) / (2.0 * alpha);
}

inline double composite_lyapunov(const IterateMatrix& x, const MixingSpec& mix,
                                 const StackedObjective& obj,
                                 const std::vector<Regularizer>& regs, double alpha) {
  const double smooth = lyapunov(x, mix, obj, alpha);
  if (regs.empty()) return smooth;
  return smooth + stacked_regularizer_value(regs, x);
}

/// W^k x0 - sum_{j<k} alpha_j W^{k-1-j} d_j with dense matrix powers.
inline IterateMatrix unroll(const MixingSpec& mix, const IterateMatrix& x0,
                            const std::vector<double>& alphas,
                            const std::vector<IterateMatrix>& directions) {
  if (alphas.size() != directions.size())
    throw ValidationError("unroll: alphas and directions differ in length");
  const std::size_t k = alphas.size();
  const auto n = static_cast<Eigen::Index>(mix.size());
  std::vector<Matrix> powers{Matrix::Identity(n, n)};
  for (std::size_t m = 1; m <= k; ++m) powers.push_back(powers.back() * mix.weights());
  IterateMatrix out = powers[k] * x0;
  for (std::size_t j = 0; j < k; ++j) out.noalias() -= alphas[j] * (powers[k - 1 - j] * directions[j]);
  return out;
}

/// Stopping: K iterations, optionally an earlier step-norm floor.
struct StopRule {
  std::size_t max_iterations = 1000;
  double step_floor = 0.0;
};

/// Per-iteration measurements. Quantities tied to the transition from
/// iteration k-1 to k are NaN in the initial record.
struct IterationRecord {
  std::size_t k = 0;
  /// alpha_k, the step taken from this iterate.
  double alpha = 0.0;
  /// sum_i f_i(x_(i)) + r_i(x_(i)).
  double objective = 0.0;
  /// Composite Lyapunov value at alpha_k.
  double lyapunov = 0.0;
  double consensus_error = 0.0;
  double max_row_deviation = 0.0;
  /// max abs entry of x^k.
  double iterate_scale = 0.0;
  double semi_norm = 0.0;
  double step_norm = 0.0;
  double grad_norm = 0.0;
  /// ||(1/n) 1^T (grad f(x^k) + xi^k)||, xi^k from the prox that produced x^k.
  double avg_grad_norm = 0.0;
  /// sum_i (f_i + r_i) at the row average.
  double averaged_objective = 0.0;

  static constexpr double kNone = std::numeric_limits<double>::quiet_NaN();
  /// L_{a_{k-1}}(x^k) - L_{a_{k-1}}(x^{k-1}) + (m / a_{k-1} - L_f) ||dx||^2 / 2, m = 1 + lambda_n
  /// (or lambda_n for nonconvex r); decreasing steps include the allowance.
  double descent_residual = kNone;
  /// Lyapunov change net of the decreasing-step allowance.
  double descent_delta = kNone;
  double descent_coefficient = kNone;
  /// zeta^k ||x^0|| + B_emp sum_{j<k} alpha_j zeta^(k-1-j).
  double recursion_bound = kNone;
  /// alpha D_emp / (1 - zeta) + zeta^k ||x^0||, fixed steps only.
  double consensual_bound = kNone;
  /// alpha_k^{-1} - alpha_{k-1}^{-1} minus its ceiling, decreasing steps only.
  double inverse_difference_residual = kNone;
  /// max abs of xbar^k - (xbar^{k-1} - alpha (1/n) 1^T (grad f + xi)).
  double averaged_identity_residual = kNone;
};

struct RunTrace {
  std::vector<IterationRecord> records;
  std::string algorithm;
  std::string regime;
  bool convex_regularizers = true;
  bool outside_theorem2 = false;
  bool failed = false;
  std::string failure;

  StepSchedule::Kind step_kind = StepSchedule::Kind::Fixed;
  double epsilon = 0.0;
  double zeta = 0.0;
  double lambda_min = 0.0;
  double lipschitz = 0.0;
  double x0_norm = 0.0;
  IterateMatrix x0;
  /// Running max of ||grad f(x^j) + xi^{j+1}|| over the whole run.
  double gradient_bound_emp = 0.0;

  IterateMatrix final_x;
  std::optional<IterateMatrix> xi_last;

  std::size_t iterations() const { return records.empty() ? 0 : records.size() - 1; }
  std::string regime_flags() const {
    return outside_theorem2 ? regime + "|outside_theorem2" : regime;
  }
};

struct RunState {
  IterateMatrix x;
  std::size_t k = 0;
  RunTrace trace;
  std::optional<IterateMatrix> xi_last;
};

/// Steps DGD or Prox-DGD one iteration at a time while filling the trace.
class Runner {
 public:
  Runner(ProblemSpec problem, MixingSpec mix, StepSchedule schedule, IterateMatrix x0)
      : problem_(std::move(problem)), mix_(std::move(mix)), schedule_(std::move(schedule)) {
    const auto& obj = problem_.objective;
    if (obj.agent_count() != mix_.size())
      throw ValidationError("run: objective has " + std::to_string(obj.agent_count()) +
                            " agents but the network has " + std::to_string(mix_.size()));
    detail::check_shape(obj, x0);
    if (problem_.composite() && problem_.regularizers.size() != obj.agent_count())
      throw ValidationError("run: regularizer count does not match agent count");
    if (!all_finite(x0)) throw ValidationError("run: x0 has non-finite entries");

    auto& trace = state_.trace;
    trace.algorithm = problem_.composite() ? "prox-dgd" : "dgd";
    trace.convex_regularizers = problem_.regularizers_convex();
    trace.outside_theorem2 = problem_.composite() && !trace.convex_regularizers &&
                             !(mix_.lambda_min() > MixingSpec::kSpectralTolerance);
    trace.regime = schedule_.regime();
    trace.step_kind = schedule_.kind();
    trace.epsilon = schedule_.epsilon();
    trace.zeta = mix_.zeta();
    trace.lambda_min = mix_.lambda_min();
    trace.lipschitz = obj.lipschitz();
    trace.x0_norm = x0.norm();
    trace.x0 = x0;
    descent_margin_ = trace.convex_regularizers ? 1.0 + mix_.lambda_min() : mix_.lambda_min();

    state_.x = std::move(x0);
    gradient_ = stacked_gradient(obj, state_.x);
    IterationRecord first = measure(state_.x, gradient_, nullptr, 0);
    current_lyapunov_ = first.lyapunov;
    trace.records.push_back(first);
    trace.final_x = state_.x;
  }

  const RunState& state() const { return state_; }
  const ProblemSpec& problem() const { return problem_; }
  const MixingSpec& mixing() const { return mix_; }

  /// Advances one iteration; false once the run has failed.
  bool step() {
    auto& trace = state_.trace;
    if (trace.failed) return false;
    const auto& obj = problem_.objective;
    const std::size_t k = state_.k;
    const double alpha = schedule_.at(k);
    const double n = static_cast<double>(state_.x.rows());

    IterateMatrix next;
    IterateMatrix direction = gradient_;
    try {
      if (problem_.composite()) {
        ProxStep s = proxdgd_step(state_.x, mix_, obj, problem_.regularizers, alpha);
        next = std::move(s.next);
        direction += s.xi;
        state_.xi_last = std::move(s.xi);
      } else {
        next = dgd_step(state_.x, mix_, obj, alpha);
      }
    } catch (const NumericalError&) {
      trace.failed = true;
      trace.failure = "non-finite iterate at k=" + std::to_string(k + 1);
      return false;
    }

    const double direction_norm = direction.norm();
    trace.gradient_bound_emp = std::max(trace.gradient_bound_emp, direction_norm);
    convolution_ = mix_.zeta() * convolution_ + alpha;

    IterateMatrix next_gradient = stacked_gradient(obj, next);
    IterationRecord rec = measure(next, next_gradient,
                                  state_.xi_last ? &*state_.xi_last : nullptr, k + 1);

    const double step_sq = (next - state_.x).squaredNorm();
    rec.step_norm = std::sqrt(step_sq);
    // L_{alpha_k} at the new iterate, without the allowance.
    const double lyap_same_alpha = rec.objective + rec.semi_norm / (2.0 * alpha);
    rec.descent_delta = lyap_same_alpha - current_lyapunov_;
    rec.descent_coefficient = descent_margin_ / alpha - obj.lipschitz();
    rec.descent_residual = rec.descent_delta + 0.5 * rec.descent_coefficient * step_sq;

    const Point predicted_mean = row_average(state_.x) - alpha * direction.colwise().sum().transpose() / n;
    rec.averaged_identity_residual = (row_average(next) - predicted_mean).cwiseAbs().maxCoeff();

    const double decay = std::pow(mix_.zeta(), static_cast<double>(k + 1)) * trace.x0_norm;
    rec.recursion_bound = decay + trace.gradient_bound_emp * convolution_;
    if (schedule_.is_fixed()) {
      rec.consensual_bound = alpha * trace.gradient_bound_emp / (1.0 - mix_.zeta()) + decay;
    } else {
      const double inv_diff = 1.0 / schedule_.at(k + 1) - 1.0 / alpha;
      rec.inverse_difference_residual = inv_diff - schedule_.inverse_difference_bound(k);
    }

    state_.x = std::move(next);
    gradient_ = std::move(next_gradient);
    current_lyapunov_ = rec.lyapunov;
    state_.k = k + 1;
    trace.records.push_back(rec);
    trace.final_x = state_.x;
    trace.xi_last = state_.xi_last;
    return true;
  }

  RunTrace run(const StopRule& stop) {
    while (state_.k < stop.max_iterations) {
      if (!step()) break;
      if (stop.step_floor > 0.0 && state_.trace.records.back().step_norm < stop.step_floor) break;
    }
    auto& trace = state_.trace;
    trace.gradient_bound_emp = std::max(trace.gradient_bound_emp, trace.records.back().grad_norm);
    return trace;
  }

 private:
  IterationRecord measure(const IterateMatrix& x, const IterateMatrix& gradient,
                          const IterateMatrix* xi, std::size_t k) const {
    const auto& obj = problem_.objective;
    IterationRecord rec;
    rec.k = k;
    rec.alpha = schedule_.at(k);
    rec.objective = stacked_value(obj, x);
    if (problem_.composite()) rec.objective += stacked_regularizer_value(problem_.regularizers, x);
    rec.semi_norm = mix_.semi_norm_sq(x);
    rec.lyapunov = rec.objective + rec.semi_norm / (2.0 * rec.alpha);
    rec.consensus_error = consensus_error(x);
    rec.max_row_deviation = max_row_deviation(x);
    rec.iterate_scale = x.cwiseAbs().maxCoeff();
    rec.grad_norm = gradient.norm();
    Eigen::RowVectorXd total = gradient.colwise().sum();
    if (xi) total += xi->colwise().sum();
    rec.avg_grad_norm = total.norm() / static_cast<double>(x.rows());

    const Point mean = row_average(x);
    double avg_obj = obj.consensual_value(mean);
    for (const auto& r : problem_.regularizers) avg_obj += r.value(mean);
    rec.averaged_objective = avg_obj;
    return rec;
  }

  ProblemSpec problem_;
  MixingSpec mix_;
  StepSchedule schedule_;
  RunState state_;
  IterateMatrix gradient_;
  double current_lyapunov_ = 0.0;
  double descent_margin_ = 1.0;
  double convolution_ = 0.0;
};

inline RunTrace run(const ProblemSpec& problem, const MixingSpec& mix,
                    const StepSchedule& schedule, const IterateMatrix& x0, const StopRule& stop) {
  return Runner(problem, mix, schedule, x0).run(stop);
}

/// Running sum_k alpha_k v_k / sum_k alpha_k for each prefix.
inline std::vector<double> ergodic_average(const std::vector<double>& alphas,
                                           const std::vector<double>& values) {
  if (alphas.empty() || alphas.size() != values.size())
    throw ValidationError("ergodic: need equal-length, nonempty sequences");
  std::vector<double> out;
  out.reserve(alphas.size());
  double weighted = 0.0;
  double weight = 0.0;
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    weighted += alphas[k] * values[k];
    weight += alphas[k];
    out.push_back(weighted / weight);
  }
  return out;
}

/// fbar^K = sum_{k<=K} alpha_k s(xbar^{k+1}) / sum_{k<=K} alpha_k, K = 0..iterations-1.
inline std::vector<double> ergodic_objective(const RunTrace& trace) {
  if (trace.records.size() < 2) throw ValidationError("ergodic: trace has no iterations");
  std::vector<double> alphas;
  std::vector<double> values;
  for (std::size_t k = 0; k + 1 < trace.records.size(); ++k) {
    alphas.push_back(trace.records[k].alpha);
    values.push_back(trace.records[k + 1].averaged_objective);
  }
  return ergodic_average(alphas, values);
}

}  // namespace dgd
