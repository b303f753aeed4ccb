#pragma once

#include "dgd/core.hpp"
#include "dgd/engine.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace dgd {

/// Half-open index range [begin, end) into a series.
struct Window {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end > begin ? end - begin : 0; }
};

/// Second half of a series of length n.
inline Window tail_half(std::size_t n) { return {n / 2, n}; }

struct RateFit {
  Window window;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Least-squares fit of log(series_k) against log(k + 1) over the window.
inline RateFit fit_rate(const std::vector<double>& series, Window window) {
  if (window.end > series.size()) throw ValidationError("fit_rate: window exceeds series");
  if (window.size() < 2) throw ValidationError("fit_rate: window needs at least two points");
  const double m = static_cast<double>(window.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t k = window.begin; k < window.end; ++k) {
    if (!(series[k] > 0.0) || !std::isfinite(series[k]))
      throw ValidationError("fit_rate: series must be positive and finite at k=" + std::to_string(k));
    sx += std::log(static_cast<double>(k) + 1.0);
    sy += std::log(series[k]);
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = window.begin; k < window.end; ++k) {
    const double dx = std::log(static_cast<double>(k) + 1.0) - mx;
    const double dy = std::log(series[k]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  RateFit fit;
  fit.window = window;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

inline RateFit fit_rate(const std::vector<double>& series) {
  return fit_rate(series, tail_half(series.size()));
}

/// Pulls one field out of every record.
template <class Field>
std::vector<double> series_of(const RunTrace& trace, Field field) {
  std::vector<double> out;
  out.reserve(trace.records.size());
  for (const auto& r : trace.records) out.push_back(r.*field);
  return out;
}

struct ConvexRateCheck {
  /// fbar^K - f_opt for K = 0..iterations-1.
  std::vector<double> gaps;
  /// (D3 + D4 sum alpha^2) / sum alpha over the same K.
  std::vector<double> envelope;
  double d3 = 0.0;
  double d4 = 0.0;
  /// Largest gap / envelope.
  double worst_ratio = 0.0;
  bool holds = true;
  std::optional<RateFit> tail_fit;
};

/// Compares the ergodic objective against the convex envelope built with C = 1
/// and the empirical gradient bound. `x_opt` is the consensual minimizer.
inline ConvexRateCheck convex_rate_check(const RunTrace& trace, double f_opt, const Point& x_opt,
                                         double slack = 1e-9) {
  if (!std::isfinite(f_opt)) throw ValidationError("convex_rate_check: f_opt must be finite");
  if (x_opt.size() != trace.x0.cols())
    throw ValidationError("convex_rate_check: x_opt has the wrong dimension");
  const auto ergodic = ergodic_objective(trace);

  const double zeta = trace.zeta;
  const double b = trace.gradient_bound_emp;
  const double d1 = trace.x0_norm * zeta / (2.0 * (1.0 - zeta));
  const double d2 = trace.x0_norm * zeta / 2.0 + b / (1.0 - zeta);
  const double dist_sq = (trace.x0.rowwise() - x_opt.transpose()).squaredNorm();

  ConvexRateCheck out;
  out.d3 = 0.5 * dist_sq + b * d1;
  out.d4 = b * d2;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t k = 0; k < ergodic.size(); ++k) {
    const double a = trace.records[k].alpha;
    sum += a;
    sum_sq += a * a;
    const double env = (out.d3 + out.d4 * sum_sq) / sum;
    const double gap = ergodic[k] - f_opt;
    out.gaps.push_back(gap);
    out.envelope.push_back(env);
    if (gap > env + slack * std::max(1.0, std::abs(f_opt))) out.holds = false;
    if (env > 0.0) out.worst_ratio = std::max(out.worst_ratio, gap / env);
  }

  const Window tail = tail_half(out.gaps.size());
  bool positive = tail.size() >= 2;
  for (std::size_t k = tail.begin; positive && k < tail.end; ++k) positive = out.gaps[k] > 0.0;
  if (positive) out.tail_fit = fit_rate(out.gaps, tail);
  return out;
}

struct AuditRow {
  std::string name;
  std::size_t checked = 0;
  /// Worst normalized violation; the row passes when it is <= tolerance.
  double max_violation = 0.0;
  double tolerance = 0.0;
  std::optional<std::size_t> worst_k;
  bool passed = true;
};

struct AuditReport {
  std::vector<AuditRow> rows;
  std::size_t iterations = 0;
  bool truncated = false;

  bool passed() const {
    return std::all_of(rows.begin(), rows.end(), [](const AuditRow& r) { return r.passed; });
  }
  const AuditRow& row(const std::string& name) const {
    for (const auto& r : rows)
      if (r.name == name) return r;
    throw ValidationError("audit: no row named " + name);
  }
};

namespace detail {
class RowBuilder {
 public:
  RowBuilder(std::string name, double tol) { row_.name = std::move(name); row_.tolerance = tol; }
  void add(std::size_t k, double violation) {
    ++row_.checked;
    if (std::isnan(violation)) violation = kInfinity;
    if (!row_.worst_k || violation > row_.max_violation) {
      row_.max_violation = violation;
      row_.worst_k = k;
    }
  }
  AuditRow finish() {
    if (row_.checked == 0) row_.max_violation = 0.0;
    row_.passed = row_.max_violation <= row_.tolerance;
    return row_;
  }

 private:
  AuditRow row_;
};

inline double scale_of(double a) { return std::max(1.0, std::abs(a)); }
}  // namespace detail

/// Aggregates the inequalities recorded by the engine. Violations are
/// normalized by the magnitude of the quantities involved (at least 1).
inline AuditReport audit(const RunTrace& trace, double tol = 1e-9, double identity_tol = 1e-12) {
  using detail::RowBuilder;
  using detail::scale_of;
  AuditReport report;
  report.iterations = trace.iterations();
  report.truncated = trace.failed;
  const bool fixed = trace.step_kind == StepSchedule::Kind::Fixed;

  RowBuilder descent("descent_inequality", tol);
  RowBuilder sufficient("sufficient_descent", tol);
  RowBuilder recursion("consensus_recursion", tol);
  RowBuilder consensual("consensual_bound", tol);
  RowBuilder inverse("step_inverse_difference", tol);
  RowBuilder averaged("averaged_iterate", identity_tol);

  for (std::size_t k = 1; k < trace.records.size(); ++k) {
    const auto& prev = trace.records[k - 1];
    const auto& rec = trace.records[k];
    const double lyap_scale = scale_of(prev.lyapunov);
    descent.add(k, rec.descent_residual / lyap_scale);
    // Monotone decrease needs a positive coefficient; a decreasing schedule
    // only enters that regime once alpha_k is small enough.
    if (fixed || rec.descent_coefficient > 0.0)
      sufficient.add(k, std::max(rec.descent_residual, rec.descent_delta) / lyap_scale);
    recursion.add(k, (rec.consensus_error - rec.recursion_bound) / scale_of(rec.recursion_bound));
    if (fixed)
      consensual.add(k, (rec.max_row_deviation - rec.consensual_bound) / scale_of(rec.consensual_bound));
    else
      inverse.add(k, rec.inverse_difference_residual / scale_of(1.0 / rec.alpha));
    averaged.add(k, rec.averaged_identity_residual / std::max(scale_of(prev.iterate_scale),
                                                              scale_of(rec.iterate_scale)));
  }

  report.rows.push_back(descent.finish());
  report.rows.push_back(sufficient.finish());
  report.rows.push_back(recursion.finish());
  if (fixed) report.rows.push_back(consensual.finish());
  else report.rows.push_back(inverse.finish());
  report.rows.push_back(averaged.finish());

  AuditRow finite{"finite_iterates", trace.iterations(), trace.failed ? kInfinity : 0.0, 0.0,
                  std::nullopt, !trace.failed};
  report.rows.push_back(finite);
  return report;
}

inline nlohmann::json to_json(const AuditReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    nlohmann::json row{{"name", r.name},
                       {"checked", r.checked},
                       {"tolerance", r.tolerance},
                       {"passed", r.passed}};
    // JSON has no infinity; a non-finite violation is written as null.
    if (std::isfinite(r.max_violation)) row["max_violation"] = r.max_violation;
    else row["max_violation"] = nullptr;
    if (r.worst_k) row["worst_k"] = *r.worst_k;
    rows.push_back(row);
  }
  return {{"iterations", report.iterations},
          {"truncated", report.truncated},
          {"passed", report.passed()},
          {"rows", rows}};
}

inline void print_table(const AuditReport& report, std::ostream& out) {
  char line[160];
  std::snprintf(line, sizeof line, "%-26s %10s %14s %10s  %s\n", "inequality", "checked",
                "max_violation", "tolerance", "result");
  out << line;
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof line, "%-26s %10zu %14.6g %10.3g  %s\n", r.name.c_str(), r.checked,
                  r.max_violation, r.tolerance, r.passed ? "pass" : "FAIL");
    out << line;
  }
}

}  // namespace dgd
