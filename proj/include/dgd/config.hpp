#pragma once

#include "dgd/core.hpp"
#include "dgd/diagnostics.hpp"
#include "dgd/engine.hpp"
#include "dgd/network.hpp"
#include "dgd/objectives.hpp"
#include "dgd/regularizers.hpp"
#include "dgd/schedules.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace dgd {

/// Malformed or inconsistent run configuration.
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct ObjectiveConfig {
  std::string name = "paper_toy";  // or "least_squares"
  std::uint64_t seed = 1;
  std::size_t agents = 10;
  std::size_t dimension = 256;
  std::size_t rows = 150;
  std::size_t sparsity = 10;
  double noise = 0.0;
  bool operator==(const ObjectiveConfig&) const = default;
};

struct PenaltyConfig {
  std::string kind = "zero";
  double lambda = 0.0;
  double q = 0.5;
  double a = 3.7;
  double gamma = 2.0;
  double lo = 0.0;
  double hi = 1.0;
  double radius = 1.0;
  bool operator==(const PenaltyConfig&) const = default;
};

struct NetworkConfig {
  std::optional<std::size_t> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::optional<std::vector<std::vector<double>>> matrix;
  /// W <- beta I + (1 - beta) W.
  std::optional<double> lazy;
  bool operator==(const NetworkConfig&) const = default;
};

struct StepConfig {
  std::string kind = "fixed";
  std::optional<double> alpha;
  /// Fixed alpha given as a multiple of 1 / L_f.
  std::optional<double> scaled_alpha;
  double epsilon = 0.5;
  double numerator = 1.0;
  bool operator==(const StepConfig&) const = default;
};

struct StartConfig {
  std::string kind = "zeros";  // zeros | constant | rows | random
  double value = 0.0;
  std::vector<std::vector<double>> rows;
  std::uint64_t seed = 0;
  double scale = 1.0;
  bool operator==(const StartConfig&) const = default;
};

struct OutputConfig {
  std::string trace;
  std::string audit;
  bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
  std::string name = "run";
  ObjectiveConfig objective;
  /// Empty: plain DGD. One entry with `reg_per_agent` false applies to all.
  std::vector<PenaltyConfig> reg;
  bool reg_per_agent = false;
  NetworkConfig network;
  StepConfig step;
  StartConfig x0;
  std::size_t iterations = 1000;
  double step_floor = 0.0;
  OutputConfig output;
  bool operator==(const RunConfig&) const = default;
};

namespace detail {

using nlohmann::json;

inline void allow_keys(const json& j, std::initializer_list<const char*> keys,
                       const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) throw ConfigError(where + ": unknown key \"" + key + "\"");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

inline PenaltyConfig parse_penalty(const json& j) {
  allow_keys(j, {"kind", "lambda", "q", "a", "gamma", "lo", "hi", "radius"}, "reg");
  PenaltyConfig p;
  p.kind = j.at("kind").get<std::string>();
  p.lambda = get_or(j, "lambda", p.lambda);
  p.q = get_or(j, "q", p.q);
  p.a = get_or(j, "a", p.a);
  p.gamma = get_or(j, "gamma", p.gamma);
  p.lo = get_or(j, "lo", p.lo);
  p.hi = get_or(j, "hi", p.hi);
  p.radius = get_or(j, "radius", p.radius);
  return p;
}

inline json penalty_json(const PenaltyConfig& p) {
  json j{{"kind", p.kind}};
  if (p.kind == "l1" || p.kind == "l0" || p.kind == "lq" || p.kind == "scad" || p.kind == "mcp")
    j["lambda"] = p.lambda;
  if (p.kind == "lq") j["q"] = p.q;
  if (p.kind == "scad") j["a"] = p.a;
  if (p.kind == "mcp") j["gamma"] = p.gamma;
  if (p.kind == "box") {
    j["lo"] = p.lo;
    j["hi"] = p.hi;
  }
  if (p.kind == "ball") j["radius"] = p.radius;
  return j;
}

inline Regularizer make_regularizer(const PenaltyConfig& p) {
  if (p.kind == "zero") return Regularizer::zero();
  if (p.kind == "l1") return Regularizer::l1(p.lambda);
  if (p.kind == "l0") return Regularizer::l0(p.lambda);
  if (p.kind == "lq") return Regularizer::lq(p.lambda, p.q);
  if (p.kind == "scad") return Regularizer::scad(p.lambda, p.a);
  if (p.kind == "mcp") return Regularizer::mcp(p.lambda, p.gamma);
  if (p.kind == "box") return Regularizer::box(p.lo, p.hi);
  if (p.kind == "ball") return Regularizer::ball(p.radius);
  throw ConfigError("reg: unknown kind \"" + p.kind + "\"");
}

inline RunConfig parse_config_unchecked(const json& j) {
  allow_keys(j, {"name", "problem", "reg", "network", "step", "x0", "iterations", "step_floor",
                 "output"},
             "config");
  RunConfig c;
  c.name = get_or<std::string>(j, "name", c.name);

  const json& prob = j.at("problem");
  allow_keys(prob, {"objective", "seed", "agents", "dimension", "rows", "sparsity", "noise"},
             "problem");
  c.objective.name = prob.at("objective").get<std::string>();
  if (c.objective.name == "least_squares") {
    c.objective.seed = get_or(prob, "seed", c.objective.seed);
    c.objective.agents = get_or(prob, "agents", c.objective.agents);
    c.objective.dimension = get_or(prob, "dimension", c.objective.dimension);
    c.objective.rows = get_or(prob, "rows", c.objective.rows);
    c.objective.sparsity = get_or(prob, "sparsity", c.objective.sparsity);
    c.objective.noise = get_or(prob, "noise", c.objective.noise);
  } else if (c.objective.name == "paper_toy") {
    if (prob.size() > 1) throw ConfigError("problem: paper_toy takes no parameters");
  } else {
    throw ConfigError("problem: unknown objective \"" + c.objective.name + "\"");
  }

  if (j.contains("reg")) {
    const json& r = j.at("reg");
    if (r.is_array()) {
      c.reg_per_agent = true;
      for (const auto& item : r) c.reg.push_back(parse_penalty(item));
    } else {
      c.reg.push_back(parse_penalty(r));
    }
  }

  const json& net = j.at("network");
  allow_keys(net, {"nodes", "edges", "matrix", "lazy"}, "network");
  if (net.contains("nodes")) c.network.nodes = net.at("nodes").get<std::size_t>();
  if (net.contains("edges")) {
    for (const auto& e : net.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw ConfigError("network: edges must be [i, j] pairs");
      c.network.edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
    }
  }
  if (net.contains("matrix")) c.network.matrix = net.at("matrix").get<std::vector<std::vector<double>>>();
  if (net.contains("lazy")) c.network.lazy = net.at("lazy").get<double>();
  if (c.network.matrix.has_value() == c.network.nodes.has_value())
    throw ConfigError("network: give exactly one of \"nodes\" or \"matrix\"");

  const json& step = j.at("step");
  allow_keys(step, {"kind", "alpha", "scaled_alpha", "epsilon", "numerator"}, "step");
  c.step.kind = step.at("kind").get<std::string>();
  if (c.step.kind == "fixed") {
    if (step.contains("alpha")) c.step.alpha = step.at("alpha").get<double>();
    if (step.contains("scaled_alpha")) c.step.scaled_alpha = step.at("scaled_alpha").get<double>();
    if (c.step.alpha.has_value() == c.step.scaled_alpha.has_value())
      throw ConfigError("step: fixed needs exactly one of \"alpha\" or \"scaled_alpha\"");
    if (step.contains("epsilon") || step.contains("numerator"))
      throw ConfigError("step: epsilon/numerator apply to decreasing steps only");
  } else if (c.step.kind == "decreasing") {
    if (step.contains("alpha") || step.contains("scaled_alpha"))
      throw ConfigError("step: alpha applies to fixed steps only");
    c.step.epsilon = get_or(step, "epsilon", c.step.epsilon);
    c.step.numerator = get_or(step, "numerator", c.step.numerator);
  } else {
    throw ConfigError("step: unknown kind \"" + c.step.kind + "\"");
  }

  if (j.contains("x0")) {
    const json& x0 = j.at("x0");
    allow_keys(x0, {"kind", "value", "rows", "seed", "scale"}, "x0");
    c.x0.kind = x0.at("kind").get<std::string>();
    if (c.x0.kind == "constant") c.x0.value = x0.at("value").get<double>();
    else if (c.x0.kind == "rows") c.x0.rows = x0.at("rows").get<std::vector<std::vector<double>>>();
    else if (c.x0.kind == "random") {
      c.x0.seed = get_or(x0, "seed", c.x0.seed);
      c.x0.scale = get_or(x0, "scale", c.x0.scale);
    } else if (c.x0.kind != "zeros") {
      throw ConfigError("x0: unknown kind \"" + c.x0.kind + "\"");
    }
  }

  c.iterations = get_or(j, "iterations", c.iterations);
  c.step_floor = get_or(j, "step_floor", c.step_floor);
  if (j.contains("output")) {
    const json& out = j.at("output");
    allow_keys(out, {"trace", "audit"}, "output");
    c.output.trace = get_or<std::string>(out, "trace", "");
    c.output.audit = get_or<std::string>(out, "audit", "");
  }
  return c;
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
  try {
    return detail::parse_config_unchecked(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline RunConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(j);
}

inline nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  json j;
  j["name"] = c.name;
  json prob{{"objective", c.objective.name}};
  if (c.objective.name == "least_squares") {
    prob["seed"] = c.objective.seed;
    prob["agents"] = c.objective.agents;
    prob["dimension"] = c.objective.dimension;
    prob["rows"] = c.objective.rows;
    prob["sparsity"] = c.objective.sparsity;
    prob["noise"] = c.objective.noise;
  }
  j["problem"] = prob;
  if (c.reg_per_agent) {
    json list = json::array();
    for (const auto& p : c.reg) list.push_back(detail::penalty_json(p));
    j["reg"] = list;
  } else if (!c.reg.empty()) {
    j["reg"] = detail::penalty_json(c.reg.front());
  }

  json net = json::object();
  if (c.network.nodes) net["nodes"] = *c.network.nodes;
  if (c.network.matrix) net["matrix"] = *c.network.matrix;
  if (!c.network.edges.empty()) {
    json edges = json::array();
    for (auto [a, b] : c.network.edges) edges.push_back({a, b});
    net["edges"] = edges;
  }
  if (c.network.lazy) net["lazy"] = *c.network.lazy;
  j["network"] = net;

  json step{{"kind", c.step.kind}};
  if (c.step.kind == "fixed") {
    if (c.step.alpha) step["alpha"] = *c.step.alpha;
    if (c.step.scaled_alpha) step["scaled_alpha"] = *c.step.scaled_alpha;
  } else {
    step["epsilon"] = c.step.epsilon;
    step["numerator"] = c.step.numerator;
  }
  j["step"] = step;

  json x0{{"kind", c.x0.kind}};
  if (c.x0.kind == "constant") x0["value"] = c.x0.value;
  if (c.x0.kind == "rows") x0["rows"] = c.x0.rows;
  if (c.x0.kind == "random") {
    x0["seed"] = c.x0.seed;
    x0["scale"] = c.x0.scale;
  }
  j["x0"] = x0;
  j["iterations"] = c.iterations;
  j["step_floor"] = c.step_floor;
  json out = json::object();
  if (!c.output.trace.empty()) out["trace"] = c.output.trace;
  if (!c.output.audit.empty()) out["audit"] = c.output.audit;
  j["output"] = out;
  return j;
}

/// Everything `run` needs, built from a configuration.
struct Experiment {
  ProblemSpec problem;
  MixingSpec mix;
  StepSchedule schedule;
  IterateMatrix x0;
  StopRule stop;
};

inline MixingSpec build_network(const NetworkConfig& net) {
  MixingSpec mix = [&] {
    if (net.matrix) {
      const auto& rows = *net.matrix;
      const std::size_t n = rows.size();
      if (n == 0) throw ConfigError("network: empty matrix");
      Matrix w(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != n) throw ConfigError("network: matrix must be square");
        for (std::size_t j = 0; j < n; ++j)
          w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
      }
      auto edges = net.edges;
      if (edges.empty()) {
        // Edges default to the off-diagonal support.
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = i + 1; j < n; ++j)
            if (rows[i][j] != 0.0 || rows[j][i] != 0.0) edges.emplace_back(i, j);
      }
      return MixingSpec::from_matrix(w, Graph(n, edges));
    }
    return build_metropolis(Graph(*net.nodes, net.edges));
  }();
  if (net.lazy) mix = make_lazy(mix, *net.lazy);
  return mix;
}

inline StackedObjective build_objective(const ObjectiveConfig& cfg) {
  if (cfg.name == "paper_toy") return paper_toy_problem();
  return decentralized_least_squares(cfg.seed, cfg.agents, cfg.dimension, cfg.rows, cfg.sparsity,
                                     cfg.noise)
      .objective;
}

inline IterateMatrix build_start(const StartConfig& cfg, std::size_t n, std::size_t p) {
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(p);
  if (cfg.kind == "zeros") return IterateMatrix::Zero(rows, cols);
  if (cfg.kind == "constant") return IterateMatrix::Constant(rows, cols, cfg.value);
  if (cfg.kind == "random") {
    NormalGenerator gen(cfg.seed);
    IterateMatrix x(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) x(i, j) = cfg.scale * gen();
    return x;
  }
  if (cfg.rows.size() != n) throw ConfigError("x0: expected " + std::to_string(n) + " rows");
  IterateMatrix x(rows, cols);
  for (std::size_t i = 0; i < n; ++i) {
    if (cfg.rows[i].size() != p) throw ConfigError("x0: row " + std::to_string(i) + " has the wrong length");
    for (std::size_t j = 0; j < p; ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cfg.rows[i][j];
  }
  return x;
}

/// Safe ceiling for a fixed step: (1 + lambda_n) / L_f, or lambda_n / L_f
/// with a nonconvex regularizer (0 when lambda_n <= 0, so every step is unsafe).
inline double fixed_step_bound(const ProblemSpec& problem, const MixingSpec& mix) {
  const StepBounds b = safe_step_bounds(mix, problem.objective.lipschitz());
  if (problem.composite() && !problem.regularizers_convex()) return b.proxdgd_nonconvex.value_or(0.0);
  return b.dgd;
}

inline Experiment build_experiment(const RunConfig& c) {
  try {
    StackedObjective objective = build_objective(c.objective);
    MixingSpec mix = build_network(c.network);
    const std::size_t n = objective.agent_count();
    std::vector<Regularizer> regs;
    if (c.reg_per_agent) {
      if (c.reg.size() != n) throw ConfigError("reg: per-agent list must have one entry per agent");
      for (const auto& p : c.reg) regs.push_back(detail::make_regularizer(p));
    } else if (!c.reg.empty()) {
      regs.assign(n, detail::make_regularizer(c.reg.front()));
    }
    ProblemSpec problem{std::move(objective), std::move(regs)};
    const double lf = problem.objective.lipschitz();
    StepSchedule schedule = [&] {
      if (c.step.kind == "decreasing") return StepSchedule::make_decreasing(c.step.epsilon, lf, c.step.numerator);
      const double alpha = c.step.alpha ? *c.step.alpha : *c.step.scaled_alpha / lf;
      return StepSchedule::make_fixed(alpha, fixed_step_bound(problem, mix));
    }();
    IterateMatrix x0 = build_start(c.x0, n, problem.objective.dimension());
    if (!(c.step_floor >= 0.0)) throw ConfigError("step_floor must be nonnegative");
    return {std::move(problem), std::move(mix), std::move(schedule), std::move(x0),
            StopRule{c.iterations, c.step_floor}};
  } catch (const ConfigError&) {
    throw;
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
}

/// One CSV row per record, 17 significant digits, LF line endings.
inline void write_trace_csv(const RunTrace& trace, std::ostream& out) {
  out << "k,alpha,objective,lyapunov,consensus_error,step_norm,avg_grad_norm,descent_residual,regime\n";
  const std::string regime = trace.regime_flags();
  char buf[512];
  for (const auto& r : trace.records) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,", r.k, r.alpha,
                  r.objective, r.lyapunov, r.consensus_error, r.step_norm, r.avg_grad_norm,
                  r.descent_residual);
    out << buf << regime << '\n';
  }
}

inline std::string trace_csv(const RunTrace& trace) {
  std::ostringstream out;
  write_trace_csv(trace, out);
  return out.str();
}

struct Preset {
  std::string name;
  std::string description;
  std::vector<RunConfig> runs;
};

namespace detail {
inline NetworkConfig paper_matrix_network() {
  NetworkConfig net;
  net.matrix = std::vector<std::vector<double>>{{0.5, 0.0, 0.5}, {0.0, 0.5, 0.5}, {0.5, 0.5, 0.0}};
  return net;
}

/// Ring on 10 nodes plus chords (0,5) and (2,7).
inline NetworkConfig ring_with_chords() {
  NetworkConfig net;
  net.nodes = 10;
  for (std::size_t i = 0; i < 10; ++i) net.edges.emplace_back(i, (i + 1) % 10);
  net.edges.emplace_back(0, 5);
  net.edges.emplace_back(2, 7);
  return net;
}

inline RunConfig paper_toy_base(const std::string& name) {
  RunConfig c;
  c.name = name;
  c.network = paper_matrix_network();
  c.step.alpha = 3e-4;
  c.iterations = 200000;
  return c;
}

inline RunConfig paper_l0_base(const std::string& name) {
  RunConfig c;
  c.name = name;
  c.objective.name = "least_squares";
  c.objective.seed = 1;
  c.objective.noise = 0.1;
  c.reg = {PenaltyConfig{"l0", 0.5}};
  c.network = ring_with_chords();
  c.iterations = 10000;
  return c;
}
}  // namespace detail

inline std::vector<Preset> list_presets() {
  RunConfig fixed = detail::paper_toy_base("paper_toy_fixed");

  RunConfig dangerous = detail::paper_toy_base("paper_toy_dangerous");
  dangerous.x0.kind = "rows";
  dangerous.x0.rows = {{-1.0}, {-1.2}, {-1.1}};

  RunConfig l0_fixed = detail::paper_l0_base("paper_l0_fixed");
  l0_fixed.step.scaled_alpha = 0.5;
  RunConfig l0_decreasing = detail::paper_l0_base("paper_l0_decreasing");
  l0_decreasing.step.kind = "decreasing";
  l0_decreasing.step.epsilon = 0.5;

  return {
      {"paper_toy_fixed", "three cubic agents, 3x3 mixing matrix, x0 = 0, alpha = 3e-4, 2e5 steps",
       {fixed}},
      {"paper_toy_dangerous",
       "three cubic agents started near the local minimizer, alpha = 3e-4, 2e5 steps", {dangerous}},
      {"paper_l0",
       "l0 least squares, 10 agents on a ring with two chords: alpha = 0.5 / L_f vs alpha_k = 1 / (L_f sqrt(k+1)), 1e4 steps",
       {l0_fixed, l0_decreasing}},
  };
}

inline std::optional<Preset> find_preset(const std::string& name) {
  for (auto& p : list_presets())
    if (p.name == name) return p;
  return std::nullopt;
}

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3 };

struct ExperimentResult {
  RunTrace trace;
  AuditReport report;
  int status = kExitOk;
};

/// Runs a built experiment and writes the configured outputs. Output
/// paths are resolved against `out_dir` when it is nonempty.
inline ExperimentResult execute(const RunConfig& config, const std::filesystem::path& out_dir = {}) {
  Experiment ex = build_experiment(config);
  ExperimentResult result;
  result.trace = run(ex.problem, ex.mix, ex.schedule, ex.x0, ex.stop);
  result.report = audit(result.trace);
  result.status = result.trace.failed ? kExitNumerical : kExitOk;

  auto resolve = [&](const std::string& p) {
    return out_dir.empty() ? std::filesystem::path(p) : out_dir / p;
  };
  if (!config.output.trace.empty()) {
    const auto path = resolve(config.output.trace);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    write_trace_csv(result.trace, f);
  }
  if (!config.output.audit.empty()) {
    const auto path = resolve(config.output.audit);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    nlohmann::json doc = to_json(result.report);
    doc["name"] = config.name;
    doc["regime"] = result.trace.regime_flags();
    if (result.trace.failed) doc["failure"] = result.trace.failure;
    f << doc.dump(2) << '\n';
  }
  return result;
}

/// Exit status for a configuration: 0, 2 on a bad config, 3 on a numerical failure.
inline int run_experiment(const RunConfig& config, const std::filesystem::path& out_dir = {}) {
  try {
    return execute(config, out_dir).status;
  } catch (const ValidationError&) {
    return kExitConfig;
  }
}

}  // namespace dgd
