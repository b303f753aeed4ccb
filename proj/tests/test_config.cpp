#include "dgd/config.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dgd;
namespace fs = std::filesystem;

namespace {

const char* kToy = R"({
  "name": "toy",
  "problem": {"objective": "paper_toy"},
  "network": {"matrix": [[0.5, 0.0, 0.5], [0.0, 0.5, 0.5], [0.5, 0.5, 0.0]]},
  "step": {"kind": "fixed", "alpha": 3e-4},
  "x0": {"kind": "constant", "value": 1.0},
  "iterations": 200
})";

nlohmann::json toy_json() { return nlohmann::json::parse(kToy); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("dgd_config_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Config, ParsesAndRoundTrips) {
  const RunConfig c = parse_config(std::string(kToy));
  EXPECT_EQ(c.name, "toy");
  EXPECT_EQ(c.objective.name, "paper_toy");
  ASSERT_TRUE(c.network.matrix.has_value());
  EXPECT_EQ(*c.step.alpha, 3e-4);
  EXPECT_EQ(c.x0.kind, "constant");
  EXPECT_EQ(c.iterations, 200u);
  EXPECT_EQ(parse_config(to_json(c)), c);
  EXPECT_EQ(to_json(parse_config(to_json(c))).dump(), to_json(c).dump());
}

TEST(Config, EveryPresetRoundTrips) {
  for (const auto& preset : list_presets())
    for (const auto& run : preset.runs) EXPECT_EQ(parse_config(to_json(run)), run) << run.name;
}

TEST(Config, RichConfigRoundTrips) {
  auto j = toy_json();
  j["problem"] = {{"objective", "least_squares"}, {"seed", 4}, {"agents", 3}, {"dimension", 5},
                  {"rows", 7}, {"sparsity", 2}, {"noise", 0.25}};
  j["reg"] = nlohmann::json::array({{{"kind", "scad"}, {"lambda", 0.5}, {"a", 3.0}},
                                    {{"kind", "lq"}, {"lambda", 0.2}, {"q", 0.5}},
                                    {{"kind", "box"}, {"lo", -1.0}, {"hi", 2.0}}});
  j["network"]["lazy"] = 0.25;
  j["step"] = {{"kind", "decreasing"}, {"epsilon", 1.0}, {"numerator", 2.0}};
  j["x0"] = {{"kind", "rows"}, {"rows", {{1, 2, 3, 4, 5}, {0, 0, 0, 0, 0}, {-1, -1, -1, -1, -1}}}};
  j["step_floor"] = 1e-12;
  j["output"] = {{"trace", "t.csv"}, {"audit", "a.json"}};
  const RunConfig c = parse_config(j);
  EXPECT_TRUE(c.reg_per_agent);
  EXPECT_EQ(c.reg[2].kind, "box");
  EXPECT_EQ(parse_config(to_json(c)), c);
  const Experiment ex = build_experiment(c);
  EXPECT_EQ(ex.problem.regularizers.size(), 3u);
  EXPECT_EQ(ex.x0(0, 4), 5.0);
  EXPECT_NEAR(ex.mix.lambda_min(), 0.25 + 0.75 * -0.5, 1e-14);
  EXPECT_FALSE(ex.schedule.is_fixed());
}

TEST(Config, RejectsUnknownKeys) {
  auto top = toy_json();
  top["colour"] = "blue";
  EXPECT_THROW(parse_config(top), ConfigError);
  for (const char* section : {"problem", "network", "step", "x0"}) {
    auto j = toy_json();
    j[section]["bogus"] = 1;
    EXPECT_THROW(parse_config(j), ConfigError) << section;
  }
  auto reg = toy_json();
  reg["reg"] = {{"kind", "l1"}, {"lambda", 1.0}, {"mu", 2.0}};
  EXPECT_THROW(parse_config(reg), ConfigError);
}

TEST(Config, RejectsMalformedValues) {
  EXPECT_THROW(parse_config(std::string("{not json")), ConfigError);
  auto missing = toy_json();
  missing.erase("step");
  EXPECT_THROW(parse_config(missing), ConfigError);
  auto type = toy_json();
  type["iterations"] = "many";
  EXPECT_THROW(parse_config(type), ConfigError);
  auto both = toy_json();
  both["network"]["nodes"] = 3;
  EXPECT_THROW(parse_config(both), ConfigError);
  auto alpha = toy_json();
  alpha["step"]["scaled_alpha"] = 0.5;
  EXPECT_THROW(parse_config(alpha), ConfigError);
  auto kind = toy_json();
  kind["step"] = {{"kind", "armijo"}};
  EXPECT_THROW(parse_config(kind), ConfigError);
  auto obj = toy_json();
  obj["problem"] = {{"objective", "rosenbrock"}};
  EXPECT_THROW(parse_config(obj), ConfigError);
  auto toy_params = toy_json();
  toy_params["problem"]["seed"] = 3;
  EXPECT_THROW(parse_config(toy_params), ConfigError);
  auto edge = toy_json();
  edge["network"] = nlohmann::json::parse(R"({"nodes": 3, "edges": [[0, 1, 2]]})");
  EXPECT_THROW(parse_config(edge), ConfigError);
}

TEST(Config, BuildRejectsInconsistentSettings) {
  auto disconnected = toy_json();
  disconnected["network"] = nlohmann::json::parse(R"({"nodes": 3, "edges": [[0, 1]]})");
  EXPECT_THROW(build_experiment(parse_config(disconnected)), ConfigError);
  EXPECT_EQ(run_experiment(parse_config(disconnected)), kExitConfig);

  auto regs = toy_json();
  regs["reg"] = nlohmann::json::array({{{"kind", "l1"}, {"lambda", 1.0}}});
  EXPECT_THROW(build_experiment(parse_config(regs)), ConfigError);

  auto badreg = toy_json();
  badreg["reg"] = {{"kind", "nuclear"}};
  EXPECT_THROW(build_experiment(parse_config(badreg)), ConfigError);

  auto rows = toy_json();
  rows["x0"] = nlohmann::json::parse(R"({"kind": "rows", "rows": [[1.0], [2.0]]})");
  EXPECT_THROW(build_experiment(parse_config(rows)), ConfigError);

  auto eps = toy_json();
  eps["step"] = {{"kind", "decreasing"}, {"epsilon", 2.0}};
  EXPECT_EQ(run_experiment(parse_config(eps)), kExitConfig);

  auto matrix = toy_json();
  matrix["network"]["matrix"][0][0] = 0.6;
  EXPECT_THROW(build_experiment(parse_config(matrix)), ConfigError);
}

TEST(Config, StartKinds) {
  auto j = toy_json();
  j["x0"] = {{"kind", "zeros"}};
  EXPECT_EQ(build_experiment(parse_config(j)).x0, IterateMatrix::Zero(3, 1));
  j["x0"] = {{"kind", "random"}, {"seed", 5}, {"scale", 2.0}};
  const auto a = build_experiment(parse_config(j)).x0;
  const auto b = build_experiment(parse_config(j)).x0;
  EXPECT_EQ(a, b);
  EXPECT_GT(a.cwiseAbs().maxCoeff(), 0.0);
  j["x0"] = {{"kind", "sideways"}};
  EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, ScaledAlphaAndRegime) {
  auto j = toy_json();
  j["step"] = {{"kind", "fixed"}, {"scaled_alpha", 0.25}};
  const auto ex = build_experiment(parse_config(j));
  EXPECT_DOUBLE_EQ(ex.schedule.at(0), 0.25 / 1288.0);
  EXPECT_EQ(ex.schedule.regime(), "safe");
  j["step"] = {{"kind", "fixed"}, {"alpha", 1e-3}};
  EXPECT_EQ(build_experiment(parse_config(j)).schedule.regime(), "unsafe");
}

TEST(RunExperiment, WritesTraceAndAudit) {
  const auto dir = scratch("writes");
  auto j = toy_json();
  j["output"] = {{"trace", "sub/toy.csv"}, {"audit", "sub/toy.json"}};
  EXPECT_EQ(run_experiment(parse_config(j), dir), kExitOk);
  const std::string csv = slurp(dir / "sub/toy.csv");
  ASSERT_FALSE(csv.empty());
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "k,alpha,objective,lyapunov,consensus_error,step_norm,avg_grad_norm,descent_residual,regime");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 202);
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  EXPECT_NE(csv.find(",safe\n"), std::string::npos);
  const auto audit = nlohmann::json::parse(slurp(dir / "sub/toy.json"));
  EXPECT_TRUE(audit["passed"].get<bool>());
  EXPECT_EQ(audit["iterations"], 200);
}

TEST(RunExperiment, NumericalFailureKeepsPartialTrace) {
  const auto dir = scratch("blowup");
  auto j = toy_json();
  j["problem"] = {{"objective", "least_squares"}, {"seed", 2}, {"agents", 3}, {"dimension", 4},
                  {"rows", 6}, {"sparsity", 2}};
  j["step"] = {{"kind", "fixed"}, {"scaled_alpha", 20.0}};
  j["iterations"] = 100000;
  j["output"] = {{"trace", "t.csv"}, {"audit", "a.json"}};
  const RunConfig c = parse_config(j);
  const auto result = execute(c, dir);
  EXPECT_EQ(result.status, kExitNumerical);
  EXPECT_EQ(run_experiment(c, dir), kExitNumerical);
  const std::string csv = slurp(dir / "t.csv");
  const auto rows = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n'));
  EXPECT_EQ(rows, result.trace.iterations() + 2);
  EXPECT_LT(result.trace.iterations(), 100000u);
  const auto audit = nlohmann::json::parse(slurp(dir / "a.json"));
  EXPECT_TRUE(audit["truncated"].get<bool>());
  EXPECT_TRUE(audit.contains("failure"));
}

TEST(RunExperiment, DeterministicCsv) {
  const auto j = toy_json();
  const RunConfig c = parse_config(j);
  const auto a = execute(c), b = execute(c);
  EXPECT_EQ(trace_csv(a.trace), trace_csv(b.trace));
  EXPECT_EQ(a.trace.records.size(), c.iterations + 1);
}

TEST(Presets, ListingIsStable) {
  const auto a = list_presets(), b = list_presets();
  ASSERT_EQ(a.size(), b.size());
  std::vector<std::string> names;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_EQ(a[i].description, b[i].description);
    names.push_back(a[i].name);
  }
  for (const char* want : {"paper_toy_fixed", "paper_toy_dangerous", "paper_l0"})
    EXPECT_NE(std::find(names.begin(), names.end(), want), names.end()) << want;
  EXPECT_FALSE(find_preset("nope").has_value());
  EXPECT_EQ(find_preset("paper_l0")->runs.size(), 2u);
}

TEST(Presets, DangerousStartReachesAStationaryPoint) {
  const auto result = execute(find_preset("paper_toy_dangerous")->runs.front());
  ASSERT_EQ(result.status, kExitOk);
  const auto& x = result.trace.final_x;
  // Stationarity of the stacked iterate: 1^T grad f(x^K).
  const double total = stacked_gradient(paper_toy_problem(), x).sum();
  EXPECT_LE(std::abs(total), 1e-2) << "settled near " << x.mean();
  EXPECT_TRUE(result.report.passed());
}

TEST(Presets, L0StandInNetwork) {
  const auto ex = build_experiment(find_preset("paper_l0")->runs.front());
  EXPECT_EQ(ex.mix.size(), 10u);
  EXPECT_EQ(ex.mix.graph().edges().size(), 12u);
  EXPECT_EQ(ex.problem.objective.dimension(), 256u);
  EXPECT_EQ(ex.problem.regularizers.front().kind(), "l0");
}
