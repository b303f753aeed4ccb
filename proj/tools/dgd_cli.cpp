#include "dgd/config.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

int report(const dgd::RunConfig& config, const std::filesystem::path& out_dir) {
  dgd::ExperimentResult result;
  try {
    result = dgd::execute(config, out_dir);
  } catch (const dgd::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return dgd::kExitConfig;
  }
  const auto& trace = result.trace;
  std::cout << config.name << ": " << trace.algorithm << ", " << trace.iterations()
            << " iterations, regime " << trace.regime_flags() << '\n';
  if (trace.failed) std::cout << "  stopped: " << trace.failure << '\n';
  std::ostringstream row;
  row << "  final row 0:";
  for (Eigen::Index j = 0; j < std::min<Eigen::Index>(trace.final_x.cols(), 4); ++j)
    row << ' ' << trace.final_x(0, j);
  if (trace.final_x.cols() > 4) row << " ...";
  std::cout << row.str() << "\n  consensus error " << trace.records.back().consensus_error << '\n';
  dgd::print_table(result.report, std::cout);
  return result.status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DGD / Prox-DGD experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run_cmd = app.add_subcommand("run", "run a JSON configuration");
  run_cmd->add_option("config", config_path, "configuration file")->required()->check(CLI::ExistingFile);

  std::string preset_name;
  std::string out_dir = ".";
  auto* preset_cmd = app.add_subcommand("preset", "run a built-in preset");
  preset_cmd->add_option("name", preset_name, "preset name")->required();
  preset_cmd->add_option("--out", out_dir, "output directory");

  auto* list_cmd = app.add_subcommand("list", "list built-in presets");

  CLI11_PARSE(app, argc, argv);

  if (*list_cmd) {
    for (const auto& p : dgd::list_presets()) std::cout << p.name << "\t" << p.description << '\n';
    return 0;
  }

  if (*run_cmd) {
    std::ifstream in(config_path);
    std::stringstream text;
    text << in.rdbuf();
    dgd::RunConfig config;
    try {
      config = dgd::parse_config(text.str());
    } catch (const dgd::ValidationError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return dgd::kExitConfig;
    }
    return report(config, {});
  }

  const auto preset = dgd::find_preset(preset_name);
  if (!preset) {
    std::cerr << "error: unknown preset \"" << preset_name << "\" (see `list`)\n";
    return dgd::kExitConfig;
  }
  int status = 0;
  for (auto config : preset->runs) {
    config.output.trace = config.name + ".csv";
    config.output.audit = config.name + ".audit.json";
    status = std::max(status, report(config, out_dir));
  }
  return status;
}
