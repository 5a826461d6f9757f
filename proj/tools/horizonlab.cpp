#include "horizonlab/runner.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace horizonlab;

int main(int argc, char** argv) {
  CLI::App app{"horizonlab: infinite-horizon optimal control experiments"};
  std::string config_path, task, out, problem, grid, horizons, plot_dir, value_format;
  std::uint64_t seed = 0;
  double tol = 0.0;
  app.add_option("--config", config_path, "JSON experiment config");
  app.add_option("--task", task, "value | limits | pmp | criteria | regularity | example-suite");
  app.add_option("--problem", problem, "built-in problem name or path to a problem descriptor");
  app.add_option("--out", out, "output directory");
  auto* seed_opt = app.add_option("--seed", seed, "random seed recorded in the outputs");
  auto* tol_opt = app.add_option("--tol", tol, "criteria tolerance");
  app.add_option("--grid", grid, "\"h,dt,T\"");
  app.add_option("--horizons", horizons, "\"t0,ratio,count\"");
  app.add_option("--value-format", value_format, "csv | binary");
  app.add_option("--plot-data", plot_dir, "only regenerate plot CSVs for an existing output directory");
  app.set_version_flag("--version", kToolVersion);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (!plot_dir.empty()) {
      for (const auto& f : emit_plot_data(plot_dir)) std::cout << f << '\n';
      return kExitOk;
    }
    ExperimentConfig config;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ArgumentError("cannot read config " + config_path);
      config = ExperimentConfig::from_json(nlohmann::json::parse(in));
      config.config_path = config_path;
    }
    if (!task.empty()) config.task = task;
    if (!out.empty()) config.out_dir = out;
    if (*seed_opt) config.seed = seed;
    if (*tol_opt) config.tol = tol;
    if (!grid.empty()) apply_grid_flag(config, grid);
    if (!horizons.empty()) apply_horizons_flag(config, horizons);
    if (!value_format.empty()) config.value_format = value_format;
    if (!problem.empty()) {
      std::ifstream in(problem);
      config.problem = in ? nlohmann::json::parse(in) : nlohmann::json(problem);
    }
    const auto result = run(config);
    if (result.exit_code != kExitOk) {
      std::cerr << "horizonlab: " << result.message << '\n';
      return result.exit_code;
    }
    std::cout << "wrote " << result.outputs.size() << " files to " << config.out_dir << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "horizonlab: " << e.what() << '\n';
    return exit_code_for(e);
  }
}
