#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ecl/experiment.hpp"

using ecl::cli::Config;

namespace {

Config resolve_config(const std::string& config_path, long seed_override,
                      const std::string& out_override) {
  Config config = config_path.empty() ? Config() : ecl::cli::load_config(config_path);
  if (seed_override >= 0) config.seed = static_cast<std::uint64_t>(seed_override);
  if (!out_override.empty()) config.out_dir = out_override;
  if (const char* env = std::getenv("ECL_OUT_DIR"); env != nullptr && *env != '\0')
    config.out_dir = env;
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Expectation-consistency confidence calibration under covariate shift"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  long seed_override = -1;
  std::string out_override;
  app.add_option("--config", config_path, "experiment config file");
  app.add_option("--seed", seed_override, "override train.seed");
  app.add_option("--out", out_override, "override output.dir");

  CLI::App* simulate = app.add_subcommand("simulate", "emit a synthetic shift dataset");
  CLI::App* train = app.add_subcommand("train", "train and evaluate the configured arms");
  CLI::App* ablate = app.add_subcommand("ablate", "run an ablation protocol");
  std::string ablation = "gamma-sweep";
  ablate->add_option("--which", ablation,
                     "minibatch-trainable-vs-naive | gamma-sweep");
  CLI::App* verify = app.add_subcommand("verify", "numeric theorem verification");
  std::string which = "all";
  verify->add_option("--which", which, "theorem1 | theorem2 | theorem3 | all");
  CLI::App* report = app.add_subcommand("report", "re-render metrics from a checkpoint");
  std::string checkpoint;
  report->add_option("--checkpoint", checkpoint, "checkpoint file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const Config config = resolve_config(config_path, seed_override, out_override);
    if (simulate->parsed()) return ecl::cli::run_simulate(config, config.out_dir);
    if (train->parsed()) return ecl::cli::run_experiment(config, config.out_dir);
    if (ablate->parsed()) return ecl::cli::run_ablation(config, ablation, config.out_dir);
    if (verify->parsed()) return ecl::cli::run_verification(config, which, config.out_dir);
    if (report->parsed()) return ecl::cli::run_report(checkpoint, config.out_dir);
  } catch (const ecl::cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const ecl::model::TrainingDivergence& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
