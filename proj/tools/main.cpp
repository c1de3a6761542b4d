#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "config.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::vector<std::string> settings;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--seed", flags.seed, "base seed");
  cmd->add_option("--workers", flags.workers, "worker threads (never changes results)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--set", flags.settings, "override a config key, KEY=VALUE (repeatable)");
}

// defaults < config file < FEDRATE_* environment < flags
fedrate::cli::ExperimentConfig resolve(const CommonFlags& flags) {
  using namespace fedrate::cli;
  ExperimentConfig config = flags.config_path.empty() ? ExperimentConfig{} : load_config(flags.config_path);
  apply_process_env(config);
  for (const auto& item : flags.settings) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects KEY=VALUE, got '" + item + "'");
    apply_setting(config, item.substr(0, eq), item.substr(eq + 1));
  }
  if (!flags.out_dir.empty()) apply_setting(config, "out_dir", flags.out_dir);
  if (flags.seed) apply_setting(config, "seed", std::to_string(*flags.seed));
  if (flags.workers) apply_setting(config, "workers", std::to_string(*flags.workers));
  config.sync();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated nonparametric regression experiments"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string data_path;
  std::string results_path;
  bool print_config = false;

  auto* gen = app.add_subcommand("gen", "generate a federated dataset CSV");
  auto* sweep = app.add_subcommand("sweep", "train and evaluate every grid cell (resumable)");
  auto* dim = app.add_subcommand("dim", "intrinsic dimension of a dataset's x columns");
  auto* delta = app.add_subcommand("delta", "client heterogeneity Delta");
  auto* fit = app.add_subcommand("fit", "slope fits and ordering checks of a results CSV");
  auto* plot = app.add_subcommand("plot", "SVG plot of a results CSV");
  auto* show = app.add_subcommand("config", "print the effective configuration");
  for (auto* cmd : {gen, sweep, dim, delta, fit, plot, show}) add_common(cmd, flags);
  dim->add_option("--data", data_path, "dataset CSV")->required();
  fit->add_option("--results", results_path, "results CSV")->required();
  plot->add_option("--results", results_path, "results CSV")->required();
  sweep->add_flag("--print-config", print_config, "echo the effective configuration first");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto config = resolve(flags);
    using namespace fedrate::cli;
    if (show->parsed()) {
      std::cout << serialize(config);
      return 0;
    }
    if (print_config) std::cout << serialize(config);
    CommandResult result;
    if (gen->parsed()) {
      result = cmd_gen(config);
    } else if (sweep->parsed()) {
      result = cmd_sweep(config);
    } else if (dim->parsed()) {
      result = cmd_dim(config, data_path);
    } else if (delta->parsed()) {
      result = cmd_delta(config);
    } else if (fit->parsed()) {
      result = cmd_fit(config, results_path);
    } else {
      result = cmd_plot(config, results_path);
    }
    std::cout << result.summary << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
