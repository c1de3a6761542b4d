#pragma once

// Subcommand bodies behind the `fedrate` executable. Every command writes its
// output file atomically under config.out_dir and returns a one-line summary.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "config.hpp"
#include "fedrate/risk.hpp"

namespace fedrate::cli {

inline constexpr const char* kDatasetFile = "dataset.csv";
inline constexpr const char* kResultsFile = "results.csv";
inline constexpr const char* kDimFile = "dim.csv";
inline constexpr const char* kDeltaFile = "delta.csv";
inline constexpr const char* kFitsFile = "fits.csv";
inline constexpr const char* kReportFile = "report.txt";
inline constexpr const char* kPlotFile = "plot.svg";

struct CommandResult {
  std::vector<std::filesystem::path> outputs;
  std::string summary;
};

// Federation of config.m clients with config.n samples each.
CommandResult cmd_gen(const ExperimentConfig& config);

// Resumable sweep over config.grid into out_dir/results.csv.
CommandResult cmd_sweep(const ExperimentConfig& config);

// Entropic (or Minkowski) dimension of the x-columns of a dataset CSV.
// Rows: alpha,eps,cover_count per grid value, then one summary row.
CommandResult cmd_dim(const ExperimentConfig& config, const std::filesystem::path& dataset);

// Delta for config.model with config.m_probe probe clients; key,value rows.
CommandResult cmd_delta(const ExperimentConfig& config);

// Slope fits and ordering checks of a results CSV: fits.csv and report.txt.
CommandResult cmd_fit(const ExperimentConfig& config, const std::filesystem::path& results);

// Mean log-MSE against log sample size per (f0, d_int, client) series.
CommandResult cmd_plot(const ExperimentConfig& config, const std::filesystem::path& results);

// SVG text for the records that pass the config's plot filters; throws when
// nothing is left to draw.
std::string render_plot(const ExperimentConfig& config, const std::vector<risk::RiskRecord>& records);

}  // namespace fedrate::cli
