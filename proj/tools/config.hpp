#pragma once

// Experiment configuration: a flat `key = value` text file (`#` starts a
// comment). Defaults reproduce the synthetic FedAvg protocol. Every key can
// be overridden by an environment variable FEDRATE_<KEY> (upper case).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedrate/fedavg.hpp"
#include "fedrate/rates.hpp"
#include "fedrate/synth.hpp"

namespace fedrate::cli {

inline constexpr const char* kEnvPrefix = "FEDRATE_";

struct ExperimentConfig {
  // model
  synth::ModelSpec model;
  // dataset generation
  std::size_t m = 20;
  std::size_t n = 20;
  // training
  fed::FedConfig fed;
  // sweep
  rates::SweepGrid grid;
  rates::SweepSettings sweep;
  // shared seed: dataset seed for gen, base seed for sweep, probe seed for delta
  std::uint64_t seed = 0;
  // intrinsic dimension
  // entropic dimension exponent; empty selects the Minkowski dimension
  std::optional<double> dim_alpha = 4.0;
  std::vector<double> dim_eps_grid;  // empty: default grid
  std::size_t dim_grid_points = 6;
  // heterogeneity
  std::size_t m_probe = 1000;
  // slope fits
  rates::XAxis x_axis = rates::XAxis::kLogMN;
  std::size_t bootstrap = 1000;
  // plot filters ("all" when empty)
  std::vector<synth::F0Choice> plot_f0;
  std::vector<std::size_t> plot_d_int;
  std::vector<rates::ClientType> plot_clients;
  // output
  std::filesystem::path out_dir = "out";
  std::size_t workers = 1;

  // Copies the shared fields (seed, workers, d, noise) into the module
  // structs; call after any change.
  void sync();
  // Throws std::invalid_argument if a module struct rejects its values.
  void validate() const;
};

// Applies `key = value`; throws std::invalid_argument for unknown keys or bad
// values.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Applies FEDRATE_* variables taken from `env` (name -> value).
void apply_env(ExperimentConfig& config, const std::map<std::string, std::string>& env);
// Same, reading the process environment.
void apply_process_env(ExperimentConfig& config);

// Every key in a fixed order; parse_config(serialize(c)) reproduces c.
std::string serialize(const ExperimentConfig& config);

std::vector<std::string> known_keys();

}  // namespace fedrate::cli
