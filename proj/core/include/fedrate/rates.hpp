#pragma once

// Sample-size sweeps over (m, n, d_int, f0), log-log slope fits of the
// excess risk, and their comparison with the predicted exponents
// 2 beta / (2 beta + dim).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedrate/fedavg.hpp"
#include "fedrate/risk.hpp"
#include "fedrate/synth.hpp"

namespace fedrate::rates {

enum class Coupling { kMEqualsN, kFullCross };
enum class ArchPolicy { kFixedPaper, kTheoremSchedule };
enum class ClientType { kParticipating, kNonParticipating };
enum class XAxis { kLogMN, kLogM, kLogN };

std::string_view to_string(Coupling c);
std::string_view to_string(ArchPolicy p);
std::string_view to_string(ClientType c);
std::string_view to_string(XAxis a);
Coupling parse_coupling(std::string_view text);
ArchPolicy parse_arch_policy(std::string_view text);
ClientType parse_client_type(std::string_view text);
XAxis parse_x_axis(std::string_view text);

struct Cell {
  synth::F0Choice f0 = synth::F0Choice::kF1;
  std::size_t d_int = 0;
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t replication = 0;
};

struct SweepGrid {
  std::vector<std::size_t> m_values{20, 40, 60, 80, 100, 120, 140, 160, 180, 200};
  std::vector<std::size_t> n_values{20, 40, 60, 80, 100, 120, 140, 160, 180, 200};
  std::vector<std::size_t> d_int_values{10, 20};
  std::vector<synth::F0Choice> f0_choices{synth::F0Choice::kF1, synth::F0Choice::kF2};
  std::size_t replications = 20;
  std::uint64_t base_seed = 0;
  Coupling coupling = Coupling::kMEqualsN;

  void validate() const;
  // Canonical cell order: f0, d_int, (m, n), replication.
  std::vector<Cell> cells() const;

  // m = n in {20, 60, 100, 140, 180}, 5 replications, both d_int and f0.
  static SweepGrid reduced();
};

// Everything besides the grid and the optimizer that a sweep needs.
struct SweepSettings {
  std::string experiment = "synthetic";
  std::size_t d = 30;
  double noise_sd = 0.1;
  ArchPolicy arch_policy = ArchPolicy::kFixedPaper;
  // s = d_int + margin for the theorem schedule (needs s > dim).
  double schedule_s_margin = 0.5;
  std::size_t n_eval = risk::kDefaultEvalPoints;
  // Cells evaluated concurrently. Never changes the results.
  std::size_t workers = 1;
};

// predicted decay exponent 2 beta / (2 beta + dim)
double theoretical_exponent(double beta, double dim);

nn::NetworkArch architecture_for(const Cell& cell, const SweepSettings& settings);

std::uint64_t cell_seed(std::uint64_t base_seed, const Cell& cell);

// Trains and evaluates one cell.
risk::RiskRecord run_cell(const Cell& cell, std::uint64_t base_seed,
                          const fed::FedConfig& fed_cfg, const SweepSettings& settings);

// Runs every grid cell not already present in `out_path` and rewrites the
// file (atomically, canonically sorted) after each finished cell. Returns all
// records in the file afterwards.
std::vector<risk::RiskRecord> run_sweep(const SweepGrid& grid, const fed::FedConfig& fed_cfg,
                                        const SweepSettings& settings,
                                        const std::filesystem::path& out_path);

// Results CSV (header below); wall_s is the only non-deterministic column.
inline constexpr std::string_view kResultsHeader =
    "experiment,f0,beta,d,d_int,m,n,replication,arch_policy,mse_part,se_part,mse_nonpart,"
    "se_nonpart,wall_s,seed";
void write_results_csv(std::ostream& out, std::span<const risk::RiskRecord> records);
std::vector<risk::RiskRecord> read_results_csv(std::istream& in);
std::vector<risk::RiskRecord> read_results_file(const std::filesystem::path& path);

struct SeriesFilter {
  std::optional<synth::F0Choice> f0;
  std::optional<std::size_t> d_int;
  std::optional<std::string> arch_policy;
  ClientType client = ClientType::kParticipating;

  bool matches(const risk::RiskRecord& record) const;
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r2 = 0.0;
  XAxis x_axis = XAxis::kLogMN;
  std::size_t points = 0;
};

// OLS of log(MSE) on the chosen log sample-size axis, one point per record.
// Needs at least 3 distinct x levels after filtering.
SlopeFit fit_slope(std::span<const risk::RiskRecord> records, XAxis x_axis,
                   const SeriesFilter& filter);

// Slopes refitted on stratified bootstrap resamples (records resampled with
// replacement within each x level).
std::vector<double> bootstrap_slopes(std::span<const risk::RiskRecord> records, XAxis x_axis,
                                     const SeriesFilter& filter, std::size_t resamples,
                                     std::uint64_t seed);

struct SeriesFit {
  synth::F0Choice f0 = synth::F0Choice::kF1;
  std::size_t d_int = 0;
  ClientType client = ClientType::kParticipating;
  SlopeFit fit;
  std::vector<double> bootstrap;  // may be empty
};

struct ExponentLine {
  synth::F0Choice f0;
  double beta;
  std::size_t d_int;
  ClientType client;
  double fitted_slope;
  double fitted_stderr;
  double theoretical;  // predicted slope is -theoretical
};

struct OrderingCheck {
  std::string name;
  double estimate = 0.0;  // positive when the predicted ordering holds
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool pass = false;
};

struct ComparisonReport {
  double delta = 0.0;
  std::vector<ExponentLine> exponents;
  std::vector<OrderingCheck> checks;

  const OrderingCheck* find(std::string_view name) const;
  std::string text() const;
  void write_csv(std::ostream& out) const;
};

// Compares fitted slopes with theoretical_exponent(beta(f0), d_int) and
// checks orderings only: for each f0 and client type, |slope| at the smallest
// d_int must exceed |slope| at the largest with the 95% interval of the
// difference above 0. Participating-vs-nonparticipating and the monotonicity
// of the theoretical exponents are reported alongside.
ComparisonReport compare_report(std::span<const SeriesFit> fits, double delta);

// Fits every (f0, d_int, client) series present in `records`, with bootstrap.
std::vector<SeriesFit> fit_all_series(std::span<const risk::RiskRecord> records, XAxis x_axis,
                                      std::size_t resamples, std::uint64_t seed);

}  // namespace fedrate::rates
