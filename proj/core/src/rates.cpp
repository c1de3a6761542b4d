#include "fedrate/rates.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "fedrate/csv.hpp"
#include "fedrate/error.hpp"
#include "fedrate/rng.hpp"
#include "fedrate/stats.hpp"

namespace fedrate::rates {

std::string_view to_string(Coupling c) {
  return c == Coupling::kMEqualsN ? "m_equals_n" : "full_cross";
}
std::string_view to_string(ArchPolicy p) {
  return p == ArchPolicy::kFixedPaper ? "fixed_paper" : "theorem_schedule";
}
std::string_view to_string(ClientType c) {
  return c == ClientType::kParticipating ? "participating" : "nonparticipating";
}
std::string_view to_string(XAxis a) {
  switch (a) {
    case XAxis::kLogM:
      return "log_m";
    case XAxis::kLogN:
      return "log_n";
    case XAxis::kLogMN:
      break;
  }
  return "log_mn";
}

Coupling parse_coupling(std::string_view text) {
  if (text == "m_equals_n") return Coupling::kMEqualsN;
  if (text == "full_cross") return Coupling::kFullCross;
  throw std::invalid_argument("unknown coupling '" + std::string(text) + "'");
}
ArchPolicy parse_arch_policy(std::string_view text) {
  if (text == "fixed_paper") return ArchPolicy::kFixedPaper;
  if (text == "theorem_schedule") return ArchPolicy::kTheoremSchedule;
  throw std::invalid_argument("unknown arch policy '" + std::string(text) + "'");
}
ClientType parse_client_type(std::string_view text) {
  if (text == "participating") return ClientType::kParticipating;
  if (text == "nonparticipating") return ClientType::kNonParticipating;
  throw std::invalid_argument("unknown client type '" + std::string(text) + "'");
}
XAxis parse_x_axis(std::string_view text) {
  if (text == "log_mn") return XAxis::kLogMN;
  if (text == "log_m") return XAxis::kLogM;
  if (text == "log_n") return XAxis::kLogN;
  throw std::invalid_argument("unknown x axis '" + std::string(text) + "'");
}

void SweepGrid::validate() const {
  if (m_values.empty() || n_values.empty() || d_int_values.empty() || f0_choices.empty()) {
    throw std::invalid_argument("sweep grid lists must be non-empty");
  }
  if (replications == 0) throw std::invalid_argument("sweep grid needs replications >= 1");
  for (auto v : m_values) if (v == 0) throw std::invalid_argument("m values must be positive");
  for (auto v : n_values) if (v == 0) throw std::invalid_argument("n values must be positive");
  for (auto v : d_int_values) if (v == 0) throw std::invalid_argument("d_int values must be positive");
  if (coupling == Coupling::kMEqualsN && m_values != n_values) {
    throw std::invalid_argument("m_equals_n coupling needs identical m and n lists");
  }
}

std::vector<Cell> SweepGrid::cells() const {
  validate();
  std::vector<std::pair<std::size_t, std::size_t>> sizes;
  if (coupling == Coupling::kMEqualsN) {
    for (auto m : m_values) sizes.emplace_back(m, m);
  } else {
    for (auto m : m_values) {
      for (auto n : n_values) sizes.emplace_back(m, n);
    }
  }
  std::vector<Cell> cells;
  for (auto f0 : f0_choices) {
    for (auto d_int : d_int_values) {
      for (auto [m, n] : sizes) {
        for (std::size_t r = 0; r < replications; ++r) cells.push_back({f0, d_int, m, n, r});
      }
    }
  }
  return cells;
}

SweepGrid SweepGrid::reduced() {
  SweepGrid grid;
  grid.m_values = {20, 60, 100, 140, 180};
  grid.n_values = grid.m_values;
  grid.replications = 5;
  return grid;
}

double theoretical_exponent(double beta, double dim) {
  if (!(beta > 0.0)) throw std::invalid_argument("theoretical_exponent needs beta > 0");
  if (!(dim >= 0.0)) throw std::invalid_argument("theoretical_exponent needs dim >= 0");
  return 2.0 * beta / (2.0 * beta + dim);
}

nn::NetworkArch architecture_for(const Cell& cell, const SweepSettings& settings) {
  if (settings.arch_policy == ArchPolicy::kFixedPaper) {
    return nn::NetworkArch::uniform(settings.d, 2, settings.d);
  }
  const double s = static_cast<double>(cell.d_int) + settings.schedule_s_margin;
  return nn::schedule_architecture(cell.m, cell.n, synth::smoothness(cell.f0), s, settings.d);
}

std::uint64_t cell_seed(std::uint64_t base_seed, const Cell& cell) {
  return mix_seed({base_seed, stream_tag::kCell, static_cast<std::uint64_t>(cell.f0), cell.d_int,
                   cell.m, cell.n, cell.replication});
}

risk::RiskRecord run_cell(const Cell& cell, std::uint64_t base_seed, const fed::FedConfig& fed_cfg,
                          const SweepSettings& settings) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t seed = cell_seed(base_seed, cell);

  synth::ModelSpec spec;
  spec.d = settings.d;
  spec.d_int = cell.d_int;
  spec.f0 = cell.f0;
  spec.noise_sd = settings.noise_sd;

  const auto federation = synth::make_federation(spec, cell.m, cell.n, mix_seed({seed, 1}));
  fed::FedConfig cfg = fed_cfg;
  cfg.seed = mix_seed({seed, 2});
  cfg.workers = 1;
  const auto trace = fed::run_fedavg(federation, architecture_for(cell, settings), cfg);

  std::vector<std::vector<double>> thetas;
  thetas.reserve(federation.size());
  for (const auto& client : federation) thetas.push_back(client.theta);
  const auto f0 = synth::regression_function(cell.f0);
  const auto part =
      risk::risk_participating(trace.model, f0, thetas, spec, settings.n_eval, mix_seed({seed, 3}));
  const auto nonpart =
      risk::risk_nonparticipating(trace.model, f0, spec, settings.n_eval, mix_seed({seed, 4}));

  risk::RiskRecord record;
  record.experiment = settings.experiment;
  record.f0 = cell.f0;
  record.beta = synth::smoothness(cell.f0);
  record.d = settings.d;
  record.d_int = cell.d_int;
  record.m = cell.m;
  record.n = cell.n;
  record.replication = cell.replication;
  record.arch_policy = std::string(to_string(settings.arch_policy));
  record.mse_part = part.estimate;
  record.se_part = part.std_err;
  record.mse_nonpart = nonpart.estimate;
  record.se_nonpart = nonpart.std_err;
  record.seed = seed;
  record.n_eval = settings.n_eval;
  record.wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

namespace {

using RecordKey = std::tuple<std::string, std::string, int, std::size_t, std::size_t, std::size_t,
                             std::size_t, std::size_t>;

RecordKey key_of(const risk::RiskRecord& r) {
  return {r.experiment, r.arch_policy, static_cast<int>(r.f0), r.d, r.d_int, r.m, r.n,
          r.replication};
}

void sort_records(std::vector<risk::RiskRecord>& records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const auto& a, const auto& b) { return key_of(a) < key_of(b); });
}

}  // namespace

void write_results_csv(std::ostream& out, std::span<const risk::RiskRecord> records) {
  out << kResultsHeader << '\n';
  for (const auto& r : records) {
    out << r.experiment << ',' << synth::to_string(r.f0) << ',' << csv::format_double(r.beta)
        << ',' << r.d << ',' << r.d_int << ',' << r.m << ',' << r.n << ',' << r.replication << ','
        << r.arch_policy << ',' << csv::format_double(r.mse_part) << ','
        << csv::format_double(r.se_part) << ',' << csv::format_double(r.mse_nonpart) << ','
        << csv::format_double(r.se_nonpart) << ',' << csv::format_double(r.wall_s) << ','
        << r.seed << '\n';
  }
}

std::vector<risk::RiskRecord> read_results_csv(std::istream& in) {
  const auto table = csv::read_table(in);
  const auto col = [&](std::string_view name) { return table.column(name); };
  const auto c_exp = col("experiment");
  const auto c_f0 = col("f0");
  const auto c_beta = col("beta");
  const auto c_d = col("d");
  const auto c_dint = col("d_int");
  const auto c_m = col("m");
  const auto c_n = col("n");
  const auto c_rep = col("replication");
  const auto c_arch = col("arch_policy");
  const auto c_mp = col("mse_part");
  const auto c_sp = col("se_part");
  const auto c_mn = col("mse_nonpart");
  const auto c_sn = col("se_nonpart");
  const auto c_wall = col("wall_s");
  const auto c_seed = col("seed");
  auto as_size = [](const std::string& text) {
    const auto v = csv::parse_int(text);
    if (v < 0) throw FormatError("negative count '" + text + "' in results CSV");
    return static_cast<std::size_t>(v);
  };
  std::vector<risk::RiskRecord> records;
  for (const auto& row : table.rows) {
    risk::RiskRecord r;
    r.experiment = row[c_exp];
    r.f0 = synth::parse_f0(row[c_f0]);
    r.beta = csv::parse_double(row[c_beta]);
    r.d = as_size(row[c_d]);
    r.d_int = as_size(row[c_dint]);
    r.m = as_size(row[c_m]);
    r.n = as_size(row[c_n]);
    r.replication = as_size(row[c_rep]);
    r.arch_policy = row[c_arch];
    r.mse_part = csv::parse_double(row[c_mp]);
    r.se_part = csv::parse_double(row[c_sp]);
    r.mse_nonpart = csv::parse_double(row[c_mn]);
    r.se_nonpart = csv::parse_double(row[c_sn]);
    r.wall_s = csv::parse_double(row[c_wall]);
    r.seed = std::stoull(row[c_seed]);
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<risk::RiskRecord> read_results_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open results file " + path.string());
  return read_results_csv(in);
}

std::vector<risk::RiskRecord> run_sweep(const SweepGrid& grid, const fed::FedConfig& fed_cfg,
                                        const SweepSettings& settings,
                                        const std::filesystem::path& out_path) {
  fed_cfg.validate();
  if (settings.workers == 0) throw std::invalid_argument("sweep needs workers >= 1");
  std::vector<risk::RiskRecord> records;
  if (std::filesystem::exists(out_path)) records = read_results_file(out_path);

  std::map<RecordKey, bool> present;
  for (const auto& r : records) present[key_of(r)] = true;

  std::vector<Cell> todo;
  for (const auto& cell : grid.cells()) {
    risk::RiskRecord probe;
    probe.experiment = settings.experiment;
    probe.arch_policy = std::string(to_string(settings.arch_policy));
    probe.f0 = cell.f0;
    probe.d = settings.d;
    probe.d_int = cell.d_int;
    probe.m = cell.m;
    probe.n = cell.n;
    probe.replication = cell.replication;
    if (!present.contains(key_of(probe))) todo.push_back(cell);
  }

  std::mutex write_mutex;
  auto persist = [&](risk::RiskRecord record) {
    std::lock_guard lock(write_mutex);
    const std::string where = "results for cell (f0=" + std::string(synth::to_string(record.f0)) +
                              ", d_int=" + std::to_string(record.d_int) +
                              ", m=" + std::to_string(record.m) + ", n=" + std::to_string(record.n) +
                              ", rep=" + std::to_string(record.replication) + ")";
    records.push_back(std::move(record));
    sort_records(records);
    try {
      csv::write_atomically(out_path, [&](std::ostream& out) { write_results_csv(out, records); });
    } catch (const std::exception& e) {
      throw std::runtime_error("writing " + where + " failed: " + e.what());
    }
  };
  auto describe = [](const Cell& c) {
    return "cell (f0=" + std::string(synth::to_string(c.f0)) + ", d_int=" + std::to_string(c.d_int) +
           ", m=" + std::to_string(c.m) + ", n=" + std::to_string(c.n) +
           ", rep=" + std::to_string(c.replication) + ")";
  };
  auto run_one = [&](const Cell& cell) {
    risk::RiskRecord record;
    try {
      record = run_cell(cell, grid.base_seed, fed_cfg, settings);
    } catch (const std::exception& e) {
      throw std::runtime_error(describe(cell) + ": " + e.what());
    }
    persist(std::move(record));
  };

  const std::size_t workers = std::min(settings.workers, std::max<std::size_t>(todo.size(), 1));
  if (workers <= 1) {
    for (const auto& cell : todo) run_one(cell);
  } else {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < todo.size() && !failed; i = next++) run_one(todo[i]);
        } catch (...) {
          failed = true;
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  if (todo.empty() && !std::filesystem::exists(out_path)) {
    csv::write_atomically(out_path, [&](std::ostream& out) { write_results_csv(out, records); });
  }
  return records;
}

bool SeriesFilter::matches(const risk::RiskRecord& record) const {
  if (f0 && record.f0 != *f0) return false;
  if (d_int && record.d_int != *d_int) return false;
  if (arch_policy && record.arch_policy != *arch_policy) return false;
  return true;
}

namespace {

double x_value(const risk::RiskRecord& r, XAxis axis) {
  switch (axis) {
    case XAxis::kLogM:
      return std::log(static_cast<double>(r.m));
    case XAxis::kLogN:
      return std::log(static_cast<double>(r.n));
    case XAxis::kLogMN:
      break;
  }
  return std::log(static_cast<double>(r.m) * static_cast<double>(r.n));
}

double y_value(const risk::RiskRecord& r, ClientType client) {
  return std::log(client == ClientType::kParticipating ? r.mse_part : r.mse_nonpart);
}

// (x, y) points grouped by x level, in ascending x.
std::map<double, std::vector<double>> series_points(std::span<const risk::RiskRecord> records,
                                                    XAxis axis, const SeriesFilter& filter) {
  std::map<double, std::vector<double>> levels;
  for (const auto& r : records) {
    if (!filter.matches(r)) continue;
    levels[x_value(r, axis)].push_back(y_value(r, filter.client));
  }
  if (levels.size() < 3) {
    throw std::invalid_argument("fit_slope needs at least 3 distinct x levels, got " +
                                std::to_string(levels.size()));
  }
  return levels;
}

stats::LineFit fit_levels(const std::map<double, std::vector<double>>& levels) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& [x, values] : levels) {
    for (double y : values) {
      xs.push_back(x);
      ys.push_back(y);
    }
  }
  return stats::ols(xs, ys);
}

}  // namespace

SlopeFit fit_slope(std::span<const risk::RiskRecord> records, XAxis x_axis,
                   const SeriesFilter& filter) {
  const auto levels = series_points(records, x_axis, filter);
  const auto line = fit_levels(levels);
  SlopeFit fit;
  fit.slope = line.slope;
  fit.intercept = line.intercept;
  fit.slope_stderr = line.slope_stderr;
  fit.r2 = line.r2;
  fit.x_axis = x_axis;
  for (const auto& [x, values] : levels) fit.points += values.size();
  return fit;
}

std::vector<double> bootstrap_slopes(std::span<const risk::RiskRecord> records, XAxis x_axis,
                                     const SeriesFilter& filter, std::size_t resamples,
                                     std::uint64_t seed) {
  const auto levels = series_points(records, x_axis, filter);
  Stream stream = make_stream({seed, stream_tag::kBootstrap});
  std::vector<double> slopes;
  slopes.reserve(resamples);
  std::map<double, std::vector<double>> resampled;
  for (std::size_t b = 0; b < resamples; ++b) {
    for (const auto& [x, values] : levels) {
      std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
      auto& out = resampled[x];
      out.resize(values.size());
      for (auto& v : out) v = values[pick(stream)];
    }
    slopes.push_back(fit_levels(resampled).slope);
  }
  return slopes;
}

std::vector<SeriesFit> fit_all_series(std::span<const risk::RiskRecord> records, XAxis x_axis,
                                      std::size_t resamples, std::uint64_t seed) {
  std::map<std::pair<int, std::size_t>, bool> groups;
  for (const auto& r : records) groups[{static_cast<int>(r.f0), r.d_int}] = true;
  std::vector<SeriesFit> fits;
  for (const auto& [key, unused] : groups) {
    for (auto client : {ClientType::kParticipating, ClientType::kNonParticipating}) {
      SeriesFit fit;
      fit.f0 = static_cast<synth::F0Choice>(key.first);
      fit.d_int = key.second;
      fit.client = client;
      SeriesFilter filter{fit.f0, fit.d_int, std::nullopt, client};
      fit.fit = fit_slope(records, x_axis, filter);
      if (resamples > 0) {
        fit.bootstrap = bootstrap_slopes(
            records, x_axis, filter, resamples,
            mix_seed({seed, static_cast<std::uint64_t>(key.first), key.second,
                      static_cast<std::uint64_t>(client)}));
      }
      fits.push_back(std::move(fit));
    }
  }
  return fits;
}

namespace {

// estimate = |a| - |b| with a 95% interval: paired bootstrap percentiles when
// both sides carry equally many resamples, otherwise a normal interval from
// the OLS standard errors.
OrderingCheck magnitude_gap(std::string name, const SeriesFit& a, const SeriesFit& b) {
  OrderingCheck check;
  check.name = std::move(name);
  check.estimate = std::abs(a.fit.slope) - std::abs(b.fit.slope);
  if (!a.bootstrap.empty() && a.bootstrap.size() == b.bootstrap.size()) {
    std::vector<double> diffs(a.bootstrap.size());
    for (std::size_t i = 0; i < diffs.size(); ++i) {
      diffs[i] = std::abs(a.bootstrap[i]) - std::abs(b.bootstrap[i]);
    }
    check.ci_low = stats::quantile(diffs, 0.025);
    check.ci_high = stats::quantile(diffs, 0.975);
  } else {
    const double se = std::hypot(a.fit.slope_stderr, b.fit.slope_stderr);
    check.ci_low = check.estimate - 1.96 * se;
    check.ci_high = check.estimate + 1.96 * se;
  }
  check.pass = check.estimate > 0.0 && check.ci_low > 0.0;
  return check;
}

std::string f0_label(synth::F0Choice f0) { return std::string(synth::to_string(f0)); }

}  // namespace

ComparisonReport compare_report(std::span<const SeriesFit> fits, double delta) {
  if (fits.empty()) throw std::invalid_argument("compare_report needs fits");
  ComparisonReport report;
  report.delta = delta;

  std::map<std::tuple<int, std::size_t, int>, const SeriesFit*> index;
  std::map<int, std::vector<std::size_t>> dims_of;
  for (const auto& fit : fits) {
    index[{static_cast<int>(fit.f0), fit.d_int, static_cast<int>(fit.client)}] = &fit;
    auto& dims = dims_of[static_cast<int>(fit.f0)];
    if (std::find(dims.begin(), dims.end(), fit.d_int) == dims.end()) dims.push_back(fit.d_int);
    const double beta = synth::smoothness(fit.f0);
    report.exponents.push_back({fit.f0, beta, fit.d_int, fit.client, fit.fit.slope,
                                fit.fit.slope_stderr,
                                theoretical_exponent(beta, static_cast<double>(fit.d_int))});
  }
  auto get = [&](int f0, std::size_t d_int, ClientType client) -> const SeriesFit& {
    const auto it = index.find({f0, d_int, static_cast<int>(client)});
    if (it == index.end()) {
      throw std::invalid_argument("compare_report: missing " + std::string(to_string(client)) +
                                  " fit for f0=" + f0_label(static_cast<synth::F0Choice>(f0)) +
                                  ", d_int=" + std::to_string(d_int));
    }
    return *it->second;
  };

  for (auto& [f0, dims] : dims_of) {
    std::sort(dims.begin(), dims.end());
    if (dims.size() < 2) {
      throw std::invalid_argument("compare_report needs fits for two d_int values (f0=" +
                                  f0_label(static_cast<synth::F0Choice>(f0)) + ")");
    }
    const auto label = f0_label(static_cast<synth::F0Choice>(f0));
    const std::size_t low = dims.front();
    const std::size_t high = dims.back();
    for (auto client : {ClientType::kParticipating, ClientType::kNonParticipating}) {
      report.checks.push_back(magnitude_gap(
          "d_int_ordering/" + label + "/" + std::string(to_string(client)) + "/" +
              std::to_string(low) + ">" + std::to_string(high),
          get(f0, low, client), get(f0, high, client)));
    }
    for (auto d_int : dims) {
      report.checks.push_back(magnitude_gap(
          "part_vs_nonpart/" + label + "/d_int=" + std::to_string(d_int),
          get(f0, d_int, ClientType::kParticipating), get(f0, d_int, ClientType::kNonParticipating)));
    }
    const double beta = synth::smoothness(static_cast<synth::F0Choice>(f0));
    OrderingCheck theory;
    theory.name = "theory_decreasing_in_dim/" + label;
    theory.estimate = theoretical_exponent(beta, static_cast<double>(low)) -
                      theoretical_exponent(beta, static_cast<double>(high));
    theory.ci_low = theory.ci_high = theory.estimate;
    theory.pass = theory.estimate > 0.0;
    report.checks.push_back(theory);
  }
  // Smoother targets are predicted to decay faster at every dimension.
  if (dims_of.size() >= 2) {
    for (const auto& [f0, dims] : dims_of) {
      for (auto d_int : dims) {
        OrderingCheck theory;
        theory.name = "theory_increasing_in_beta/d_int=" + std::to_string(d_int);
        if (std::any_of(report.checks.begin(), report.checks.end(),
                        [&](const auto& c) { return c.name == theory.name; })) {
          continue;
        }
        theory.estimate = theoretical_exponent(2.0, static_cast<double>(d_int)) -
                          theoretical_exponent(1.0, static_cast<double>(d_int));
        theory.ci_low = theory.ci_high = theory.estimate;
        theory.pass = theory.estimate > 0.0;
        report.checks.push_back(theory);
      }
    }
  }
  return report;
}

const OrderingCheck* ComparisonReport::find(std::string_view name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::string ComparisonReport::text() const {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  out << "Heterogeneity Delta = " << delta << "\n\n";
  out << "Fitted log-MSE slopes vs predicted exponents (upper-bound rates, log factors ignored)\n";
  for (const auto& e : exponents) {
    out << "  f0=" << synth::to_string(e.f0) << " beta=" << e.beta << " d_int=" << e.d_int << ' '
        << to_string(e.client) << ": slope " << e.fitted_slope << " +- " << e.fitted_stderr
        << ", predicted -" << e.theoretical << '\n';
  }
  out << "\nOrdering checks (estimate, 95% interval)\n";
  for (const auto& c : checks) {
    out << "  [" << (c.pass ? "PASS" : "FAIL") << "] " << c.name << ": " << c.estimate << " ["
        << c.ci_low << ", " << c.ci_high << "]\n";
  }
  return out.str();
}

void ComparisonReport::write_csv(std::ostream& out) const {
  out << "kind,name,f0,beta,d_int,client,value,stderr_or_ci_low,theory_or_ci_high,pass\n";
  for (const auto& e : exponents) {
    out << "slope,fit," << synth::to_string(e.f0) << ',' << csv::format_double(e.beta) << ','
        << e.d_int << ',' << to_string(e.client) << ',' << csv::format_double(e.fitted_slope)
        << ',' << csv::format_double(e.fitted_stderr) << ','
        << csv::format_double(e.theoretical) << ",\n";
  }
  for (const auto& c : checks) {
    out << "check," << c.name << ",,,,," << csv::format_double(c.estimate) << ','
        << csv::format_double(c.ci_low) << ',' << csv::format_double(c.ci_high) << ','
        << (c.pass ? "PASS" : "FAIL") << '\n';
  }
  out << "delta,delta,,,,," << csv::format_double(delta) << ",,,\n";
}

}  // namespace fedrate::rates
