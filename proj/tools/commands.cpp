#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "fedrate/cover.hpp"
#include "fedrate/csv.hpp"
#include "fedrate/heterogeneity.hpp"
#include "fedrate/rates.hpp"
#include "fedrate/stats.hpp"
#include "fedrate/synth.hpp"

namespace fedrate::cli {

namespace {

std::filesystem::path prepare_out(const ExperimentConfig& config, const char* name) {
  std::filesystem::create_directories(config.out_dir);
  return config.out_dir / name;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return in;
}

}  // namespace

CommandResult cmd_gen(const ExperimentConfig& config) {
  config.validate();
  const auto federation = synth::make_federation(config.model, config.m, config.n, config.seed);
  const auto path = prepare_out(config, kDatasetFile);
  csv::write_atomically(path, [&](std::ostream& out) { synth::write_federation_csv(out, federation); });
  const std::size_t rows = config.m * config.n;
  return {{path}, "wrote " + std::to_string(rows) + " rows to " + path.string()};
}

CommandResult cmd_sweep(const ExperimentConfig& config) {
  config.validate();
  const auto path = prepare_out(config, kResultsFile);
  std::size_t before = 0;
  if (std::filesystem::exists(path)) before = rates::read_results_file(path).size();
  const auto records = rates::run_sweep(config.grid, config.fed, config.sweep, path);
  const std::size_t added = records.size() - before;
  return {{path}, "added " + std::to_string(added) + " rows (" + std::to_string(records.size()) +
                      " total) to " + path.string()};
}

CommandResult cmd_dim(const ExperimentConfig& config, const std::filesystem::path& dataset) {
  auto in = open_input(dataset);
  const auto federation = synth::read_federation_csv(in);
  std::vector<std::vector<double>> rows;
  for (const auto& client : federation) {
    for (Eigen::Index j = 0; j < client.x.cols(); ++j) {
      rows.emplace_back(client.x.col(j).data(), client.x.col(j).data() + client.x.rows());
    }
  }
  if (rows.empty()) throw std::invalid_argument("dataset " + dataset.string() + " has no rows");
  const auto cloud = dim::PointCloud::from_rows(rows);
  const auto grid =
      config.dim_eps_grid.empty() ? dim::default_eps_grid(cloud, config.dim_grid_points) : config.dim_eps_grid;
  const auto estimate = config.dim_alpha ? dim::entropic_dim(cloud, *config.dim_alpha, grid)
                                         : dim::minkowski_dim(cloud, grid);

  const std::string alpha_text =
      estimate.alpha ? csv::format_double(*estimate.alpha) : std::string("minkowski");
  const auto path = prepare_out(config, kDimFile);
  csv::write_atomically(path, [&](std::ostream& out) {
    out << "kind,alpha,eps,cover_count,slope,slope_stderr\n";
    for (std::size_t i = 0; i < estimate.eps_grid.size(); ++i) {
      out << "grid," << alpha_text << ',' << csv::format_double(estimate.eps_grid[i]) << ','
          << estimate.cover_counts[i] << ",,\n";
    }
    out << "summary," << alpha_text << ",,," << csv::format_double(estimate.slope) << ','
        << csv::format_double(estimate.slope_stderr) << '\n';
  });
  std::ostringstream summary;
  summary << "dimension estimate " << estimate.slope << " +- " << estimate.slope_stderr << " from "
          << cloud.size() << " points";
  return {{path}, summary.str()};
}

CommandResult cmd_delta(const ExperimentConfig& config) {
  config.model.validate();
  const auto estimate = hetero::delta_estimate(config.model, config.m_probe, config.seed);
  const auto& kl = estimate.kl.values;
  const auto path = prepare_out(config, kDeltaFile);
  csv::write_atomically(path, [&](std::ostream& out) {
    out << "key,value\n";
    out << "delta," << csv::format_double(estimate.delta) << '\n';
    out << "psi1_norm," << csv::format_double(estimate.psi1_norm) << '\n';
    out << "d_int," << config.model.d_int << '\n';
    out << "family," << synth::to_string(config.model.family) << '\n';
    out << "m_probe," << config.m_probe << '\n';
    out << "kl_mean," << csv::format_double(stats::mean(kl)) << '\n';
    out << "kl_median," << csv::format_double(stats::quantile(kl, 0.5)) << '\n';
    out << "kl_q90," << csv::format_double(stats::quantile(kl, 0.9)) << '\n';
    out << "kl_max," << csv::format_double(*std::max_element(kl.begin(), kl.end())) << '\n';
  });
  std::ostringstream summary;
  summary << "delta = " << estimate.delta << " (psi1 norm " << estimate.psi1_norm << ")";
  return {{path}, summary.str()};
}

CommandResult cmd_fit(const ExperimentConfig& config, const std::filesystem::path& results) {
  const auto records = rates::read_results_file(results);
  const auto fits = rates::fit_all_series(records, config.x_axis, config.bootstrap, config.seed);
  const auto delta = hetero::delta_estimate(config.model, config.m_probe, config.seed).delta;
  const auto report = rates::compare_report(fits, delta);

  const auto fits_path = prepare_out(config, kFitsFile);
  const auto report_path = config.out_dir / kReportFile;
  csv::write_atomically(fits_path, [&](std::ostream& out) { report.write_csv(out); });
  csv::write_atomically(report_path, [&](std::ostream& out) { out << report.text(); });
  std::size_t passed = 0;
  for (const auto& check : report.checks) passed += check.pass ? 1 : 0;
  return {{fits_path, report_path}, std::to_string(passed) + "/" + std::to_string(report.checks.size()) +
                                        " ordering checks pass; report in " + report_path.string()};
}

namespace {

struct SeriesKey {
  synth::F0Choice f0;
  std::size_t d_int;
  rates::ClientType client;
  auto operator<=>(const SeriesKey&) const = default;
};

struct PlotPoint {
  double x;
  double mean;
  double sd;
};

template <typename T>
bool allowed(const std::vector<T>& filter, const T& value) {
  return filter.empty() || std::find(filter.begin(), filter.end(), value) != filter.end();
}

double x_of(const risk::RiskRecord& r, rates::XAxis axis) {
  const double m = static_cast<double>(r.m);
  const double n = static_cast<double>(r.n);
  switch (axis) {
    case rates::XAxis::kLogM:
      return std::log(m);
    case rates::XAxis::kLogN:
      return std::log(n);
    case rates::XAxis::kLogMN:
      break;
  }
  return std::log(m * n);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string axis_label(rates::XAxis axis) {
  switch (axis) {
    case rates::XAxis::kLogM:
      return "log m";
    case rates::XAxis::kLogN:
      return "log n";
    case rates::XAxis::kLogMN:
      break;
  }
  return "log(mn)";
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

std::string render_plot(const ExperimentConfig& config, const std::vector<risk::RiskRecord>& records) {
  std::vector<rates::ClientType> clients = config.plot_clients;
  if (clients.empty()) clients = {rates::ClientType::kParticipating, rates::ClientType::kNonParticipating};

  std::map<SeriesKey, std::map<double, std::vector<double>>> raw;
  for (const auto& r : records) {
    if (!allowed(config.plot_f0, r.f0) || !allowed(config.plot_d_int, r.d_int)) continue;
    for (auto client : clients) {
      const double mse = client == rates::ClientType::kParticipating ? r.mse_part : r.mse_nonpart;
      if (!(mse > 0.0)) throw std::invalid_argument("non-positive MSE cannot be drawn on a log scale");
      raw[{r.f0, r.d_int, client}][x_of(r, config.x_axis)].push_back(std::log(mse));
    }
  }
  if (raw.empty()) throw std::invalid_argument("plot filters leave no series to draw");

  std::map<SeriesKey, std::vector<PlotPoint>> series;
  double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
  std::vector<synth::F0Choice> f0_seen;
  std::vector<std::size_t> dint_seen;
  for (const auto& [key, levels] : raw) {
    if (std::find(f0_seen.begin(), f0_seen.end(), key.f0) == f0_seen.end()) f0_seen.push_back(key.f0);
    if (std::find(dint_seen.begin(), dint_seen.end(), key.d_int) == dint_seen.end()) {
      dint_seen.push_back(key.d_int);
    }
    auto& pts = series[key];
    for (const auto& [x, ys] : levels) {
      const double mu = stats::mean(ys);
      const double sd = ys.size() > 1 ? stats::sample_sd(ys) : 0.0;
      pts.push_back({x, mu, sd});
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
      y_lo = std::min(y_lo, mu - sd);
      y_hi = std::max(y_hi, mu + sd);
    }
  }
  if (x_hi == x_lo) {
    x_lo -= 0.5;
    x_hi += 0.5;
  }
  if (y_hi == y_lo) {
    y_lo -= 0.5;
    y_hi += 0.5;
  }

  constexpr double kWidth = 720, kHeight = 480, kLeft = 70, kRight = 220, kTop = 30, kBottom = 60;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * plot_w; };
  auto py = [&](double y) { return kTop + (y_hi - y) / (y_hi - y_lo) * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth) << "\" height=\""
      << fmt(kHeight) << "\" viewBox=\"0 0 " << fmt(kWidth) << ' ' << fmt(kHeight) << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << fmt(kWidth) << "\" height=\"" << fmt(kHeight)
      << "\" fill=\"white\"/>\n";
  svg << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop + plot_h) << "\" x2=\"" << fmt(kLeft + plot_w)
      << "\" y2=\"" << fmt(kTop + plot_h) << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop) << "\" x2=\"" << fmt(kLeft) << "\" y2=\""
      << fmt(kTop + plot_h) << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = x_lo + (x_hi - x_lo) * t / 4.0;
    const double yv = y_lo + (y_hi - y_lo) * t / 4.0;
    svg << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << fmt(kTop + plot_h + 18)
        << "\" text-anchor=\"middle\">" << fmt(xv) << "</text>\n";
    svg << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(py(yv) + 4) << "\" text-anchor=\"end\">"
        << fmt(yv) << "</text>\n";
  }
  svg << "<text x=\"" << fmt(kLeft + plot_w / 2) << "\" y=\"" << fmt(kHeight - 15)
      << "\" text-anchor=\"middle\">" << axis_label(config.x_axis) << "</text>\n";
  svg << "<text x=\"18\" y=\"" << fmt(kTop + plot_h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << fmt(kTop + plot_h / 2) << ")\">mean log MSE</text>\n";

  const bool several_f0 = f0_seen.size() > 1;
  std::size_t index = 0;
  for (const auto& [key, pts] : series) {
    const std::size_t dint_pos =
        static_cast<std::size_t>(std::find(dint_seen.begin(), dint_seen.end(), key.d_int) - dint_seen.begin());
    const std::size_t f0_pos =
        static_cast<std::size_t>(std::find(f0_seen.begin(), f0_seen.end(), key.f0) - f0_seen.begin());
    const char* color = kPalette[(dint_pos + f0_pos * dint_seen.size()) % std::size(kPalette)];
    const bool dashed = key.client == rates::ClientType::kNonParticipating;
    const std::string dash = dashed ? " stroke-dasharray=\"6 4\"" : "";

    svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      svg << (i ? " " : "") << fmt(px(pts[i].x)) << ',' << fmt(py(pts[i].mean + pts[i].sd));
    }
    for (std::size_t i = pts.size(); i-- > 0;) svg << ' ' << fmt(px(pts[i].x)) << ',' << fmt(py(pts[i].mean - pts[i].sd));
    svg << "\"/>\n";

    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"" << dash << " points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      svg << (i ? " " : "") << fmt(px(pts[i].x)) << ',' << fmt(py(pts[i].mean));
    }
    svg << "\"/>\n";
    for (const auto& p : pts) {
      svg << "<circle cx=\"" << fmt(px(p.x)) << "\" cy=\"" << fmt(py(p.mean)) << "\" r=\"3\" fill=\""
          << (dashed ? "white" : color) << "\" stroke=\"" << color << "\"/>\n";
    }

    std::string label = "d_int=" + std::to_string(key.d_int) + " " + std::string(rates::to_string(key.client));
    if (several_f0) label = std::string(synth::to_string(key.f0)) + " " + label;
    const double ly = kTop + 10 + 20.0 * static_cast<double>(index);
    const double lx = kLeft + plot_w + 15;
    svg << "<line x1=\"" << fmt(lx) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(lx + 25) << "\" y2=\""
        << fmt(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"" << dash << "/>\n";
    svg << "<text x=\"" << fmt(lx + 32) << "\" y=\"" << fmt(ly + 4) << "\">" << label << "</text>\n";
    ++index;
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

CommandResult cmd_plot(const ExperimentConfig& config, const std::filesystem::path& results) {
  const auto records = rates::read_results_file(results);
  const auto text = render_plot(config, records);
  const auto path = prepare_out(config, kPlotFile);
  csv::write_atomically(path, [&](std::ostream& out) { out << text; });
  return {{path}, "wrote " + path.string()};
}

}  // namespace fedrate::cli
