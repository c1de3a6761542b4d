#include "fedrate/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>

#include "fedrate/csv.hpp"
#include "fedrate/error.hpp"

namespace fedrate::synth {

std::string_view to_string(F0Choice choice) {
  return choice == F0Choice::kF1 ? "F1" : "F2";
}

F0Choice parse_f0(std::string_view text) {
  if (text == "F1" || text == "f1" || text == "1") return F0Choice::kF1;
  if (text == "F2" || text == "f2" || text == "2") return F0Choice::kF2;
  throw std::invalid_argument("unknown f0 choice '" + std::string(text) + "' (expected F1 or F2)");
}

double smoothness(F0Choice choice) { return choice == F0Choice::kF1 ? 2.0 : 1.0; }

std::string_view to_string(XFamily family) {
  return family == XFamily::kShiftedUniform ? "shifted_uniform" : "homogeneous";
}

XFamily parse_family(std::string_view text) {
  if (text == "shifted_uniform") return XFamily::kShiftedUniform;
  if (text == "homogeneous") return XFamily::kHomogeneous;
  throw std::invalid_argument("unknown x family '" + std::string(text) + "'");
}

void ModelSpec::validate() const {
  if (d == 0) throw std::invalid_argument("ModelSpec: d must be positive");
  if (d_int == 0 || d_int > d) throw std::invalid_argument("ModelSpec: need 1 <= d_int <= d");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) {
    throw std::invalid_argument("ModelSpec: noise_sd must be finite and >= 0");
  }
  if (f0 == F0Choice::kF1 && d < 2) throw std::invalid_argument("ModelSpec: f0^(1) needs d >= 2");
}

double eval_f0_1(std::span<const double> x) {
  const std::size_t d = x.size();
  if (d < 2) throw std::invalid_argument("f0^(1) needs at least two coordinates");
  const double dd = static_cast<double>(d);
  constexpr double pi = std::numbers::pi;
  const double root2_minus_1 = std::numbers::sqrt2 - 1.0;
  const double knot = 1.0 / std::numbers::sqrt2;

  double pairs = 0.0;
  for (std::size_t i = 0; i + 1 < d; ++i) pairs += x[i] * x[i + 1];

  double low = 0.0;
  double high = 0.0;
  for (double xi : x) {
    if (xi <= 0.5) {
      low += std::sin(2.0 * pi * xi);
    } else {
      const double u = xi - knot;
      high += 4.0 * pi / root2_minus_1 * u * u - pi * root2_minus_1;
    }
  }
  return pairs / (dd - 1.0) + 2.0 * low / dd + high / dd;
}

double eval_f0_2(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("f0^(2) needs at least one coordinate");
  double sum = 0.0;
  for (double xi : x) sum += xi <= 0.5 ? xi * xi : -(xi - 0.75);
  return sum / static_cast<double>(x.size());
}

double eval_f0(F0Choice choice, std::span<const double> x) {
  return choice == F0Choice::kF1 ? eval_f0_1(x) : eval_f0_2(x);
}

RegressionFn regression_function(F0Choice choice) {
  if (choice == F0Choice::kF1) return [](std::span<const double> x) { return eval_f0_1(x); };
  return [](std::span<const double> x) { return eval_f0_2(x); };
}

std::vector<double> sample_theta(const ModelSpec& spec, Stream& stream) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> theta(spec.theta_dim());
  for (auto& t : theta) t = unit(stream);
  return theta;
}

void sample_x(const ModelSpec& spec, std::span<const double> theta, Stream& stream,
              std::span<double> out) {
  if (out.size() != spec.d) throw std::invalid_argument("sample_x: output must have length d");
  if (theta.size() < spec.d_int) throw std::invalid_argument("sample_x: theta shorter than d_int");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t k = 0; k < spec.d_int; ++k) {
    if (spec.family == XFamily::kShiftedUniform) {
      out[k] = theta[k] + unit(stream);
    } else {
      const double a = unit(stream);
      out[k] = a + unit(stream);
    }
  }
  for (std::size_t k = spec.d_int; k < spec.d; ++k) out[k] = 0.0;
}

namespace {

void fill_samples(const ModelSpec& spec, std::span<const double> theta, Stream& stream,
                  Eigen::MatrixXd& x, Eigen::VectorXd& y) {
  std::normal_distribution<double> noise(0.0, spec.noise_sd > 0.0 ? spec.noise_sd : 1.0);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    std::span<double> column(x.col(j).data(), spec.d);
    sample_x(spec, theta, stream, column);
    const double eps = spec.noise_sd > 0.0 ? noise(stream) : 0.0;
    y(j) = eval_f0(spec.f0, column) + eps;
  }
}

}  // namespace

Federation make_federation(const ModelSpec& spec, std::size_t m, std::size_t n,
                           std::uint64_t seed) {
  spec.validate();
  if (m == 0 || n == 0) throw std::invalid_argument("make_federation: m and n must be >= 1");
  Federation federation(m);
  for (std::size_t i = 0; i < m; ++i) {
    Stream stream = make_stream({seed, stream_tag::kClient, i});
    auto& client = federation[i];
    client.theta = sample_theta(spec, stream);
    client.x.resize(static_cast<Eigen::Index>(spec.d), static_cast<Eigen::Index>(n));
    client.y.resize(static_cast<Eigen::Index>(n));
    fill_samples(spec, client.theta, stream, client.x, client.y);
  }
  return federation;
}

Dataset sample_nonparticipating(const ModelSpec& spec, std::size_t n_eval, std::uint64_t seed) {
  spec.validate();
  if (n_eval == 0) throw std::invalid_argument("sample_nonparticipating: n_eval must be >= 1");
  Stream stream = make_stream({seed, stream_tag::kNonParticipating});
  std::normal_distribution<double> noise(0.0, spec.noise_sd > 0.0 ? spec.noise_sd : 1.0);
  Dataset data;
  data.x.resize(static_cast<Eigen::Index>(spec.d), static_cast<Eigen::Index>(n_eval));
  data.y.resize(static_cast<Eigen::Index>(n_eval));
  for (Eigen::Index j = 0; j < data.x.cols(); ++j) {
    const auto theta = sample_theta(spec, stream);
    std::span<double> column(data.x.col(j).data(), spec.d);
    sample_x(spec, theta, stream, column);
    const double eps = spec.noise_sd > 0.0 ? noise(stream) : 0.0;
    data.y(j) = eval_f0(spec.f0, column) + eps;
  }
  return data;
}

Dataset pool(const Federation& federation) {
  Dataset data;
  if (federation.empty()) return data;
  Eigen::Index total = 0;
  for (const auto& client : federation) total += client.x.cols();
  data.x.resize(federation.front().x.rows(), total);
  data.y.resize(total);
  Eigen::Index offset = 0;
  for (const auto& client : federation) {
    data.x.middleCols(offset, client.x.cols()) = client.x;
    data.y.segment(offset, client.y.size()) = client.y;
    offset += client.x.cols();
  }
  return data;
}

void write_federation_csv(std::ostream& out, const Federation& federation) {
  if (federation.empty()) throw std::invalid_argument("cannot write an empty federation");
  const std::size_t k = federation.front().theta.size();
  const auto d = static_cast<std::size_t>(federation.front().x.rows());
  out << "client_id";
  for (std::size_t i = 0; i < k; ++i) out << ",theta_" << i;
  for (std::size_t i = 0; i < d; ++i) out << ",x_" << i;
  out << ",y\n";
  for (std::size_t c = 0; c < federation.size(); ++c) {
    const auto& client = federation[c];
    for (Eigen::Index j = 0; j < client.x.cols(); ++j) {
      out << c;
      for (double t : client.theta) out << ',' << csv::format_double(t);
      for (Eigen::Index r = 0; r < client.x.rows(); ++r) {
        out << ',' << csv::format_double(client.x(r, j));
      }
      out << ',' << csv::format_double(client.y(j)) << '\n';
    }
  }
}

Federation read_federation_csv(std::istream& in) {
  const auto table = csv::read_table(in);
  std::size_t k = 0;
  std::size_t d = 0;
  while (std::find(table.header.begin(), table.header.end(), "theta_" + std::to_string(k)) !=
         table.header.end()) {
    ++k;
  }
  while (std::find(table.header.begin(), table.header.end(), "x_" + std::to_string(d)) !=
         table.header.end()) {
    ++d;
  }
  if (d == 0) throw FormatError("dataset CSV has no x_0 column");
  const auto id_col = table.column("client_id");
  const auto y_col = table.column("y");
  std::vector<std::size_t> theta_cols(k);
  std::vector<std::size_t> x_cols(d);
  for (std::size_t i = 0; i < k; ++i) theta_cols[i] = table.column("theta_" + std::to_string(i));
  for (std::size_t i = 0; i < d; ++i) x_cols[i] = table.column("x_" + std::to_string(i));

  // Group rows by client id, preserving row order within a client.
  std::vector<std::vector<std::size_t>> rows_of;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto id = csv::parse_int(table.rows[r][id_col]);
    if (id < 0) throw FormatError("negative client_id");
    if (static_cast<std::size_t>(id) >= rows_of.size()) rows_of.resize(static_cast<std::size_t>(id) + 1);
    rows_of[static_cast<std::size_t>(id)].push_back(r);
  }
  Federation federation;
  for (const auto& rows : rows_of) {
    if (rows.empty()) throw FormatError("client ids in dataset CSV are not contiguous");
    ClientState client;
    client.theta.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      client.theta[i] = csv::parse_double(table.rows[rows.front()][theta_cols[i]]);
    }
    client.x.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(rows.size()));
    client.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const auto& row = table.rows[rows[j]];
      for (std::size_t i = 0; i < d; ++i) {
        client.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            csv::parse_double(row[x_cols[i]]);
      }
      client.y(static_cast<Eigen::Index>(j)) = csv::parse_double(row[y_col]);
    }
    federation.push_back(std::move(client));
  }
  return federation;
}

}  // namespace fedrate::synth
