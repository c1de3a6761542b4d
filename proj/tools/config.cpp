#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "fedrate/csv.hpp"

extern char** environ;

namespace fedrate::cli {

namespace {

std::string trim(std::string_view text) {
  auto begin = text.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  auto end = text.find_last_not_of(" \t\r");
  return std::string(text.substr(begin, end - begin + 1));
}

std::size_t parse_size(const std::string& text) {
  const long long v = csv::parse_int(text);
  if (v < 0) throw std::invalid_argument("expected a non-negative integer, got '" + text + "'");
  return static_cast<std::size_t>(v);
}

std::uint64_t parse_u64(const std::string& text) {
  std::uint64_t value = 0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw std::invalid_argument("expected an unsigned integer, got '" + text + "'");
  }
  return value;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  for (const auto& item : csv::split_line(text, ',')) {
    auto t = trim(item);
    if (t.empty()) throw std::invalid_argument("empty item in list '" + text + "'");
    out.push_back(std::move(t));
  }
  return out;
}

template <typename T, typename Fn>
std::vector<T> parse_list(const std::string& text, Fn parse_one) {
  std::vector<T> out;
  for (const auto& item : split_list(text)) out.push_back(parse_one(item));
  return out;
}

template <typename T, typename Fn>
std::string join(const std::vector<T>& values, Fn format_one) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    out += format_one(values[i]);
  }
  return out;
}

// Filters: "all" stands for the empty list.
template <typename T, typename Fn>
std::vector<T> parse_filter(const std::string& text, Fn parse_one) {
  if (text == "all") return {};
  return parse_list<T>(text, parse_one);
}

template <typename T, typename Fn>
std::string format_filter(const std::vector<T>& values, Fn format_one) {
  if (values.empty()) return "all";
  return join(values, format_one);
}

std::string size_text(std::size_t v) { return std::to_string(v); }

struct Key {
  const char* name;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"d", [](auto& c, const auto& v) { c.model.d = parse_size(v); },
       [](const auto& c) { return size_text(c.model.d); }},
      {"d_int", [](auto& c, const auto& v) { c.model.d_int = parse_size(v); },
       [](const auto& c) { return size_text(c.model.d_int); }},
      {"f0", [](auto& c, const auto& v) { c.model.f0 = synth::parse_f0(v); },
       [](const auto& c) { return std::string(synth::to_string(c.model.f0)); }},
      {"noise_sd", [](auto& c, const auto& v) { c.model.noise_sd = csv::parse_double(v); },
       [](const auto& c) { return csv::format_double(c.model.noise_sd); }},
      {"family", [](auto& c, const auto& v) { c.model.family = synth::parse_family(v); },
       [](const auto& c) { return std::string(synth::to_string(c.model.family)); }},
      {"m", [](auto& c, const auto& v) { c.m = parse_size(v); },
       [](const auto& c) { return size_text(c.m); }},
      {"n", [](auto& c, const auto& v) { c.n = parse_size(v); },
       [](const auto& c) { return size_text(c.n); }},
      {"rounds", [](auto& c, const auto& v) { c.fed.rounds = parse_size(v); },
       [](const auto& c) { return size_text(c.fed.rounds); }},
      {"local_epochs", [](auto& c, const auto& v) { c.fed.local_epochs = parse_size(v); },
       [](const auto& c) { return size_text(c.fed.local_epochs); }},
      {"lr", [](auto& c, const auto& v) { c.fed.lr = csv::parse_double(v); },
       [](const auto& c) { return csv::format_double(c.fed.lr); }},
      {"batch_size", [](auto& c, const auto& v) { c.fed.batch_size = fed::BatchSize::parse(v); },
       [](const auto& c) { return c.fed.batch_size.to_string(); }},
      {"optimizer", [](auto& c, const auto& v) { c.fed.optimizer = fed::parse_optimizer(v); },
       [](const auto& c) { return std::string(fed::to_string(c.fed.optimizer)); }},
      {"seed", [](auto& c, const auto& v) { c.seed = parse_u64(v); },
       [](const auto& c) { return std::to_string(c.seed); }},
      {"m_values",
       [](auto& c, const auto& v) { c.grid.m_values = parse_list<std::size_t>(v, parse_size); },
       [](const auto& c) { return join(c.grid.m_values, size_text); }},
      {"n_values",
       [](auto& c, const auto& v) { c.grid.n_values = parse_list<std::size_t>(v, parse_size); },
       [](const auto& c) { return join(c.grid.n_values, size_text); }},
      {"d_int_values",
       [](auto& c, const auto& v) { c.grid.d_int_values = parse_list<std::size_t>(v, parse_size); },
       [](const auto& c) { return join(c.grid.d_int_values, size_text); }},
      {"f0_choices",
       [](auto& c, const auto& v) {
         c.grid.f0_choices = parse_list<synth::F0Choice>(v, [](const std::string& s) { return synth::parse_f0(s); });
       },
       [](const auto& c) {
         return join(c.grid.f0_choices, [](synth::F0Choice f) { return std::string(synth::to_string(f)); });
       }},
      {"replications", [](auto& c, const auto& v) { c.grid.replications = parse_size(v); },
       [](const auto& c) { return size_text(c.grid.replications); }},
      {"coupling", [](auto& c, const auto& v) { c.grid.coupling = rates::parse_coupling(v); },
       [](const auto& c) { return std::string(rates::to_string(c.grid.coupling)); }},
      {"experiment",
       [](auto& c, const auto& v) {
         if (v.empty() || v.find(',') != std::string::npos) {
           throw std::invalid_argument("experiment name must be non-empty without commas");
         }
         c.sweep.experiment = v;
       },
       [](const auto& c) { return c.sweep.experiment; }},
      {"arch_policy", [](auto& c, const auto& v) { c.sweep.arch_policy = rates::parse_arch_policy(v); },
       [](const auto& c) { return std::string(rates::to_string(c.sweep.arch_policy)); }},
      {"schedule_s_margin",
       [](auto& c, const auto& v) { c.sweep.schedule_s_margin = csv::parse_double(v); },
       [](const auto& c) { return csv::format_double(c.sweep.schedule_s_margin); }},
      {"n_eval", [](auto& c, const auto& v) { c.sweep.n_eval = parse_size(v); },
       [](const auto& c) { return size_text(c.sweep.n_eval); }},
      {"dim_alpha",
       [](auto& c, const auto& v) {
         if (v == "minkowski") {
           c.dim_alpha.reset();
           return;
         }
         const double a = csv::parse_double(v);
         if (!(a > 0.0)) throw std::invalid_argument("dim_alpha must be positive or 'minkowski'");
         c.dim_alpha = a;
       },
       [](const auto& c) {
         return c.dim_alpha ? csv::format_double(*c.dim_alpha) : std::string("minkowski");
       }},
      {"dim_eps_grid",
       [](auto& c, const auto& v) {
         c.dim_eps_grid = v == "auto" ? std::vector<double>{}
                                      : parse_list<double>(v, [](const std::string& s) { return csv::parse_double(s); });
       },
       [](const auto& c) {
         return c.dim_eps_grid.empty() ? std::string("auto") : join(c.dim_eps_grid, csv::format_double);
       }},
      {"dim_grid_points", [](auto& c, const auto& v) { c.dim_grid_points = parse_size(v); },
       [](const auto& c) { return size_text(c.dim_grid_points); }},
      {"m_probe", [](auto& c, const auto& v) { c.m_probe = parse_size(v); },
       [](const auto& c) { return size_text(c.m_probe); }},
      {"x_axis", [](auto& c, const auto& v) { c.x_axis = rates::parse_x_axis(v); },
       [](const auto& c) { return std::string(rates::to_string(c.x_axis)); }},
      {"bootstrap", [](auto& c, const auto& v) { c.bootstrap = parse_size(v); },
       [](const auto& c) { return size_text(c.bootstrap); }},
      {"plot_f0",
       [](auto& c, const auto& v) {
         c.plot_f0 = parse_filter<synth::F0Choice>(v, [](const std::string& s) { return synth::parse_f0(s); });
       },
       [](const auto& c) {
         return format_filter(c.plot_f0, [](synth::F0Choice f) { return std::string(synth::to_string(f)); });
       }},
      {"plot_d_int",
       [](auto& c, const auto& v) { c.plot_d_int = parse_filter<std::size_t>(v, parse_size); },
       [](const auto& c) { return format_filter(c.plot_d_int, size_text); }},
      {"plot_clients",
       [](auto& c, const auto& v) {
         c.plot_clients = parse_filter<rates::ClientType>(
             v, [](const std::string& s) { return rates::parse_client_type(s); });
       },
       [](const auto& c) {
         return format_filter(c.plot_clients,
                              [](rates::ClientType t) { return std::string(rates::to_string(t)); });
       }},
      {"out_dir", [](auto& c, const auto& v) { c.out_dir = v; },
       [](const auto& c) { return c.out_dir.string(); }},
      {"workers",
       [](auto& c, const auto& v) {
         c.workers = parse_size(v);
         if (c.workers == 0) throw std::invalid_argument("workers must be >= 1");
       },
       [](const auto& c) { return size_text(c.workers); }},
  };
  return table;
}

const Key& find_key(const std::string& name) {
  for (const auto& key : keys()) {
    if (name == key.name) return key;
  }
  throw std::invalid_argument("unknown config key '" + name + "'");
}

}  // namespace

void ExperimentConfig::sync() {
  grid.base_seed = seed;
  fed.seed = seed;
  sweep.d = model.d;
  sweep.noise_sd = model.noise_sd;
  sweep.workers = workers;
}

void ExperimentConfig::validate() const {
  model.validate();
  fed.validate();
  grid.validate();
  if (m == 0 || n == 0) throw std::invalid_argument("m and n must be positive");
  if (sweep.n_eval < 2) throw std::invalid_argument("n_eval must be >= 2");
  if (workers == 0) throw std::invalid_argument("workers must be >= 1");
}

void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const auto& entry = find_key(key);
  try {
    entry.set(config, value);
  } catch (const std::exception& e) {
    throw std::invalid_argument("config key '" + key + "': " + e.what());
  }
  config.sync();
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(std::string_view(content).substr(0, eq));
    const auto value = trim(std::string_view(content).substr(eq + 1));
    try {
      apply_setting(config, key, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  config.sync();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

void apply_env(ExperimentConfig& config, const std::map<std::string, std::string>& env) {
  const std::string prefix = kEnvPrefix;
  for (const auto& [name, value] : env) {
    if (name.rfind(prefix, 0) != 0) continue;
    std::string key = name.substr(prefix.size());
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    try {
      apply_setting(config, key, trim(value));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("environment " + name + ": " + e.what());
    }
  }
}

void apply_process_env(ExperimentConfig& config) {
  std::map<std::string, std::string> env;
  for (char** entry = environ; entry != nullptr && *entry != nullptr; ++entry) {
    std::string_view item(*entry);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) continue;
    env.emplace(std::string(item.substr(0, eq)), std::string(item.substr(eq + 1)));
  }
  apply_env(config, env);
}

std::string serialize(const ExperimentConfig& config) {
  std::string out;
  for (const auto& key : keys()) {
    out += key.name;
    out += " = ";
    out += key.get(config);
    out += '\n';
  }
  return out;
}

std::vector<std::string> known_keys() {
  std::vector<std::string> names;
  for (const auto& key : keys()) names.emplace_back(key.name);
  return names;
}

}  // namespace fedrate::cli
