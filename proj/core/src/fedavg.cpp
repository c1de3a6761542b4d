#include "fedrate/fedavg.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>

#include "fedrate/csv.hpp"
#include "fedrate/error.hpp"
#include "fedrate/rng.hpp"

namespace fedrate::fed {

std::string_view to_string(Optimizer opt) { return opt == Optimizer::kAdam ? "adam" : "sgd"; }

Optimizer parse_optimizer(std::string_view text) {
  if (text == "adam" || text == "ADAM") return Optimizer::kAdam;
  if (text == "sgd" || text == "SGD") return Optimizer::kSgd;
  throw std::invalid_argument("unknown optimizer '" + std::string(text) + "'");
}

BatchSize BatchSize::fixed(std::size_t size) {
  if (size == 0) throw std::invalid_argument("batch size must be positive");
  return {Kind::kFixed, size};
}

std::size_t BatchSize::resolve(std::size_t num_samples) const {
  switch (kind) {
    case Kind::kFull:
      return num_samples;
    case Kind::kFixed:
      return std::min(size, num_samples);
    case Kind::kAuto:
      break;
  }
  return num_samples <= 256 ? num_samples : 64;
}

std::string BatchSize::to_string() const {
  switch (kind) {
    case Kind::kFull:
      return "full";
    case Kind::kFixed:
      return std::to_string(size);
    case Kind::kAuto:
      break;
  }
  return "auto";
}

BatchSize BatchSize::parse(std::string_view text) {
  if (text == "auto") return automatic();
  if (text == "full" || text == "FULL") return full();
  const auto value = csv::parse_int(text);
  if (value <= 0) throw std::invalid_argument("batch size must be positive");
  return fixed(static_cast<std::size_t>(value));
}

void FedConfig::validate() const {
  if (rounds == 0) throw std::invalid_argument("FedConfig: rounds must be >= 1");
  if (local_epochs == 0) throw std::invalid_argument("FedConfig: local_epochs must be >= 1");
  if (!(lr >= 0.0)) throw std::invalid_argument("FedConfig: lr must be >= 0");
  if (workers == 0) throw std::invalid_argument("FedConfig: workers must be >= 1");
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Runs cfg.local_epochs minibatch passes over (x, y) in place.
void train_local(nn::NetworkParams& params, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                 const FedConfig& cfg, std::size_t client_id, std::size_t round) {
  const auto n = static_cast<std::size_t>(x.cols());
  if (n == 0) throw std::invalid_argument("client " + std::to_string(client_id) + " has no samples");
  const std::size_t batch = cfg.batch_size.resolve(n);
  auto adam = nn::AdamState::fresh(params.arch(), nn::AdamHyper{.lr = cfg.lr});

  std::vector<std::size_t> order(n);
  Eigen::MatrixXd bx(x.rows(), static_cast<Eigen::Index>(batch));
  Eigen::VectorXd by(static_cast<Eigen::Index>(batch));
  for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Stream stream = make_stream({cfg.seed, stream_tag::kShuffle, client_id, round, epoch});
    std::shuffle(order.begin(), order.end(), stream);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t count = std::min(batch, n - start);
      bx.resize(x.rows(), static_cast<Eigen::Index>(count));
      by.resize(static_cast<Eigen::Index>(count));
      for (std::size_t j = 0; j < count; ++j) {
        const auto src = static_cast<Eigen::Index>(order[start + j]);
        bx.col(static_cast<Eigen::Index>(j)) = x.col(src);
        by(static_cast<Eigen::Index>(j)) = y(src);
      }
      const auto step = nn::loss_and_grad(params, bx, by);
      if (cfg.optimizer == Optimizer::kAdam) {
        nn::adam_step(params, step.grad, adam);
      } else {
        nn::sgd_step(params, step.grad, cfg.lr);
      }
    }
  }
}

double pooled_mse(const nn::NetworkParams& params, const synth::Federation& federation) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& client : federation) {
    total += (nn::forward_batch(params, client.x) - client.y).squaredNorm();
    count += client.num_samples();
  }
  return total / static_cast<double>(count);
}

}  // namespace

nn::NetworkParams local_update(const nn::NetworkParams& global, const synth::ClientState& client,
                               const FedConfig& cfg, std::size_t client_id, std::size_t round) {
  nn::NetworkParams params = global;
  train_local(params, client.x, client.y, cfg, client_id, round);
  return params;
}

nn::NetworkParams aggregate(std::span<const nn::NetworkParams> updates) {
  if (updates.empty()) throw std::invalid_argument("aggregate needs at least one update");
  nn::NetworkParams mean = updates.front();
  for (std::size_t i = 1; i < updates.size(); ++i) mean += updates[i];
  const auto count = static_cast<double>(updates.size());
  for (auto& layer : mean.layers) {
    layer.weight /= count;
    layer.bias /= count;
  }
  return mean;
}

TrainTrace run_fedavg(const synth::Federation& federation, const nn::NetworkArch& arch,
                      const FedConfig& cfg) {
  arch.validate();
  return run_fedavg(federation, nn::init_params(arch, cfg.seed), cfg);
}

TrainTrace run_fedavg(const synth::Federation& federation, nn::NetworkParams initial,
                      const FedConfig& cfg) {
  cfg.validate();
  if (federation.empty()) throw std::invalid_argument("run_fedavg needs at least one client");

  TrainTrace trace;
  trace.initial_mse = pooled_mse(initial, federation);
  trace.model = std::move(initial);

  const std::size_t m = federation.size();
  const std::size_t workers = std::min(cfg.workers, m);
  std::vector<nn::NetworkParams> updates(m);
  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    const auto start = Clock::now();
    if (workers <= 1) {
      for (std::size_t i = 0; i < m; ++i) {
        updates[i] = local_update(trace.model, federation[i], cfg, i, round);
      }
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::exception_ptr> errors(workers);
      std::vector<std::thread> pool;
      pool.reserve(workers);
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t i = next++; i < m; i = next++) {
              updates[i] = local_update(trace.model, federation[i], cfg, i, round);
            }
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (auto& t : pool) t.join();
      for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }
    trace.model = aggregate(updates);
    trace.rounds.push_back({pooled_mse(trace.model, federation), seconds_since(start)});
  }
  return trace;
}

TrainTrace run_centralized(const synth::Dataset& pooled, const nn::NetworkArch& arch,
                           const FedConfig& cfg) {
  arch.validate();
  return run_centralized(pooled, nn::init_params(arch, cfg.seed), cfg);
}

TrainTrace run_centralized(const synth::Dataset& pooled, nn::NetworkParams initial,
                           const FedConfig& cfg) {
  cfg.validate();
  TrainTrace trace;
  trace.initial_mse = nn::mse(initial, pooled.x, pooled.y);
  trace.model = std::move(initial);
  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    const auto start = Clock::now();
    train_local(trace.model, pooled.x, pooled.y, cfg, 0, round);
    trace.rounds.push_back({nn::mse(trace.model, pooled.x, pooled.y), seconds_since(start)});
  }
  return trace;
}

namespace {
constexpr std::string_view kCheckpointTag = "fedrate-checkpoint v1";
}

void write_checkpoint(std::ostream& out, const nn::NetworkParams& params) {
  const auto arch = params.arch();
  out << kCheckpointTag << "\narch";
  for (auto w : arch.widths) out << ' ' << w;
  out << '\n';
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& layer = params.layers[i];
    out << "weight " << i + 1 << ' ' << layer.weight.rows() << ' ' << layer.weight.cols() << '\n';
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        out << (c ? " " : "") << csv::format_double(layer.weight(r, c));
      }
      out << '\n';
    }
    out << "bias " << i + 1 << ' ' << layer.bias.size() << '\n';
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
      out << (r ? " " : "") << csv::format_double(layer.bias(r));
    }
    out << '\n';
  }
}

nn::NetworkParams read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointTag) {
    throw FormatError("not a fedrate checkpoint (bad version tag)");
  }
  if (!std::getline(in, line)) throw FormatError("checkpoint: missing arch line");
  std::istringstream arch_line(line);
  std::string word;
  arch_line >> word;
  if (word != "arch") throw FormatError("checkpoint: expected arch line");
  nn::NetworkArch arch;
  for (std::size_t w; arch_line >> w;) arch.widths.push_back(w);
  try {
    arch.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }

  auto read_value = [&in]() {
    std::string token;
    if (!(in >> token)) throw FormatError("checkpoint: truncated values");
    return csv::parse_double(token);
  };
  auto params = nn::NetworkParams::zeros(arch);
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    auto& layer = params.layers[i];
    std::string tag;
    std::size_t index = 0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    if (!(in >> tag >> index >> rows >> cols) || tag != "weight" || index != i + 1 ||
        rows != layer.weight.rows() || cols != layer.weight.cols()) {
      throw FormatError("checkpoint: bad weight header for layer " + std::to_string(i + 1));
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) layer.weight(r, c) = read_value();
    }
    if (!(in >> tag >> index >> rows) || tag != "bias" || index != i + 1 ||
        rows != layer.bias.size()) {
      throw FormatError("checkpoint: bad bias header for layer " + std::to_string(i + 1));
    }
    for (Eigen::Index r = 0; r < rows; ++r) layer.bias(r) = read_value();
  }
  return params;
}

}  // namespace fedrate::fed
