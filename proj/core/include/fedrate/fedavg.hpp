#pragma once

// Federated Averaging: broadcast the global model, run local epochs on every
// client, average the returned parameters.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "fedrate/nn.hpp"
#include "fedrate/synth.hpp"

namespace fedrate::fed {

enum class Optimizer { kAdam, kSgd };

std::string_view to_string(Optimizer opt);
Optimizer parse_optimizer(std::string_view text);

// Minibatch size: kAuto resolves to the full local dataset when it has at
// most 256 samples and to 64 otherwise.
struct BatchSize {
  enum class Kind { kAuto, kFull, kFixed };
  Kind kind = Kind::kAuto;
  std::size_t size = 0;

  static BatchSize automatic() { return {}; }
  static BatchSize full() { return {Kind::kFull, 0}; }
  static BatchSize fixed(std::size_t size);

  std::size_t resolve(std::size_t num_samples) const;

  std::string to_string() const;
  static BatchSize parse(std::string_view text);

  bool operator==(const BatchSize&) const = default;
};

struct FedConfig {
  std::size_t rounds = 5;
  std::size_t local_epochs = 1;
  double lr = 1e-3;
  BatchSize batch_size;
  Optimizer optimizer = Optimizer::kAdam;
  std::uint64_t seed = 0;
  // Threads used for local updates within a round. Never changes results.
  std::size_t workers = 1;

  void validate() const;
};

struct RoundStat {
  double train_mse = 0.0;  // global model on all pooled training samples
  double wall_s = 0.0;
};

struct TrainTrace {
  double initial_mse = 0.0;
  std::vector<RoundStat> rounds;
  nn::NetworkParams model;
};

// Trains a copy of `global` on the client's data for cfg.local_epochs with a
// fresh optimizer. Shuffles are keyed by (seed, client_id, round).
nn::NetworkParams local_update(const nn::NetworkParams& global, const synth::ClientState& client,
                               const FedConfig& cfg, std::size_t client_id, std::size_t round);

// Elementwise mean, summed in list order.
nn::NetworkParams aggregate(std::span<const nn::NetworkParams> updates);

TrainTrace run_fedavg(const synth::Federation& federation, const nn::NetworkArch& arch,
                      const FedConfig& cfg);
TrainTrace run_fedavg(const synth::Federation& federation, nn::NetworkParams initial,
                      const FedConfig& cfg);

// Single-node baseline on pooled data: the same optimizer loop with the
// dataset treated as client 0.
TrainTrace run_centralized(const synth::Dataset& pooled, const nn::NetworkArch& arch,
                           const FedConfig& cfg);
TrainTrace run_centralized(const synth::Dataset& pooled, nn::NetworkParams initial,
                           const FedConfig& cfg);

// Text checkpoint: version tag, arch line, then per layer the row-major
// weights and the biases in shortest round-trip decimal form.
void write_checkpoint(std::ostream& out, const nn::NetworkParams& params);
nn::NetworkParams read_checkpoint(std::istream& in);

}  // namespace fedrate::fed
