#include <benchmark/benchmark.h>

#include <random>

#include "fedrate/cover.hpp"
#include "fedrate/fedavg.hpp"
#include "fedrate/nn.hpp"
#include "fedrate/synth.hpp"

using namespace fedrate;

namespace {

void BM_LossAndGrad(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  synth::ModelSpec spec;
  const auto data = synth::pool(synth::make_federation(spec, 1, n, 1));
  const auto params = nn::init_params(nn::NetworkArch::uniform(30, 2, 30), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(nn::loss_and_grad(params, data.x, data.y));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_LossAndGrad)->Arg(64)->Arg(256)->Arg(1024);

void BM_GreedyCover(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> coords(n * 30, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    coords[i * 30] = u(rng);
    coords[i * 30 + 1] = u(rng);
  }
  const dim::PointCloud cloud(30, std::move(coords));
  for (auto _ : state) {
    benchmark::DoNotOptimize(dim::greedy_cover(cloud, 0.05).count());
  }
}
BENCHMARK(BM_GreedyCover)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);

void BM_FedAvgRound(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  synth::ModelSpec spec;
  const auto federation = synth::make_federation(spec, m, m, 4);
  fed::FedConfig cfg;
  cfg.rounds = 1;
  const auto arch = nn::NetworkArch::uniform(30, 2, 30);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fed::run_fedavg(federation, arch, cfg).model);
  }
}
BENCHMARK(BM_FedAvgRound)->Arg(20)->Arg(100)->Arg(180)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
