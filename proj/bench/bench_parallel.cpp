#include "roma/kernels.hpp"
#include "roma/simulation.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

std::vector<roma::ObjectPoint> distributions(std::size_t n, std::size_t m) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<roma::ObjectPoint> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double mu = z(rng);
    std::vector<double> s(m);
    for (double& v : s) v = mu + z(rng);
    out.push_back(roma::EmpiricalDistribution::from_samples(std::move(s)));
  }
  return out;
}

void BM_DistancesParallel(benchmark::State& state) {
  const auto pts = distributions(static_cast<std::size_t>(state.range(0)), 100);
  for (auto _ : state) benchmark::DoNotOptimize(roma::pairwise_sq_distances(roma::MetricKind::Wasserstein, pts));
}

void BM_DistancesSerial(benchmark::State& state) {
  const auto pts = distributions(static_cast<std::size_t>(state.range(0)), 100);
  for (auto _ : state) benchmark::DoNotOptimize(roma::serial::pairwise_sq_distances(roma::MetricKind::Wasserstein, pts));
}

void BM_GramParallel(benchmark::State& state) {
  const auto pts = distributions(static_cast<std::size_t>(state.range(0)), 100);
  const auto spec = roma::KernelSpec::gaussian(roma::MetricKind::Wasserstein, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(roma::gram(spec, pts));
}

void BM_GramSerial(benchmark::State& state) {
  const auto pts = distributions(static_cast<std::size_t>(state.range(0)), 100);
  const auto spec = roma::KernelSpec::gaussian(roma::MetricKind::Wasserstein, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(roma::serial::gram(spec, pts));
}

roma::CampaignConfig campaign() {
  roma::CampaignConfig cfg;
  cfg.spec.id = roma::Scenario::I1;
  cfg.spec.n = 50;
  cfg.spec.m = 50;
  cfg.spec.grid_size = 50;
  cfg.reps = 8;
  cfg.oracle_size = 1000;
  return cfg;
}

void BM_CampaignParallel(benchmark::State& state) {
  const auto cfg = campaign();
  const auto truth = roma::true_effects(cfg.spec, cfg.x, cfg.x_star, cfg.oracle_size);
  for (auto _ : state) benchmark::DoNotOptimize(roma::run_campaign(cfg, truth));
}

void BM_CampaignSerial(benchmark::State& state) {
  const auto cfg = campaign();
  const auto truth = roma::true_effects(cfg.spec, cfg.x, cfg.x_star, cfg.oracle_size);
  for (auto _ : state) benchmark::DoNotOptimize(roma::serial::run_campaign(cfg, truth));
}

}  // namespace

BENCHMARK(BM_DistancesParallel)->Arg(100)->Arg(400);
BENCHMARK(BM_DistancesSerial)->Arg(100)->Arg(400);
BENCHMARK(BM_GramParallel)->Arg(100)->Arg(400);
BENCHMARK(BM_GramSerial)->Arg(100)->Arg(400);
BENCHMARK(BM_CampaignParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CampaignSerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
