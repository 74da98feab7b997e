#include <map>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "acervo/kernels.hpp"

namespace {

struct Data {
  std::vector<float> high;
  std::vector<double> low;
  std::size_t n, dim;
};

const Data& data(std::size_t n) {
  static std::map<std::size_t, Data> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g;
  Data d{{}, {}, n, 64};
  for (std::size_t i = 0; i < n * d.dim; ++i) d.high.push_back(static_cast<float>(g(rng)));
  for (std::size_t i = 0; i < n * 2; ++i) d.low.push_back(g(rng));
  return cache.emplace(n, std::move(d)).first->second;
}

acervo::RowsView<float> high(const Data& d) { return {d.high, d.n, d.dim}; }
acervo::RowsView<double> low(const Data& d) { return {d.low, d.n, 2}; }

void BM_KnnSerial(benchmark::State& state) {
  const auto& d = data(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(acervo::knn_serial(high(d), 15, acervo::Metric::euclidean));
}

void BM_KnnParallel(benchmark::State& state) {
  const auto& d = data(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(acervo::knn_parallel(high(d), 15, acervo::Metric::euclidean));
}

void BM_TrustSerial(benchmark::State& state) {
  const auto& d = data(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(acervo::trustworthiness_serial(high(d), low(d), 10, acervo::Metric::euclidean));
}

void BM_TrustParallel(benchmark::State& state) {
  const auto& d = data(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(acervo::trustworthiness_parallel(high(d), low(d), 10, acervo::Metric::euclidean));
}

}  // namespace

BENCHMARK(BM_KnnSerial)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KnnParallel)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrustSerial)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrustParallel)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
