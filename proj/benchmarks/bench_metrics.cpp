#include <benchmark/benchmark.h>

#include <vector>

#include "dpgan/metrics.hpp"
#include "dpgan/rng.hpp"

using namespace dpgan;

namespace {

void BM_SlicedW1(benchmark::State& state) {
  Rng rng(1);
  std::size_t n = static_cast<std::size_t>(state.range(0)), dim = 8;
  std::vector<double> a(n * dim), b(n * dim);
  for (double& v : a) v = rng.normal();
  for (double& v : b) v = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(sliced_wasserstein(a, b, dim, 50, 7));
  }
}
BENCHMARK(BM_SlicedW1)->Arg(256)->Arg(1024);

void BM_Dtw(benchmark::State& state) {
  Rng rng(2);
  std::size_t len = static_cast<std::size_t>(state.range(0));
  std::vector<double> a(len), b(len);
  for (double& v : a) v = rng.normal();
  for (double& v : b) v = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(dtw(a, b));
  }
}
BENCHMARK(BM_Dtw)->Arg(96)->Arg(256);

}  // namespace
