#include <benchmark/benchmark.h>

#include "dpgan/accountant.hpp"

using namespace dpgan;

namespace {

void BM_PerStepLogMoment(benchmark::State& state) {
  MechanismParams p{0.01, 4.0};
  int lambda = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(per_step_log_moment(p, lambda));
  }
}
BENCHMARK(BM_PerStepLogMoment)->Arg(1)->Arg(8)->Arg(32)->Arg(64);

void BM_AccountantConstruction(benchmark::State& state) {
  for (auto _ : state) {
    MomentAccountant acc({0.02, 2.0}, static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(acc.epsilon_for_delta_at(1000, 1e-5));
  }
}
BENCHMARK(BM_AccountantConstruction)->Arg(32)->Arg(64);

}  // namespace
