#include <benchmark/benchmark.h>

#include "dpgan/gan.hpp"
#include "dpgan/rng.hpp"
#include "dpgan/schema.hpp"

using namespace dpgan;

namespace {

Schema bench_schema() {
  return Schema({
      {"a", ContinuousKind{-1, 1}},
      {"b", ContinuousKind{-1, 1}},
      {"c", ContinuousKind{-1, 1}},
      {"k", CategoricalKind{{"x", "y", "z", "w"}}},
  });
}

/// Per-example critic gradient evaluation: the inner loop of dp-SGD.
void BM_CriticPerExampleGrad(benchmark::State& state) {
  Schema s = bench_schema();
  GanArchitecture arch;
  arch.noise_dim = 16;
  arch.gen_hidden = {64, 64};
  arch.disc_hidden = {static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(0))};
  GanModel model = build_model(arch, s, 1);
  CriticLossGraph cg = build_critic_loss_graph(arch, s, 1, 10.0);
  Evaluator ev(cg.graph, cg.grads);
  for (std::size_t i = 0; i < cg.theta.size(); ++i) ev.bind(cg.theta[i], &model.theta_d[i]);
  Rng rng(2);
  Tensor xr({1, s.encoded_width()}), xf({1, s.encoded_width()}), u({1, 1});
  for (std::size_t i = 0; i < xr.size(); ++i) {
    xr[i] = rng.uniform(-0.5, 0.5);
    xf[i] = rng.uniform(-0.5, 0.5);
  }
  u[0] = 0.4;
  ev.bind(cg.x_real, &xr);
  ev.bind(cg.x_fake, &xf);
  ev.bind(cg.u, &u);
  for (auto _ : state) {
    ev.run();
    benchmark::DoNotOptimize(ev.value(cg.grads[0]).data());
  }
}
BENCHMARK(BM_CriticPerExampleGrad)->Arg(64)->Arg(128);

void BM_GeneratorForward(benchmark::State& state) {
  Schema s = bench_schema();
  GanArchitecture arch;
  arch.noise_dim = 16;
  arch.gen_hidden = {64, 64};
  arch.disc_hidden = {64};
  GanModel model = build_model(arch, s, 1);
  std::size_t batch = static_cast<std::size_t>(state.range(0));
  GeneratorGraph gg = build_generator_graph(arch, s, batch);
  Evaluator ev(gg.graph, {gg.out});
  for (std::size_t i = 0; i < gg.theta.size(); ++i) ev.bind(gg.theta[i], &model.theta_g[i]);
  Rng rng(3);
  Tensor z({batch, arch.noise_dim});
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = rng.normal();
  ev.bind(gg.noise, &z);
  for (auto _ : state) {
    ev.run();
    benchmark::DoNotOptimize(ev.value(gg.out).data());
  }
}
BENCHMARK(BM_GeneratorForward)->Arg(1)->Arg(64)->Arg(256);

}  // namespace
