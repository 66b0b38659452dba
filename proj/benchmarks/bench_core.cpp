#include <benchmark/benchmark.h>

#include "cail/agent.hpp"
#include "cail/env.hpp"
#include "cail/model.hpp"
#include "cail/trainer.hpp"

namespace {

using namespace cail;

std::vector<Transition> make_transitions(int n) {
  const EnvSpec spec = EnvSpec::by_name("pendulum");
  PixelEnv env(spec, RngStream(1, 1));
  RngStream act(1, 2);
  std::vector<Transition> out;
  VisualState v = env.reset();
  for (int i = 0; i < n; ++i) {
    const double a = act.uniform(-1.0, 1.0);
    const StepResult sr = env.step({a});
    out.push_back({v, float(a), 0.0f, sr.visual, std::uint8_t(sr.done)});
    v = sr.done || sr.truncated ? env.reset() : sr.visual;
  }
  return out;
}

void BM_Render(benchmark::State& state) {
  const EnvSpec spec = EnvSpec::by_name("pendulum");
  PhysState s{0, 0, 1.1, 2.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(render(spec, s));
    s.theta += 1e-3;
  }
}
BENCHMARK(BM_Render);

void BM_EncoderFwd(benchmark::State& state) {
  const int b = int(state.range(0));
  ModelCfg cfg;
  Nets<float> nets(cfg, Algo::Cail, RngStream(2, 1));
  Encoder<float>::Acts acts;
  nets.encoder.prepare(acts, b);
  RngStream rng(2, 2);
  for (auto& x : acts.in) x = float(rng.uniform());
  for (auto _ : state) {
    nets.encoder.fwd(acts);
    benchmark::DoNotOptimize(acts.r);
  }
  state.SetItemsProcessed(state.iterations() * b);
}
BENCHMARK(BM_EncoderFwd)->Arg(64)->Arg(192);

void BM_EncoderFwdBwd(benchmark::State& state) {
  const int b = int(state.range(0));
  ModelCfg cfg;
  Nets<float> nets(cfg, Algo::Cail, RngStream(2, 3));
  Encoder<float>::Acts acts;
  nets.encoder.prepare(acts, b);
  RngStream rng(2, 4);
  for (auto& x : acts.in) x = float(rng.uniform());
  nn::Mat<float> dR(cfg.repr_dim, b);
  for (int c = 0; c < b; ++c)
    for (int r = 0; r < cfg.repr_dim; ++r) dR(r, c) = float(rng.gauss());
  auto params = nets.encoder_params();
  for (auto _ : state) {
    nn::zero_grads(params);
    nets.encoder.fwd(acts);
    nn::Mat<float> d = dR;
    nets.encoder.bwd(acts, d);
    benchmark::DoNotOptimize(acts.r);
  }
  state.SetItemsProcessed(state.iterations() * b);
}
BENCHMARK(BM_EncoderFwdBwd)->Arg(64)->Arg(192);

void BM_FullCailStep(benchmark::State& state) {
  ModelCfg cfg;
  Nets<float> nets(cfg, Algo::Cail, RngStream(3, 1));
  Agent<float> agent(nets, 1e-4);
  UpdateConfig ucfg;
  const int n = 64;
  auto store = make_transitions(n);
  std::vector<const Transition*> batch;
  std::vector<VisualState> experts;
  for (int i = 0; i < n; ++i) {
    batch.push_back(&store[i]);
    experts.push_back(store[i].v_next);
  }
  RngStream aug(3, 2), tnoise(3, 3), anoise(3, 4);
  for (auto _ : state) {
    agent.update_discriminator(batch, experts, 0.4, ucfg, aug);
    agent.update_critic(batch, ucfg, tnoise);
    agent.update_actor(batch, ucfg, anoise);
    agent.update_targets(0.99);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_FullCailStep)->Unit(benchmark::kMillisecond)->MinTime(10.0);

void BM_Augment(benchmark::State& state) {
  const EnvSpec spec = EnvSpec::by_name("pendulum");
  PixelEnv env(spec, RngStream(4, 1));
  VisualState v = env.reset();
  RngStream rng(4, 2);
  for (auto _ : state) benchmark::DoNotOptimize(augment(v, AugMode::Shift, rng));
}
BENCHMARK(BM_Augment);

}  // namespace

BENCHMARK_MAIN();
