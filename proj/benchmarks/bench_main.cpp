#include <benchmark/benchmark.h>

#include "cfaudit/audit.hpp"
#include "cfaudit/flow.hpp"
#include "cfaudit/nn.hpp"
#include "cfaudit/scm.hpp"
#include "cfaudit/stats.hpp"
#include "cfaudit/tensor.hpp"

using namespace cfaudit;

namespace {

Matrix normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

void BM_MlpForwardBackward(benchmark::State& state) {
  Rng rng(1);
  Mlp mlp("g", {3, 64, 64, 64, 2}, rng);
  const Matrix x = normal_matrix(rng, state.range(0), 3);
  for (auto _ : state) {
    Tape tape;
    const Tensor loss = mean(square(mlp.forward(tape, tape.constant(x))));
    tape.backward(loss);
    benchmark::DoNotOptimize(mlp.parameters().front()->grad.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MlpForwardBackward)->Arg(64)->Arg(256)->Arg(1024);

void BM_MlpEvaluate(benchmark::State& state) {
  Rng rng(2);
  const Mlp mlp("g", {3, 64, 64, 64, 2}, rng);
  const Matrix x = normal_matrix(rng, state.range(0), 3);
  for (auto _ : state) benchmark::DoNotOptimize(mlp.evaluate(x).data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MlpEvaluate)->Arg(256)->Arg(4096);

void BM_FlowFit(benchmark::State& state) {
  const Dataset d = sample(build_intensity_scm(), 20000, 3);
  FitConfig c;
  c.steps = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(flow_fit(d, c).params.weight.value.data());
}
BENCHMARK(BM_FlowFit)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_FlowCounterfactuals(benchmark::State& state) {
  const Dataset d = sample(build_intensity_scm(), 20000, 4);
  const QueryBatch q = draw_queries(d, static_cast<std::size_t>(state.range(0)), 5);
  const FlowParams p = FlowParams::intensity_truth();
  for (auto _ : state) benchmark::DoNotOptimize(flow_counterfactual(p, q).data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FlowCounterfactuals)->Arg(2000);

void BM_SampleIntensity2d(benchmark::State& state) {
  const Scm scm = build_intensity_2d_scm();
  for (auto _ : state) benchmark::DoNotOptimize(sample(scm, static_cast<std::size_t>(state.range(0)), 6).y.data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SampleIntensity2d)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_KsTwoSample(benchmark::State& state) {
  Rng rng(7);
  const Matrix a = normal_matrix(rng, state.range(0), 1), b = normal_matrix(rng, state.range(0), 1);
  const std::vector<double> va(a.data(), a.data() + a.size()), vb(b.data(), b.data() + b.size());
  for (auto _ : state) benchmark::DoNotOptimize(ks_two_sample(va, vb).p_value);
}
BENCHMARK(BM_KsTwoSample)->Arg(10000);

void BM_EnergyTwoSample(benchmark::State& state) {
  Rng rng(8);
  const Matrix a = normal_matrix(rng, state.range(0), 2), b = normal_matrix(rng, state.range(0), 2);
  for (auto _ : state) benchmark::DoNotOptimize(energy_two_sample(a, b, 200, 9).p_value);
}
BENCHMARK(BM_EnergyTwoSample)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
