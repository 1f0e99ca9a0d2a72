#include <benchmark/benchmark.h>

#include "deunet/deform.hpp"
#include "deunet/metrics.hpp"
#include "deunet/network.hpp"
#include "deunet/ops.hpp"

using namespace deunet;

namespace {
Tensor rand_t(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  fill_uniform(t, rng, lo, hi);
  return t;
}
}  // namespace

static void BM_Conv2d(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  Rng rng(1);
  Tensor x = rand_t({c, 64, 64}, rng);
  Tensor w = rand_t({c, c, 3, 3}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, 1, 1));
  state.SetComplexityN(c);
}
BENCHMARK(BM_Conv2d)->RangeMultiplier(2)->Range(4, 32)->Complexity();

static void BM_TemporalDeformAgg(benchmark::State& state) {
  Rng rng(2);
  Tensor clip = rand_t({3, 64, 64}, rng);
  Tensor off = rand_t({offset_channels(3, 3), 64, 64}, rng, -1.0, 1.0);
  Tensor w = rand_t({8, 3, 3, 3}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(temporal_deform_agg_conv(clip, off, w));
}
BENCHMARK(BM_TemporalDeformAgg);

static void BM_TemporalDeformAggBackward(benchmark::State& state) {
  Rng rng(3);
  Tensor clip = rand_t({3, 64, 64}, rng);
  Tensor off = rand_t({offset_channels(3, 3), 64, 64}, rng, -1.0, 1.0);
  Tensor w = rand_t({8, 3, 3, 3}, rng);
  Tensor up = rand_t({8, 64, 64}, rng);
  for (auto _ : state)
    benchmark::DoNotOptimize(temporal_deform_agg_conv_backward(clip, off, w, up));
}
BENCHMARK(BM_TemporalDeformAggBackward);

static void BM_NetworkForward(benchmark::State& state) {
  NetConfig cfg;
  cfg.base_channels = 8;
  cfg.tdam_channels = 8;
  DeUNet net(cfg, NetVariant::full);
  net.params().init(4);
  Rng rng(5);
  Tensor clip = rand_t({3, 64, 64}, rng, 0.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(clip));
}
BENCHMARK(BM_NetworkForward);

static void BM_NetworkTrainStep(benchmark::State& state) {
  NetConfig cfg;
  cfg.base_channels = 8;
  cfg.tdam_channels = 8;
  DeUNet net(cfg, NetVariant::full);
  net.params().init(6);
  Rng rng(7);
  Tensor clip = rand_t({3, 64, 64}, rng, 0.0, 1.0);
  Tensor u = rand_t({4, 64, 64}, rng);
  for (auto _ : state) {
    net.params().zero_grad();
    DeUNet::Trace tr;
    benchmark::DoNotOptimize(net.forward(clip, &tr));
    net.backward(u, tr);
  }
}
BENCHMARK(BM_NetworkTrainStep);

static void BM_Hausdorff(benchmark::State& state) {
  Rng rng(8);
  SegmentationMask a(64, 64), b(64, 64);
  for (auto& l : a.labels) l = static_cast<std::uint8_t>(rng.uniform_int(4));
  for (auto& l : b.labels) l = static_cast<std::uint8_t>(rng.uniform_int(4));
  for (auto _ : state) benchmark::DoNotOptimize(hausdorff(a, b, 2));
}
BENCHMARK(BM_Hausdorff);

BENCHMARK_MAIN();
