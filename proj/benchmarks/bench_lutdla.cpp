#include <benchmark/benchmark.h>

#include "lutdla/dataflow.hpp"
#include "lutdla/rng.hpp"
#include "lutdla/sim.hpp"
#include "lutdla/vq.hpp"

namespace {

using namespace lutdla;

Matrix gaussian(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (double& x : m.data()) x = rng.normal();
  return m;
}

void BM_ExactGemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = gaussian(n, n, 1), b = gaussian(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(exact_gemm(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_ExactGemm)->Arg(64)->Arg(128)->Arg(256);

// Lookup-and-accumulate only; encoding and table build are measured separately.
void BM_LutGemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const VQConfig vq{4, 16};
  const Matrix a = gaussian(n, n, 1), b = gaussian(n, n, 2);
  const Codebook cb = fit_codebook(a, vq, 3, 20);
  const EncodedMatrix enc = encode(a, cb, vq.metric, vq.dist_precision);
  const PSumTable table = build_lut(cb, b, vq.lut_precision);
  for (auto _ : state) benchmark::DoNotOptimize(lut_gemm(enc, table));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_LutGemm)->Arg(64)->Arg(128)->Arg(256);

void BM_Encode(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const VQConfig vq{4, c};
  const Matrix a = gaussian(256, 256, 1);
  const Codebook cb = fit_codebook(a, vq, 3, 20);
  for (auto _ : state) benchmark::DoNotOptimize(encode(a, cb, vq.metric, vq.dist_precision));
  state.SetItemsProcessed(state.iterations() * 256 * 64);
}
BENCHMARK(BM_Encode)->Arg(8)->Arg(16)->Arg(32)->Arg(64);

void BM_BuildLut(benchmark::State& state) {
  const VQConfig vq{4, 32, Metric::L2, DistPrecision::FP32, LutPrecision::INT8};
  const Matrix a = gaussian(64, 256, 1), b = gaussian(256, 256, 2);
  const Codebook cb = fit_codebook(a, vq, 3, 10);
  for (auto _ : state) benchmark::DoNotOptimize(build_lut(cb, b, vq.lut_precision, 16));
}
BENCHMARK(BM_BuildLut);

void BM_SimulateReferenceConfig(benchmark::State& state) {
  const VQConfig vq{4, 32, Metric::L2, DistPrecision::FP32, LutPrecision::INT8};
  HwConfig hw;
  hw.tile = TileConfig{16, 512};
  std::uint64_t cycles = 0;
  for (auto _ : state) cycles = simulate(ProblemShape{512, 768, 768}, vq, hw).total_cycles;
  state.counters["cycles"] = static_cast<double>(cycles);
}
BENCHMARK(BM_SimulateReferenceConfig)->Unit(benchmark::kMillisecond);

void BM_FootprintAllDataflows(benchmark::State& state) {
  const ProblemShape s{512, 768, 768};
  const VQConfig vq{4, 32};
  const TileConfig tile{16, 512};
  const BitWidths w = BitWidths::for_centroids(32);
  for (auto _ : state)
    for (DataflowKind k : kAllDataflows) benchmark::DoNotOptimize(footprint(k, s, vq, tile, w));
}
BENCHMARK(BM_FootprintAllDataflows);

}  // namespace
BENCHMARK_MAIN();
