#include <benchmark/benchmark.h>

#include <random>

#include "sdt/eppa.hpp"
#include "sdt/fusion.hpp"
#include "sdt/mstd.hpp"
#include "sdt/sphere_geom.hpp"

namespace sdt {
namespace {

Mask band_mask(int h, int w) {
  Mask m = make_mask(h, w);
  for (int y = h / 3; y < 2 * h / 3; ++y) {
    for (int x = w / 5; x < w / 2; ++x) m(y, x) = 1;
  }
  return m;
}

Latent noise(int c, int h, int w, std::uint64_t seed) { return gaussian_latent(c, h, w, seed); }

void BM_ProjectMask(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const Mask erp = band_mask(512, 1024);
  const CameraPose cam{0.3, 0.2, 0.0, deg2rad(90), size};
  for (auto _ : state) benchmark::DoNotOptimize(project_mask_erp_to_persp(erp, cam));
  state.SetItemsProcessed(state.iterations() * size * size);
}
BENCHMARK(BM_ProjectMask)->Arg(64)->Arg(256);

void BM_ViewSamplerShifted(benchmark::State& state) {
  const ErpGrid grid{1024, 512};
  const Mask erp = band_mask(512, 1024);
  const ViewSampler sampler({0.3, 0.2, 0.0, deg2rad(90), 256}, grid);
  int shift = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sampler.sample(erp, shift++ % 1024));
  state.SetItemsProcessed(state.iterations() * 256 * 256);
}
BENCHMARK(BM_ViewSamplerShifted);

void BM_ReprojectViaView(benchmark::State& state) {
  const Mask erp = band_mask(256, 512);
  const CameraPose cam{-0.9, 0.0, 0.0, deg2rad(120), 512};
  for (auto _ : state) benchmark::DoNotOptimize(reproject_mask_via_view(erp, cam));
}
BENCHMARK(BM_ReprojectViaView);

void BM_MdStep(benchmark::State& state) {
  const int paths = static_cast<int>(state.range(0));
  const int workers = static_cast<int>(state.range(1));
  const DdimScheduler sched({.steps = 50});
  const MockDenoiser den(sched);
  const MockCodec codec;
  const Latent z = noise(4, 64, 64, 1);
  PathSet base;
  std::vector<Rgb> colors;
  for (int i = 0; i < paths; ++i) {
    FusionPath p;
    p.mask = i == 0 ? make_mask(64, 64, 1) : band_mask(64, 64);
    p.prompt = "prompt " + std::to_string(i);
    p.foreground = i > 0;
    p.color_index = i - 1;
    base.states.push_back({z, 0, i, 0});
    base.paths.push_back(p);
    base.bootstrap_noise.push_back(noise(4, 64, 64, 10 + i));
    if (i > 0) colors.push_back({0.2f, 0.4f, 0.6f});
  }
  for (auto _ : state) {
    PathSet set = base;
    benchmark::DoNotOptimize(md_step(set, den, sched, codec, 40, {20, {}}, colors, workers));
  }
}
BENCHMARK(BM_MdStep)->Args({1, 1})->Args({4, 1})->Args({4, 4});

void BM_EppaExchange(benchmark::State& state) {
  const int view = static_cast<int>(state.range(0));
  const Latent pano = noise(4, 64, 128, 2);
  const auto poses = icosahedron_cameras(deg2rad(90), view);
  std::vector<Latent> views;
  for (int v = 0; v < 20; ++v) views.push_back(noise(4, view, view, 100 + v));
  const std::vector<char> gate(20, 1);
  for (auto _ : state) benchmark::DoNotOptimize(eppa_exchange(pano, views, poses, gate));
}
BENCHMARK(BM_EppaExchange)->Arg(16)->Arg(32);

void BM_StitchFold(benchmark::State& state) {
  const WindowPlan plan = WindowPlan{0, 8, true, -1}.resolved(64);
  const auto windows = make_windows(plan, 128);
  const Latent tile = noise(4, 64, plan.window, 3);
  for (auto _ : state) {
    StitchAccumulator acc(4, 64, 128 + 2 * plan.pad);
    for (const auto& r : windows) acc.add(tile, r.begin);
    benchmark::DoNotOptimize(stitch_fold(acc, plan.pad));
  }
}
BENCHMARK(BM_StitchFold);

}  // namespace
}  // namespace sdt

BENCHMARK_MAIN();
