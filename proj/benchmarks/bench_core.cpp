#include <benchmark/benchmark.h>

#include "neid/image.hpp"
#include "neid/losses.hpp"
#include "neid/metrics.hpp"
#include "neid/model.hpp"
#include "neid/ops.hpp"
#include "neid/rng.hpp"

using namespace neid;

namespace {

Image random_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  Image img = Image::zeros(h, w);
  for (float& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

template <typename T>
Tensor<T> random_tensor(int n, int c, int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<T> t(n, c, h, w);
  for (T& v : t.data) v = static_cast<T>(rng.uniform());
  return t;
}

void BM_BicubicHalve(benchmark::State& state) {
  const Image img = random_image(512, 512, 1);
  for (auto _ : state) {
    Image out = bicubic_resize(img, 256, 256);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(BM_BicubicHalve)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const Image a = random_image(side, side, 2);
  const Image b = random_image(side, side, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ssim(a, b));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Ssim)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Conv3x3(benchmark::State& state) {
  const Tensor<float> in = random_tensor<float>(1, 32, 128, 128, 4);
  const Tensor<float> w = random_tensor<float>(32, 32, 3, 3, 5);
  const std::vector<float> bias(32, 0.1f);
  for (auto _ : state) {
    Tensor<float> out = nn::conv3x3_forward(in, w, bias);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(BM_Conv3x3)->Unit(benchmark::kMillisecond);

/// Train-mode forward keeps the DR image head; infer mode drops it. The gap
/// between the two is the measured cost of the removable head.
void BM_ForwardTrain(benchmark::State& state) {
  ArchConfig arch;
  arch.levels = 3;
  arch.base_channels = 16;
  Model<float> model(arch);
  Rng rng(6);
  const auto params = model.init_params(rng);
  const Tensor<float> x = random_tensor<float>(1, 3, 128, 128, 7);
  for (auto _ : state) {
    auto out = model.forward(params, x, Mode::train);
    benchmark::DoNotOptimize(out.le_image.data.data());
  }
}
BENCHMARK(BM_ForwardTrain)->Unit(benchmark::kMillisecond);

void BM_ForwardInfer(benchmark::State& state) {
  ArchConfig arch;
  arch.levels = 3;
  arch.base_channels = 16;
  Model<float> model(arch);
  Rng rng(6);
  const auto params = model.init_params(rng);
  const Tensor<float> x = random_tensor<float>(1, 3, 128, 128, 7);
  for (auto _ : state) {
    auto out = model.forward(params, x, Mode::infer);
    benchmark::DoNotOptimize(out.le_image.data.data());
  }
}
BENCHMARK(BM_ForwardInfer)->Unit(benchmark::kMillisecond);

void BM_TotalLossWithGrads(benchmark::State& state) {
  ModelOutputs<float> out;
  out.le_image = random_tensor<float>(4, 3, 256, 256, 8);
  out.dr_image = random_tensor<float>(4, 3, 256, 256, 9);
  const Tensor<float> tle = random_tensor<float>(4, 3, 256, 256, 10);
  const Tensor<float> tdr = random_tensor<float>(4, 3, 256, 256, 11);
  for (auto _ : state) {
    Tensor<float> gle, gdr;
    auto bd = total_loss(out, tle, tdr, LossConfig{}, true, &gle, &gdr);
    benchmark::DoNotOptimize(bd.total);
  }
}
BENCHMARK(BM_TotalLossWithGrads)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
