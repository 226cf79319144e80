#include <benchmark/benchmark.h>

#include <random>

#include "epxhop/cascade.hpp"
#include "epxhop/dataset.hpp"
#include "epxhop/gbdt.hpp"
#include "epxhop/saab.hpp"

namespace {

using namespace epxhop;

FeatureMap random_map(int size, int channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  FeatureMap m(size, channels);
  for (auto& v : m.data) v = u(rng);
  return m;
}

Image random_image(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(kImageSize, kImageSize, 3);
  for (auto& v : img.pixels) v = u(rng);
  return img;
}

void BM_SaabFit(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Eigen::MatrixXd patches(20000, n);
  for (Eigen::Index i = 0; i < patches.size(); ++i) patches.data()[i] = g(rng);
  for (auto _ : state) benchmark::DoNotOptimize(fit_saab(patches, n - 1));
}
BENCHMARK(BM_SaabFit)->Arg(9)->Arg(25);

void BM_CascadeApply(benchmark::State& state) {
  std::vector<FeatureMap> maps;
  for (int i = 0; i < 60; ++i) maps.push_back(random_map(32, 1, 100 + i));
  const auto configs = default_hop_configs(kPChannelCounts);
  const CascadeModel model = fit_cascade(maps, configs);
  for (auto _ : state) benchmark::DoNotOptimize(apply_cascade(maps[0], model));
}
BENCHMARK(BM_CascadeApply)->Unit(benchmark::kMillisecond);

void BM_GbdtFit(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0));
  std::mt19937_64 rng(2);
  std::normal_distribution<float> g;
  FeatureMatrix x(rows, 32);
  std::vector<int> y(static_cast<std::size_t>(rows));
  for (int i = 0; i < rows; ++i) {
    for (int f = 0; f < 32; ++f) x(i, f) = g(rng);
    y[static_cast<std::size_t>(i)] = (x(i, 0) + x(i, 1) > 0) + (x(i, 2) > 1);
  }
  BoostParams p;
  p.rounds = 20;
  for (auto _ : state) benchmark::DoNotOptimize(fit_boosted(x, y, 3, p));
}
BENCHMARK(BM_GbdtFit)->Arg(5000)->Arg(50000)->Unit(benchmark::kMillisecond);

void BM_GbdtPredict(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> g;
  FeatureMatrix x(5000, 32);
  std::vector<int> y(5000);
  for (int i = 0; i < 5000; ++i) {
    for (int f = 0; f < 32; ++f) x(i, f) = g(rng);
    y[static_cast<std::size_t>(i)] = x(i, 3) > 0;
  }
  BoostParams p;
  p.rounds = 100;
  const BoostedModel m = fit_boosted(x, y, 2, p);
  for (auto _ : state) benchmark::DoNotOptimize(m.predict_proba(x));
  state.SetItemsProcessed(state.iterations() * x.rows());
}
BENCHMARK(BM_GbdtPredict)->Unit(benchmark::kMillisecond);

void BM_LanczosResize(benchmark::State& state) {
  const Image src = crop(random_image(4), 2, 3, 26, 28);
  for (auto _ : state) benchmark::DoNotOptimize(lanczos_resize(src, 32, 32));
}
BENCHMARK(BM_LanczosResize);

void BM_AugmentEightfold(benchmark::State& state) {
  LabeledImage img{random_image(5), 1, 0};
  for (auto _ : state) benchmark::DoNotOptimize(augment_eightfold(img, 9));
}
BENCHMARK(BM_AugmentEightfold);

}  // namespace
BENCHMARK_MAIN();
