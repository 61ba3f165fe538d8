#include <benchmark/benchmark.h>

#include <random>

#include "mek/classifiers.hpp"
#include "mek/ensemble.hpp"
#include "mek/features.hpp"
#include "mek/imageproc.hpp"

namespace {

mek::GrayImage noise_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, 255);
  mek::GrayImage img(w, h);
  for (auto& v : img.data()) v = u(rng);
  return img;
}

struct VoteFixture {
  mek::PredictionSet set;
  std::vector<int> truth;
};

VoteFixture vote_fixture(std::size_t models, std::size_t classes, std::size_t samples) {
  std::mt19937_64 rng(7);
  std::gamma_distribution<double> g(1.0, 1.0);
  VoteFixture f;
  f.set.class_names.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) f.set.class_names[c] = "c" + std::to_string(c);
  for (std::size_t s = 0; s < samples; ++s) f.set.sample_ids.push_back("s" + std::to_string(s));
  for (std::size_t m = 0; m < models; ++m) {
    mek::ModelPredictions p;
    p.model_name = "m" + std::to_string(m);
    p.classes = classes;
    p.probs.resize(samples * classes);
    for (std::size_t s = 0; s < samples; ++s) {
      double sum = 0;
      for (std::size_t c = 0; c < classes; ++c) sum += p.probs[s * classes + c] = g(rng);
      for (std::size_t c = 0; c < classes; ++c) p.probs[s * classes + c] /= sum;
    }
    f.set.models.push_back(std::move(p));
  }
  for (std::size_t s = 0; s < samples; ++s) f.truth.push_back(static_cast<int>(rng() % classes));
  return f;
}

void BM_VoteAll(benchmark::State& state) {
  const VoteFixture f = vote_fixture(7, 4, static_cast<std::size_t>(state.range(0)));
  const mek::WeightVector w{{2, 1, 4, 6, 3, 7, 5}};
  for (auto _ : state) benchmark::DoNotOptimize(mek::vote_all(f.set, w, f.truth));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_VoteAll)->Arg(1311)->Arg(920);

void BM_OptimizeExhaustive(benchmark::State& state) {
  const VoteFixture f = vote_fixture(3, 4, 1311);
  mek::OptimizeOptions opt;
  opt.grid_max = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mek::optimize_weights(f.set, f.truth, opt));
}
BENCHMARK(BM_OptimizeExhaustive)->Arg(3)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_OptimizeHillClimb(benchmark::State& state) {
  const VoteFixture f = vote_fixture(7, 4, 1311);
  mek::OptimizeOptions opt;
  opt.budget = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mek::optimize_weights(f.set, f.truth, opt));
}
BENCHMARK(BM_OptimizeHillClimb)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);

void BM_Canny(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const mek::GrayImage img = noise_image(n, n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(mek::canny(img));
}
BENCHMARK(BM_Canny)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_EdgePipeline(benchmark::State& state) {
  const mek::GrayImage img = noise_image(512, 512, 4);
  for (auto _ : state) benchmark::DoNotOptimize(mek::edge_pipeline(img));
}
BENCHMARK(BM_EdgePipeline)->Unit(benchmark::kMillisecond);

void BM_Bcet(benchmark::State& state) {
  const mek::GrayImage img = noise_image(512, 512, 5);
  for (auto _ : state) benchmark::DoNotOptimize(mek::bcet(img));
}
BENCHMARK(BM_Bcet)->Unit(benchmark::kMillisecond);

void BM_Hog(benchmark::State& state) {
  const mek::GrayImage img = noise_image(512, 512, 6);
  mek::HogParams p;
  p.resize_to = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mek::hog(img, p));
}
BENCHMARK(BM_Hog)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_KnnPredict(benchmark::State& state) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  mek::LabeledDataset d;
  d.dim = 8100;
  d.class_names = {"a", "b", "c", "d"};
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  for (std::size_t i = 0; i < n * d.dim; ++i) d.features.push_back(u(rng));
  for (std::size_t i = 0; i < n; ++i) d.labels.push_back(static_cast<int>(i % 4));
  const mek::KnnModel model = mek::knn_fit(d, 3, mek::DistanceMetric{});
  std::vector<double> q(d.dim);
  for (auto& v : q) v = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(mek::knn_predict(model, q));
}
BENCHMARK(BM_KnnPredict)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
