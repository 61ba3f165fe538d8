#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mek/ensemble.hpp"

namespace mek::testing {

struct FixtureSpec {
  std::string name;
  double accuracy;  ///< recorded accuracy; the argmax hits round(accuracy * n) samples
};

struct AccuracyFixture {
  PredictionSet set;
  std::vector<int> truth;
  std::vector<std::size_t> correct;  ///< per model
};

/// Prediction set whose models are right on a prescribed number of samples.
/// Correct rows peak at the true class, wrong rows at another class.
inline AccuracyFixture make_accuracy_fixture(const std::vector<FixtureSpec>& models,
                                             const std::vector<std::string>& classes, std::size_t n,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AccuracyFixture fx;
  const std::size_t C = classes.size();
  fx.set.class_names = classes;
  for (std::size_t s = 0; s < n; ++s) {
    fx.set.sample_ids.push_back("img_" + std::to_string(s));
    fx.truth.push_back(static_cast<int>(s % C));
  }
  std::shuffle(fx.truth.begin(), fx.truth.end(), rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& spec : models) {
    const auto hits = static_cast<std::size_t>(std::llround(spec.accuracy * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> right(n, false);
    for (std::size_t i = 0; i < hits; ++i) right[order[i]] = true;

    ModelPredictions mp;
    mp.model_name = spec.name;
    mp.accuracy = spec.accuracy;
    mp.classes = C;
    for (std::size_t s = 0; s < n; ++s) {
      std::size_t peak = static_cast<std::size_t>(fx.truth[s]);
      if (!right[s]) peak = (peak + 1 + rng() % (C - 1)) % C;
      // peak mass in (0.5, 0.95], the rest spread unevenly
      const double top = 0.5 + 0.45 * (1.0 - u(rng));
      std::vector<double> rest(C - 1);
      double total = 0.0;
      for (auto& r : rest) total += (r = 0.05 + u(rng));
      std::vector<double> row(C);
      for (std::size_t c = 0, j = 0; c < C; ++c) row[c] = c == peak ? top : (1.0 - top) * rest[j++] / total;
      mp.probs.insert(mp.probs.end(), row.begin(), row.end());
    }
    fx.correct.push_back(hits);
    fx.set.models.push_back(std::move(mp));
  }
  return fx;
}

inline std::vector<FixtureSpec> kaggle_table_models() {
  return {{"KNN", 0.9794},      {"SVM", 0.9603},         {"ResNet50", 0.9878}, {"Xception", 0.9946},
          {"CNN-MRI", 0.9832}, {"DenseNet121", 0.9960}, {"ResNet101", 0.9908}};
}

inline std::vector<std::string> tumor_classes() { return {"glioma", "meningioma", "no_tumor", "pituitary"}; }

}  // namespace mek::testing
