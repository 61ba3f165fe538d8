#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mek/evaluation.hpp"

namespace mek {

/// One model's per-sample class confidences, row-major n x C.
struct ModelPredictions {
  std::string model_name;
  std::optional<double> accuracy;  ///< individual accuracy used by the ranking scenarios
  std::size_t classes = 0;
  std::vector<double> probs;

  std::size_t samples() const noexcept { return classes == 0 ? 0 : probs.size() / classes; }
  std::span<const double> row(std::size_t s) const { return {probs.data() + s * classes, classes}; }
};

struct PredictionSet {
  std::vector<ModelPredictions> models;
  std::vector<std::string> sample_ids;
  std::vector<std::string> class_names;

  std::size_t model_count() const noexcept { return models.size(); }
  std::size_t samples() const noexcept { return sample_ids.size(); }
  std::size_t classes() const noexcept { return class_names.size(); }
  /// Checks shared shapes, unique names and the probability row invariants.
  void validate() const;
};

/// One non-negative integer vote weight per model.
struct WeightVector {
  std::vector<int> values;

  std::size_t size() const noexcept { return values.size(); }
  bool operator==(const WeightVector&) const = default;
  auto operator<=>(const WeightVector&) const = default;

  static WeightVector parse(const std::string& csv);
  std::string to_string() const;
};

struct ScenarioResult {
  WeightVector weights;
  std::vector<int> predicted;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::optional<EvaluationReport> report;
};

/// argmax over classes of sum_i w_i * p_{i,c}; equal scores resolve to the
/// lowest class index.
int weighted_vote(std::span<const std::span<const double>> model_probs, const WeightVector& weights);

/// Votes every sample. With ground truth the accuracy and report are filled.
ScenarioResult vote_all(const PredictionSet& set, const WeightVector& weights,
                        std::span<const int> truth = {});

WeightVector scenario_uniform(std::size_t models);
/// Best individual accuracy gets m, the worst gets 1; ties keep list order.
WeightVector scenario_incremental(const PredictionSet& set);
/// Best individual accuracy gets 2, every other model 1.
WeightVector scenario_highest(const PredictionSet& set);

/// Divides by the gcd of the entries.
WeightVector canonicalize_weights(const WeightVector& weights);

/// Number of weight vectors in [0, grid_max]^m whose gcd is 1.
std::uint64_t canonical_grid_size(std::size_t models, int grid_max);

struct OptimizeOptions {
  int grid_max = 10;
  std::size_t top_k = 3;
  std::uint64_t budget = 2'000'000;  ///< evaluations before switching to hill climbing
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct OptimizeResult {
  bool exhaustive = false;
  std::uint64_t evaluations = 0;
  std::vector<ScenarioResult> top;  ///< accuracy descending, then lexicographically smallest vector
};

/// Integer weight search over [0, grid_max]^m without the zero vector.
/// Enumerates every canonical vector when they fit in the budget; otherwise
/// seeds with all one-hot vectors and the uniform vector, then runs seeded
/// multi-restart hill climbing with +-1 coordinate steps.
OptimizeResult optimize_weights(const PredictionSet& set, std::span<const int> truth, const OptimizeOptions& options);

}  // namespace mek
