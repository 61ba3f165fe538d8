#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mek {

/// counts(t, p): samples of true class t predicted as p.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::uint64_t> counts;
  std::vector<std::string> class_names;

  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts[truth * classes + predicted]; }
  std::uint64_t total() const;
  std::uint64_t trace() const;
};

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted, std::size_t classes,
                          std::vector<std::string> class_names = {});

struct ClassMetrics {
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
  bool precision_undefined = false;  ///< no predictions of this class
  bool recall_undefined = false;     ///< no samples of this class
};

struct EvaluationReport {
  std::vector<ClassMetrics> classes;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::uint64_t total = 0;
  ConfusionMatrix matrix;
  std::vector<std::string> warnings;
};

/// Zero denominators yield a metric of 0 and a warning rather than an error.
EvaluationReport report(const ConfusionMatrix& cm);

nlohmann::json to_json(const ConfusionMatrix& cm);
nlohmann::json to_json(const EvaluationReport& rep);

/// Aligned table in the P / R / F1 / # layout with two-decimal rounding.
std::string to_text(const EvaluationReport& rep);

}  // namespace mek
