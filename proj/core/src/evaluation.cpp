#include "mek/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "mek/error.hpp"

namespace mek {
namespace {

double two_decimals(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t c = 0; c < classes; ++c) t += at(c, c);
  return t;
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted, std::size_t classes,
                          std::vector<std::string> class_names) {
  if (truth.size() != predicted.size())
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(truth.size()) + " labels vs " + std::to_string(predicted.size()) + " predictions");
  if (classes == 0) throw Error(ErrorCode::InvalidArgument, "class count must be positive");
  if (class_names.empty()) {
    for (std::size_t c = 0; c < classes; ++c) class_names.push_back(std::to_string(c));
  } else if (class_names.size() != classes) {
    throw Error(ErrorCode::InvalidArgument, "class name count differs from class count");
  }
  ConfusionMatrix cm{classes, std::vector<std::uint64_t>(classes * classes, 0), std::move(class_names)};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i];
    const int p = predicted[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= classes || static_cast<std::size_t>(p) >= classes)
      throw Error(ErrorCode::LabelOutOfRange, "sample " + std::to_string(i) + " has label outside [0, " +
                                                  std::to_string(classes) + ")");
    ++cm.counts[static_cast<std::size_t>(t) * classes + static_cast<std::size_t>(p)];
  }
  return cm;
}

EvaluationReport report(const ConfusionMatrix& cm) {
  EvaluationReport rep;
  rep.total = cm.total();
  if (rep.total == 0) throw Error(ErrorCode::EmptyMatrix, "confusion matrix has no samples");
  const std::size_t C = cm.classes;
  if (cm.counts.size() != C * C) throw Error(ErrorCode::InvalidArgument, "confusion counts do not form a C x C matrix");
  if (!cm.class_names.empty() && cm.class_names.size() != C)
    throw Error(ErrorCode::InvalidArgument, "class name count differs from class count");
  rep.matrix = cm;
  if (rep.matrix.class_names.empty())
    for (std::size_t c = 0; c < C; ++c) rep.matrix.class_names.push_back(std::to_string(c));
  for (std::size_t c = 0; c < C; ++c) {
    std::uint64_t row = 0;
    std::uint64_t col = 0;
    for (std::size_t k = 0; k < C; ++k) {
      row += cm.at(c, k);
      col += cm.at(k, c);
    }
    const auto tp = static_cast<double>(cm.at(c, c));
    ClassMetrics m;
    m.name = rep.matrix.class_names[c];
    m.support = row;
    m.precision_undefined = col == 0;
    m.recall_undefined = row == 0;
    m.precision = col == 0 ? 0.0 : tp / static_cast<double>(col);
    m.recall = row == 0 ? 0.0 : tp / static_cast<double>(row);
    m.f1 = (m.precision + m.recall) == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    if (m.precision_undefined) rep.warnings.push_back("precision undefined for class '" + m.name + "' (no predictions)");
    if (m.recall_undefined) rep.warnings.push_back("recall undefined for class '" + m.name + "' (no samples)");
    rep.macro_precision += m.precision;
    rep.macro_recall += m.recall;
    rep.macro_f1 += m.f1;
    rep.classes.push_back(std::move(m));
  }
  rep.macro_precision /= static_cast<double>(C);
  rep.macro_recall /= static_cast<double>(C);
  rep.macro_f1 /= static_cast<double>(C);
  rep.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(rep.total);
  return rep;
}

nlohmann::json to_json(const ConfusionMatrix& cm) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t t = 0; t < cm.classes; ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t p = 0; p < cm.classes; ++p) row.push_back(cm.at(t, p));
    rows.push_back(std::move(row));
  }
  return {{"class_names", cm.class_names}, {"rows", "true class"}, {"columns", "predicted class"}, {"counts", rows}};
}

nlohmann::json to_json(const EvaluationReport& rep) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& m : rep.classes) {
    classes.push_back({{"class", m.name},
                       {"precision", m.precision},
                       {"recall", m.recall},
                       {"f1", m.f1},
                       {"support", m.support},
                       {"precision_2dp", two_decimals(m.precision)},
                       {"recall_2dp", two_decimals(m.recall)},
                       {"f1_2dp", two_decimals(m.f1)},
                       {"precision_undefined", m.precision_undefined},
                       {"recall_undefined", m.recall_undefined}});
  }
  return {{"accuracy", rep.accuracy},
          {"accuracy_percent_2dp", two_decimals(rep.accuracy * 100.0)},
          {"total", rep.total},
          {"macro_avg", {{"precision", rep.macro_precision}, {"recall", rep.macro_recall}, {"f1", rep.macro_f1}}},
          {"classes", classes},
          {"confusion_matrix", to_json(rep.matrix)},
          {"warnings", rep.warnings}};
}

std::string to_text(const EvaluationReport& rep) {
  std::size_t width = 8;
  for (const auto& m : rep.classes) width = std::max(width, m.name.size() + 2);
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-*s%8s%8s%8s%8s\n", static_cast<int>(width), "class", "P", "R", "F1", "#");
  out << buf;
  for (const auto& m : rep.classes) {
    std::snprintf(buf, sizeof buf, "%-*s%8.2f%8.2f%8.2f%8llu\n", static_cast<int>(width), m.name.c_str(), m.precision,
                  m.recall, m.f1, static_cast<unsigned long long>(m.support));
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "%-*s%8.2f%8.2f%8.2f%8llu\n", static_cast<int>(width), "macro", rep.macro_precision,
                rep.macro_recall, rep.macro_f1, static_cast<unsigned long long>(rep.total));
  out << buf;
  std::snprintf(buf, sizeof buf, "accuracy %.2f%%\n", rep.accuracy * 100.0);
  out << buf;
  return out.str();
}

}  // namespace mek
