#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mek {

/// Row-major n x d feature matrix with one class index per row.
struct LabeledDataset {
  std::size_t dim = 0;
  std::vector<double> features;
  std::vector<int> labels;
  std::vector<std::string> class_names;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return {features.data() + i * dim, dim}; }
  void validate() const;
};

struct DistanceMetric {
  enum class Kind { Euclidean, Manhattan, Minkowski, Chebyshev };
  Kind kind = Kind::Euclidean;
  double p = 3.0;  ///< Minkowski exponent

  static DistanceMetric parse(std::string_view name, double p = 3.0);
  std::string name() const;
  void validate() const;
};

/// The four metrics in grid-search order.
std::vector<DistanceMetric> standard_metrics(double minkowski_p = 3.0);

double distance(const DistanceMetric& metric, std::span<const double> a, std::span<const double> b);

struct KnnModel {
  LabeledDataset train;
  int k = 3;
  DistanceMetric metric;
};

KnnModel knn_fit(LabeledDataset data, int k, const DistanceMetric& metric);

/// Indices of the k nearest training rows, nearest first; equal distances
/// keep the lower training index first.
std::vector<std::size_t> knn_neighbors(const KnnModel& model, std::span<const double> x);

/// Fraction of the k neighbours carrying each class.
std::vector<double> knn_predict_proba(const KnnModel& model, std::span<const double> x);

/// Majority class; ties go to the smallest summed neighbour distance, then the
/// lowest class index.
int knn_predict(const KnnModel& model, std::span<const double> x);

struct KnnGridEntry {
  int k = 0;
  DistanceMetric metric;
  double accuracy = 0.0;
};

struct KnnGridResult {
  KnnGridEntry best;
  std::vector<KnnGridEntry> table;  ///< metric-major, k ascending
};

/// Held-out accuracy for every (k, metric) with k in [1, k_max]. Ties prefer
/// the smaller k, then the earlier metric in `metrics`.
KnnGridResult knn_grid_search(const LabeledDataset& train, const LabeledDataset& validation, int k_max,
                              const std::vector<DistanceMetric>& metrics, unsigned threads = 1);

struct KernelSpec {
  enum class Kind { Linear, Rbf, Polynomial, Sigmoid, ChiSquare, Laplacian, Gaussian };
  Kind kind = Kind::Linear;
  double gamma = 0.0;  ///< <= 0 selects 1 / dim at training time
  int degree = 3;
  double coef0 = 0.0;
  double sigma = 1.0;

  static KernelSpec parse(std::string_view name);
  std::string name() const;
  /// Copy with an automatic gamma replaced by 1 / dim.
  KernelSpec resolved(std::size_t dim) const;
  void validate() const;
};

double kernel_eval(const KernelSpec& spec, std::span<const double> a, std::span<const double> b);

struct SvmParams {
  KernelSpec kernel;
  double C = 1.0;
  double tol = 1e-3;
  int max_passes = 10;
  std::uint64_t seed = 0;
  int max_sweeps = 2000;  ///< hard cap on full passes over the data per binary problem
  std::size_t cache_bytes = std::size_t{256} << 20;
  unsigned threads = 1;
};

/// One-vs-rest kernel SVM. Support vectors are shared by all binary problems;
/// coef[c][s] = alpha_s * y_s for class c.
struct SvmModel {
  KernelSpec kernel;  ///< resolved
  double C = 1.0;
  std::size_t dim = 0;
  std::vector<std::string> class_names;
  std::vector<double> support_vectors;  ///< row-major n_sv x dim
  std::vector<std::vector<double>> coef;
  std::vector<double> bias;

  std::size_t support_count() const noexcept { return dim == 0 ? 0 : support_vectors.size() / dim; }
};

SvmModel svm_train(const LabeledDataset& data, const SvmParams& params = {});

std::vector<double> svm_decision_values(const SvmModel& model, std::span<const double> x);

/// Softmax over the one-vs-rest decision values.
std::vector<double> svm_predict_proba(const SvmModel& model, std::span<const double> x);

std::vector<double> softmax(std::span<const double> values);

}  // namespace mek
