#include "mek/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <numeric>
#include <random>
#include <unordered_map>

#include "mek/error.hpp"
#include "mek/parallel.hpp"

namespace mek {
namespace {

void check_dims(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::DimensionMismatch,
                "vectors of length " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
}

int count_classes_present(const LabeledDataset& data) {
  std::vector<bool> seen(data.class_names.size(), false);
  for (int l : data.labels) seen[static_cast<std::size_t>(l)] = true;
  return static_cast<int>(std::count(seen.begin(), seen.end(), true));
}

// Lazily computed kernel rows with least-recently-used eviction.
class KernelRowCache {
 public:
  KernelRowCache(const LabeledDataset& data, const KernelSpec& kernel, std::size_t budget_bytes, unsigned threads)
      : data_(data), kernel_(kernel), threads_(threads) {
    const std::size_t n = data.size();
    capacity_ = std::max<std::size_t>(2, budget_bytes / std::max<std::size_t>(1, n * sizeof(double)));
    diag_.resize(n);
    for (std::size_t i = 0; i < n; ++i) diag_[i] = kernel_eval(kernel_, data.row(i), data.row(i));
  }

  double diag(std::size_t i) const { return diag_[i]; }

  const std::vector<double>& row(std::size_t i) {
    if (auto it = index_.find(i); it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second;
    }
    if (lru_.size() >= capacity_) {
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
    std::vector<double> values(data_.size());
    const auto xi = data_.row(i);
    const unsigned workers = data_.size() >= 2048 ? threads_ : 1;
    parallel_for(data_.size(), workers, [&](std::size_t j) { values[j] = kernel_eval(kernel_, xi, data_.row(j)); });
    lru_.emplace_front(i, std::move(values));
    index_[i] = lru_.begin();
    return lru_.front().second;
  }

 private:
  using Entry = std::pair<std::size_t, std::vector<double>>;
  const LabeledDataset& data_;
  KernelSpec kernel_;
  unsigned threads_;
  std::size_t capacity_ = 2;
  std::vector<double> diag_;
  std::list<Entry> lru_;
  std::unordered_map<std::size_t, std::list<Entry>::iterator> index_;
};

struct BinarySolution {
  std::vector<double> alpha;
  double bias = 0.0;
};

// Simplified SMO: sweep over violators of the KKT conditions, pair each with a
// random partner, stop after max_passes consecutive sweeps without change.
BinarySolution smo_binary(const std::vector<double>& y, KernelRowCache& cache, const SvmParams& params,
                          std::uint64_t seed) {
  const std::size_t n = y.size();
  BinarySolution sol{std::vector<double>(n, 0.0), 0.0};
  std::vector<double> g(n, 0.0);  // sum_l alpha_l y_l K(l, k), bias excluded
  std::mt19937_64 rng(seed);
  const double C = params.C;
  const double tol = params.tol;
  auto& alpha = sol.alpha;
  double& b = sol.bias;

  int passes = 0;
  for (int sweep = 0; passes < params.max_passes && sweep < params.max_sweeps; ++sweep) {
    int changed = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double Ei = g[i] + b - y[i];
      const bool violates = (y[i] * Ei < -tol && alpha[i] < C) || (y[i] * Ei > tol && alpha[i] > 0.0);
      if (!violates) continue;
      std::size_t j = static_cast<std::size_t>(rng() % (n - 1));
      if (j >= i) ++j;
      const double Ej = g[j] + b - y[j];
      const double ai_old = alpha[i];
      const double aj_old = alpha[j];
      double L, H;
      if (y[i] != y[j]) {
        L = std::max(0.0, aj_old - ai_old);
        H = std::min(C, C + aj_old - ai_old);
      } else {
        L = std::max(0.0, ai_old + aj_old - C);
        H = std::min(C, ai_old + aj_old);
      }
      if (L >= H) continue;
      const std::vector<double>& Ki = cache.row(i);
      const double Kij = Ki[j];
      const double eta = 2.0 * Kij - cache.diag(i) - cache.diag(j);
      if (eta >= 0.0) continue;
      double aj = std::clamp(aj_old - y[j] * (Ei - Ej) / eta, L, H);
      if (std::abs(aj - aj_old) < 1e-5) continue;
      double ai = std::clamp(ai_old + y[i] * y[j] * (aj_old - aj), 0.0, C);
      const double di = ai - ai_old;
      const double dj = aj - aj_old;
      const double b1 = b - Ei - y[i] * di * cache.diag(i) - y[j] * dj * Kij;
      const double b2 = b - Ej - y[i] * di * Kij - y[j] * dj * cache.diag(j);
      if (ai > 0.0 && ai < C) {
        b = b1;
      } else if (aj > 0.0 && aj < C) {
        b = b2;
      } else {
        b = 0.5 * (b1 + b2);
      }
      alpha[i] = ai;
      alpha[j] = aj;
      // Ki may be evicted by fetching row j, so copy the coefficients first.
      const double wi = y[i] * di;
      const double wj = y[j] * dj;
      for (std::size_t k = 0; k < n; ++k) g[k] += wi * cache.row(i)[k];
      const std::vector<double>& Kj = cache.row(j);
      for (std::size_t k = 0; k < n; ++k) g[k] += wj * Kj[k];
      ++changed;
    }
    passes = changed == 0 ? passes + 1 : 0;
  }
  return sol;
}

}  // namespace

void LabeledDataset::validate() const {
  if (labels.empty()) throw Error(ErrorCode::InvalidArgument, "dataset is empty");
  if (dim == 0) throw Error(ErrorCode::InvalidArgument, "dataset has zero-dimensional features");
  if (features.size() != labels.size() * dim)
    throw Error(ErrorCode::DimensionMismatch, "feature matrix does not match n x d");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= class_names.size())
      throw Error(ErrorCode::LabelOutOfRange, "row " + std::to_string(i) + " has label " + std::to_string(labels[i]));
  }
}

DistanceMetric DistanceMetric::parse(std::string_view name, double p) {
  DistanceMetric m;
  m.p = p;
  if (name == "euclidean") {
    m.kind = Kind::Euclidean;
  } else if (name == "manhattan") {
    m.kind = Kind::Manhattan;
  } else if (name == "minkowski") {
    m.kind = Kind::Minkowski;
  } else if (name == "chebyshev") {
    m.kind = Kind::Chebyshev;
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown metric '" + std::string(name) + "'");
  }
  m.validate();
  return m;
}

std::string DistanceMetric::name() const {
  switch (kind) {
    case Kind::Euclidean: return "euclidean";
    case Kind::Manhattan: return "manhattan";
    case Kind::Minkowski: return "minkowski";
    case Kind::Chebyshev: return "chebyshev";
  }
  return "unknown";
}

void DistanceMetric::validate() const {
  if (kind == Kind::Minkowski && !(std::isfinite(p) && p > 0.0))
    throw Error(ErrorCode::InvalidArgument, "minkowski p must be finite and positive");
}

std::vector<DistanceMetric> standard_metrics(double minkowski_p) {
  return {{DistanceMetric::Kind::Euclidean, minkowski_p},
          {DistanceMetric::Kind::Manhattan, minkowski_p},
          {DistanceMetric::Kind::Minkowski, minkowski_p},
          {DistanceMetric::Kind::Chebyshev, minkowski_p}};
}

double distance(const DistanceMetric& metric, std::span<const double> a, std::span<const double> b) {
  check_dims(a, b);
  double acc = 0.0;
  switch (metric.kind) {
    case DistanceMetric::Kind::Euclidean:
      for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
      return std::sqrt(acc);
    case DistanceMetric::Kind::Manhattan:
      for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
      return acc;
    case DistanceMetric::Kind::Minkowski:
      for (std::size_t i = 0; i < a.size(); ++i) acc += std::pow(std::abs(a[i] - b[i]), metric.p);
      return std::pow(acc, 1.0 / metric.p);
    case DistanceMetric::Kind::Chebyshev:
      for (std::size_t i = 0; i < a.size(); ++i) acc = std::max(acc, std::abs(a[i] - b[i]));
      return acc;
  }
  return acc;
}

KnnModel knn_fit(LabeledDataset data, int k, const DistanceMetric& metric) {
  data.validate();
  metric.validate();
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  if (static_cast<std::size_t>(k) > data.size())
    throw Error(ErrorCode::KTooLarge, "k=" + std::to_string(k) + " exceeds " + std::to_string(data.size()) + " samples");
  return KnnModel{std::move(data), k, metric};
}

namespace {

std::vector<std::pair<double, std::size_t>> sorted_distances(const LabeledDataset& train, const DistanceMetric& metric,
                                                             std::span<const double> x, std::size_t keep) {
  if (x.size() != train.dim)
    throw Error(ErrorCode::DimensionMismatch,
                "query has " + std::to_string(x.size()) + " features, model expects " + std::to_string(train.dim));
  std::vector<std::pair<double, std::size_t>> d(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) d[i] = {distance(metric, train.row(i), x), i};
  keep = std::min(keep, d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(keep), d.end());
  d.resize(keep);
  return d;
}

int vote_neighbors(const LabeledDataset& train, const std::vector<std::pair<double, std::size_t>>& nearest,
                   std::size_t k) {
  const std::size_t C = train.class_names.size();
  std::vector<std::size_t> counts(C, 0);
  std::vector<double> dist_sum(C, 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    const auto c = static_cast<std::size_t>(train.labels[nearest[r].second]);
    ++counts[c];
    dist_sum[c] += nearest[r].first;
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < C; ++c) {
    if (counts[c] > counts[best] || (counts[c] == counts[best] && dist_sum[c] < dist_sum[best])) best = c;
  }
  return static_cast<int>(best);
}

}  // namespace

std::vector<std::size_t> knn_neighbors(const KnnModel& model, std::span<const double> x) {
  const auto nearest = sorted_distances(model.train, model.metric, x, static_cast<std::size_t>(model.k));
  std::vector<std::size_t> out;
  out.reserve(nearest.size());
  for (const auto& [d, i] : nearest) out.push_back(i);
  return out;
}

std::vector<double> knn_predict_proba(const KnnModel& model, std::span<const double> x) {
  std::vector<double> proba(model.train.class_names.size(), 0.0);
  for (std::size_t i : knn_neighbors(model, x)) proba[static_cast<std::size_t>(model.train.labels[i])] += 1.0;
  for (double& p : proba) p /= model.k;
  return proba;
}

int knn_predict(const KnnModel& model, std::span<const double> x) {
  const auto nearest = sorted_distances(model.train, model.metric, x, static_cast<std::size_t>(model.k));
  return vote_neighbors(model.train, nearest, nearest.size());
}

KnnGridResult knn_grid_search(const LabeledDataset& train, const LabeledDataset& validation, int k_max,
                              const std::vector<DistanceMetric>& metrics, unsigned threads) {
  train.validate();
  validation.validate();
  if (validation.dim != train.dim) throw Error(ErrorCode::DimensionMismatch, "train/validation feature widths differ");
  if (k_max < 1) throw Error(ErrorCode::InvalidArgument, "k_max must be at least 1");
  if (static_cast<std::size_t>(k_max) > train.size())
    throw Error(ErrorCode::KTooLarge, "k_max exceeds the training set size");
  if (metrics.empty()) throw Error(ErrorCode::InvalidArgument, "no metrics to search");

  const std::size_t nv = validation.size();
  const std::size_t nk = static_cast<std::size_t>(k_max);
  KnnGridResult result;
  for (const DistanceMetric& metric : metrics) {
    metric.validate();
    // correct[s * nk + (k - 1)] for validation sample s
    std::vector<std::uint8_t> correct(nv * nk, 0);
    parallel_for(nv, threads, [&](std::size_t s) {
      const auto nearest = sorted_distances(train, metric, validation.row(s), nk);
      for (std::size_t k = 1; k <= nk; ++k)
        correct[s * nk + k - 1] = vote_neighbors(train, nearest, k) == validation.labels[s] ? 1 : 0;
    });
    for (std::size_t k = 1; k <= nk; ++k) {
      std::size_t hits = 0;
      for (std::size_t s = 0; s < nv; ++s) hits += correct[s * nk + k - 1];
      result.table.push_back({static_cast<int>(k), metric, static_cast<double>(hits) / static_cast<double>(nv)});
    }
  }
  // Scan in (k, metric-order) so the first maximum found honours the tie rule.
  const std::size_t nm = metrics.size();
  const KnnGridEntry* best = nullptr;
  for (std::size_t k = 0; k < nk; ++k) {
    for (std::size_t m = 0; m < nm; ++m) {
      const KnnGridEntry& e = result.table[m * nk + k];
      if (best == nullptr || e.accuracy > best->accuracy) best = &e;
    }
  }
  result.best = *best;
  return result;
}

KernelSpec KernelSpec::parse(std::string_view name) {
  KernelSpec s;
  if (name == "linear") {
    s.kind = Kind::Linear;
  } else if (name == "rbf") {
    s.kind = Kind::Rbf;
  } else if (name == "polynomial" || name == "poly") {
    s.kind = Kind::Polynomial;
  } else if (name == "sigmoid") {
    s.kind = Kind::Sigmoid;
  } else if (name == "chi_square" || name == "chi2") {
    s.kind = Kind::ChiSquare;
  } else if (name == "laplacian") {
    s.kind = Kind::Laplacian;
  } else if (name == "gaussian") {
    s.kind = Kind::Gaussian;
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown kernel '" + std::string(name) + "'");
  }
  return s;
}

std::string KernelSpec::name() const {
  switch (kind) {
    case Kind::Linear: return "linear";
    case Kind::Rbf: return "rbf";
    case Kind::Polynomial: return "polynomial";
    case Kind::Sigmoid: return "sigmoid";
    case Kind::ChiSquare: return "chi_square";
    case Kind::Laplacian: return "laplacian";
    case Kind::Gaussian: return "gaussian";
  }
  return "unknown";
}

KernelSpec KernelSpec::resolved(std::size_t dim) const {
  KernelSpec s = *this;
  if (s.gamma <= 0.0 && dim > 0) s.gamma = 1.0 / static_cast<double>(dim);
  return s;
}

void KernelSpec::validate() const {
  const bool uses_gamma = kind == Kind::Rbf || kind == Kind::Polynomial || kind == Kind::Sigmoid ||
                          kind == Kind::ChiSquare || kind == Kind::Laplacian;
  if (uses_gamma && !(gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "kernel gamma must be positive");
  if (kind == Kind::Polynomial && degree < 1) throw Error(ErrorCode::InvalidArgument, "polynomial degree must be >= 1");
  if (kind == Kind::Gaussian && !(sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "gaussian sigma must be positive");
}

double kernel_eval(const KernelSpec& spec, std::span<const double> a, std::span<const double> b) {
  check_dims(a, b);
  const std::size_t d = a.size();
  auto dot = [&] {
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) acc += a[i] * b[i];
    return acc;
  };
  auto sq_dist = [&] {
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc;
  };
  switch (spec.kind) {
    case KernelSpec::Kind::Linear:
      return dot();
    case KernelSpec::Kind::Polynomial:
      return std::pow(spec.gamma * dot() + spec.coef0, spec.degree);
    case KernelSpec::Kind::Rbf:
      return std::exp(-spec.gamma * sq_dist());
    case KernelSpec::Kind::Gaussian:
      return std::exp(-sq_dist() / (2.0 * spec.sigma * spec.sigma));
    case KernelSpec::Kind::Sigmoid:
      return std::tanh(spec.gamma * dot() + spec.coef0);
    case KernelSpec::Kind::Laplacian: {
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) acc += std::abs(a[i] - b[i]);
      return std::exp(-spec.gamma * acc);
    }
    case KernelSpec::Kind::ChiSquare: {
      constexpr double kEps = 1e-10;
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        if (a[i] < 0.0 || b[i] < 0.0) throw Error(ErrorCode::NegativeFeature, "chi-square kernel needs non-negative features");
        const double diff = a[i] - b[i];
        acc += diff * diff / (a[i] + b[i] + kEps);
      }
      return std::exp(-spec.gamma * acc);
    }
  }
  return 0.0;
}

SvmModel svm_train(const LabeledDataset& data, const SvmParams& params) {
  data.validate();
  if (!(params.C > 0.0)) throw Error(ErrorCode::InvalidArgument, "C must be positive");
  if (!(params.tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tol must be positive");
  if (params.max_passes < 1) throw Error(ErrorCode::InvalidArgument, "max_passes must be positive");
  if (count_classes_present(data) < 2)
    throw Error(ErrorCode::SingleClassDataset, "SVM training needs at least two classes");

  const KernelSpec kernel = params.kernel.resolved(data.dim);
  kernel.validate();
  KernelRowCache cache(data, kernel, params.cache_bytes, params.threads);

  const std::size_t n = data.size();
  const std::size_t C = data.class_names.size();
  std::vector<BinarySolution> solutions;
  solutions.reserve(C);
  for (std::size_t c = 0; c < C; ++c) {
    std::vector<double> y(n);
    bool any_positive = false;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<std::size_t>(data.labels[i]) == c ? 1.0 : -1.0;
      any_positive = any_positive || y[i] > 0.0;
    }
    if (!any_positive) {
      // Class absent from training: constant negative decision.
      solutions.push_back({std::vector<double>(n, 0.0), -1.0});
      continue;
    }
    solutions.push_back(smo_binary(y, cache, params, params.seed + c));
  }

  SvmModel model;
  model.kernel = kernel;
  model.C = params.C;
  model.dim = data.dim;
  model.class_names = data.class_names;
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < n; ++i) {
    const bool used = std::any_of(solutions.begin(), solutions.end(), [&](const auto& s) { return s.alpha[i] > 0.0; });
    if (used) support.push_back(i);
  }
  for (std::size_t i : support) {
    const auto r = data.row(i);
    model.support_vectors.insert(model.support_vectors.end(), r.begin(), r.end());
  }
  model.coef.assign(C, std::vector<double>(support.size(), 0.0));
  model.bias.resize(C);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t s = 0; s < support.size(); ++s) {
      const std::size_t i = support[s];
      const double y = static_cast<std::size_t>(data.labels[i]) == c ? 1.0 : -1.0;
      model.coef[c][s] = solutions[c].alpha[i] * y;
    }
    model.bias[c] = solutions[c].bias;
  }
  return model;
}

std::vector<double> svm_decision_values(const SvmModel& model, std::span<const double> x) {
  if (x.size() != model.dim)
    throw Error(ErrorCode::DimensionMismatch,
                "query has " + std::to_string(x.size()) + " features, model expects " + std::to_string(model.dim));
  const std::size_t ns = model.support_count();
  std::vector<double> k(ns);
  for (std::size_t s = 0; s < ns; ++s)
    k[s] = kernel_eval(model.kernel, {model.support_vectors.data() + s * model.dim, model.dim}, x);
  std::vector<double> decision(model.bias);
  for (std::size_t c = 0; c < decision.size(); ++c)
    for (std::size_t s = 0; s < ns; ++s) decision[c] += model.coef[c][s] * k[s];
  return decision;
}

std::vector<double> svm_predict_proba(const SvmModel& model, std::span<const double> x) {
  const std::vector<double> d = svm_decision_values(model, x);
  return softmax(d);
}

std::vector<double> softmax(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  if (out.empty()) return out;
  const double peak = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (double& v : out) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : out) v /= total;
  return out;
}

}  // namespace mek
