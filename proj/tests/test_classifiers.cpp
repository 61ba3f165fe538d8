#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mek/classifiers.hpp"
#include "mek/error.hpp"

using namespace mek;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected mek::Error");
  return ErrorCode::InvalidArgument;
}

LabeledDataset make_dataset(std::vector<std::vector<double>> rows, std::vector<int> labels, int classes) {
  LabeledDataset d;
  d.dim = rows.front().size();
  for (auto& r : rows) d.features.insert(d.features.end(), r.begin(), r.end());
  d.labels = std::move(labels);
  for (int c = 0; c < classes; ++c) d.class_names.push_back("class" + std::to_string(c));
  return d;
}

double oracle_distance(DistanceMetric::Kind kind, double p, std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::fabs(a[i] - b[i]);
    switch (kind) {
      case DistanceMetric::Kind::Euclidean: acc += d * d; break;
      case DistanceMetric::Kind::Manhattan: acc += d; break;
      case DistanceMetric::Kind::Minkowski: acc += std::pow(d, p); break;
      case DistanceMetric::Kind::Chebyshev: acc = std::max(acc, d); break;
    }
  }
  if (kind == DistanceMetric::Kind::Euclidean) return std::sqrt(acc);
  if (kind == DistanceMetric::Kind::Minkowski) return std::pow(acc, 1.0 / p);
  return acc;
}

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t d, double lo = -5.0, double hi = 5.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(d);
  for (auto& x : v) x = u(rng);
  return v;
}

double train_accuracy(const SvmModel& m, const LabeledDataset& d) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto p = svm_predict_proba(m, d.row(i));
    hits += static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()) == d.labels[i];
  }
  return static_cast<double>(hits) / d.size();
}

LabeledDataset separable_set() {
  return make_dataset({{0, 0}, {1, 0}, {0, 1}, {1, 1}, {3, 3}, {4, 3}, {3, 4}, {4, 4}}, {0, 0, 0, 0, 1, 1, 1, 1}, 2);
}

LabeledDataset xor_set() {
  return make_dataset({{0, 0}, {1, 1}, {0, 1}, {1, 0}}, {0, 0, 1, 1}, 2);
}

}  // namespace

TEST_SUITE("distance") {
  TEST_CASE("three four five") {
    const std::vector<double> a{0, 0}, b{3, 4};
    CHECK(distance(DistanceMetric::parse("euclidean"), a, b) == 5.0);
    CHECK(distance(DistanceMetric::parse("manhattan"), a, b) == 7.0);
    CHECK(distance(DistanceMetric::parse("chebyshev"), a, b) == 4.0);
    for (const auto& m : standard_metrics()) CHECK(distance(m, b, b) == 0.0);
  }

  TEST_CASE("minkowski with p = 2 is euclidean") {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 100; ++t) {
      const auto a = random_vec(rng, 8), b = random_vec(rng, 8);
      CHECK(std::fabs(distance(DistanceMetric::parse("minkowski", 2.0), a, b) -
                      distance(DistanceMetric::parse("euclidean"), a, b)) < 1e-9);
    }
  }

  TEST_CASE("symmetry and triangle inequality") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 200; ++t) {
      const auto a = random_vec(rng, 5), b = random_vec(rng, 5), c = random_vec(rng, 5);
      for (const auto& m : standard_metrics()) {
        CHECK(distance(m, a, b) == distance(m, b, a));
        CHECK(distance(m, a, c) <= distance(m, a, b) + distance(m, b, c) + 1e-9);
      }
    }
  }

  TEST_CASE("errors") {
    const std::vector<double> a{1, 2}, b{1, 2, 3};
    CHECK(code_of([&] { distance(DistanceMetric{}, a, b); }) == ErrorCode::DimensionMismatch);
    CHECK(code_of([] { DistanceMetric::parse("cosine"); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { DistanceMetric::parse("minkowski", -1.0).validate(); }) == ErrorCode::InvalidArgument);
  }
}

TEST_SUITE("knn") {
  TEST_CASE("k larger than the training set") {
    const auto d = separable_set();
    CHECK(code_of([&] { knn_fit(d, 9, DistanceMetric{}); }) == ErrorCode::KTooLarge);
    CHECK(code_of([&] { knn_fit(d, 0, DistanceMetric{}); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("k = 1 recovers training labels") {
    std::mt19937_64 rng(3);
    LabeledDataset d;
    d.dim = 3;
    d.class_names = {"a", "b", "c"};
    for (int i = 0; i < 30; ++i) {
      const auto v = random_vec(rng, 3);
      d.features.insert(d.features.end(), v.begin(), v.end());
      d.labels.push_back(i % 3);
    }
    for (const auto& metric : standard_metrics()) {
      const KnnModel m = knn_fit(d, 1, metric);
      const KnnModel again = knn_fit(d, 1, metric);
      for (std::size_t i = 0; i < d.size(); ++i) {
        const auto p = knn_predict_proba(m, d.row(i));
        CHECK(p[static_cast<std::size_t>(d.labels[i])] == 1.0);
        CHECK(knn_predict(again, d.row(i)) == d.labels[i]);
      }
    }
  }

  TEST_CASE("probabilities are neighbour fractions") {
    const auto d = make_dataset({{0}, {1}, {2}, {10}}, {0, 0, 1, 2}, 3);
    const KnnModel m = knn_fit(d, 3, DistanceMetric{});
    const std::vector<double> q{0.5};
    const auto p = knn_predict_proba(m, q);
    CHECK(p[0] == doctest::Approx(2.0 / 3.0));
    CHECK(p[1] == doctest::Approx(1.0 / 3.0));
    CHECK(p[2] == 0.0);
    CHECK(p[0] + p[1] + p[2] == 1.0);
  }

  TEST_CASE("distance ties keep the lower training index") {
    const auto d = make_dataset({{-1}, {1}, {-1}, {1}}, {0, 1, 1, 0}, 2);
    const KnnModel m = knn_fit(d, 2, DistanceMetric{});
    const std::vector<double> q{0};
    CHECK(knn_neighbors(m, q) == std::vector<std::size_t>{0, 1});
  }

  TEST_CASE("vote ties go to the smaller summed distance, then the lower class") {
    const auto d = make_dataset({{0}, {3}, {-2}}, {1, 0, 2}, 3);
    const std::vector<double> q{1};
    // neighbours at distance 1 (class 1) and 2 (class 0): tie on votes
    CHECK(knn_predict(knn_fit(d, 2, DistanceMetric{}), q) == 1);
    const auto sym = make_dataset({{0}, {2}}, {1, 0}, 2);
    CHECK(knn_predict(knn_fit(sym, 2, DistanceMetric{}), q) == 0);
  }

  TEST_CASE("dimension mismatch") {
    const KnnModel m = knn_fit(separable_set(), 1, DistanceMetric{});
    const std::vector<double> q{1, 2, 3};
    CHECK(code_of([&] { knn_predict_proba(m, q); }) == ErrorCode::DimensionMismatch);
  }

  TEST_CASE("matches an exhaustive sort") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> coord(0, 6), label(0, 2);
    LabeledDataset d;
    d.dim = 2;
    d.class_names = {"a", "b", "c"};
    for (int i = 0; i < 20; ++i) {
      d.features.push_back(coord(rng));
      d.features.push_back(coord(rng));
      d.labels.push_back(label(rng));
    }
    for (const auto& metric : standard_metrics()) {
      for (int k : {1, 3, 5}) {
        const KnnModel m = knn_fit(d, k, metric);
        for (int q = 0; q < 50; ++q) {
          const std::vector<double> x{static_cast<double>(coord(rng)) + 0.5 * (q % 2), static_cast<double>(coord(rng))};
          std::vector<std::pair<double, std::size_t>> all;
          for (std::size_t i = 0; i < d.size(); ++i) all.push_back({oracle_distance(metric.kind, metric.p, x, d.row(i)), i});
          std::sort(all.begin(), all.end());
          std::vector<std::size_t> expect;
          std::vector<double> proba(3, 0.0);
          for (int j = 0; j < k; ++j) {
            expect.push_back(all[j].second);
            proba[d.labels[all[j].second]] += 1.0;
          }
          for (auto& v : proba) v /= k;
          CHECK(knn_neighbors(m, x) == expect);
          CHECK(knn_predict_proba(m, x) == proba);
        }
      }
    }
  }

  TEST_CASE("grid search picks the best held-out configuration") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise(0.0, 1.2);
    auto sample = [&](int n) {
      LabeledDataset d;
      d.dim = 2;
      d.class_names = {"a", "b"};
      for (int i = 0; i < n; ++i) {
        const int c = i % 2;
        d.features.push_back(c * 2.0 + noise(rng));
        d.features.push_back(c * 2.0 + noise(rng));
        d.labels.push_back(c);
      }
      return d;
    };
    const auto train = sample(40), val = sample(30);
    const auto metrics = standard_metrics();
    const auto res = knn_grid_search(train, val, 10, metrics, 2);
    REQUIRE(res.table.size() == 40);
    double best = -1;
    int best_k = 0;
    std::size_t best_m = 0;
    for (int k = 1; k <= 10; ++k)
      for (std::size_t mi = 0; mi < metrics.size(); ++mi) {
        const KnnModel m = knn_fit(train, k, metrics[mi]);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < val.size(); ++i) hits += knn_predict(m, val.row(i)) == val.labels[i];
        const double acc = static_cast<double>(hits) / val.size();
        CHECK(res.table[mi * 10 + (k - 1)].accuracy == acc);
        if (acc > best) {
          best = acc;
          best_k = k;
          best_m = mi;
        }
      }
    CHECK(res.best.accuracy == best);
    CHECK(res.best.k == best_k);
    CHECK(res.best.metric.kind == metrics[best_m].kind);
    const auto serial = knn_grid_search(train, val, 10, metrics, 1);
    CHECK(serial.best.k == res.best.k);
  }
}

TEST_SUITE("kernels") {
  TEST_CASE("closed values") {
    const std::vector<double> a{1, 2}, b{3, 4};
    CHECK(kernel_eval(KernelSpec::parse("linear"), a, b) == 11.0);
    KernelSpec rbf = KernelSpec::parse("rbf");
    rbf.gamma = 0.5;
    CHECK(kernel_eval(rbf, a, a) == 1.0);
    CHECK(kernel_eval(rbf, a, b) == doctest::Approx(std::exp(-4.0)));
    KernelSpec poly = KernelSpec::parse("polynomial");
    poly.gamma = 1.0;
    poly.coef0 = 1.0;
    poly.degree = 2;
    CHECK(kernel_eval(poly, a, b) == 144.0);
    KernelSpec lap = KernelSpec::parse("laplacian");
    lap.gamma = 0.25;
    CHECK(kernel_eval(lap, a, b) == doctest::Approx(std::exp(-1.0)));
    KernelSpec sig = KernelSpec::parse("sigmoid");
    sig.gamma = 0.1;
    CHECK(kernel_eval(sig, a, b) == doctest::Approx(std::tanh(1.1)));
    KernelSpec chi = KernelSpec::parse("chi_square");
    chi.gamma = 1.0;
    CHECK(kernel_eval(chi, a, b) == doctest::Approx(std::exp(-(4.0 / 4.0 + 4.0 / 6.0))));
  }

  TEST_CASE("gaussian equals rbf with matched width") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> g(0.01, 2.0);
    for (int t = 0; t < 100; ++t) {
      KernelSpec rbf = KernelSpec::parse("rbf");
      rbf.gamma = g(rng);
      KernelSpec gauss = KernelSpec::parse("gaussian");
      gauss.sigma = 1.0 / std::sqrt(2.0 * rbf.gamma);
      const auto a = random_vec(rng, 4, -1, 1), b = random_vec(rng, 4, -1, 1);
      CHECK(std::fabs(kernel_eval(rbf, a, b) - kernel_eval(gauss, a, b)) < 1e-12);
    }
  }

  TEST_CASE("symmetry of every kernel") {
    std::mt19937_64 rng(7);
    for (const char* name : {"linear", "rbf", "polynomial", "sigmoid", "chi_square", "laplacian", "gaussian"}) {
      KernelSpec k = KernelSpec::parse(name);
      k = k.resolved(6);
      for (int t = 0; t < 50; ++t) {
        const auto a = random_vec(rng, 6, 0, 1), b = random_vec(rng, 6, 0, 1);
        CHECK(kernel_eval(k, a, b) == kernel_eval(k, b, a));
      }
    }
  }

  TEST_CASE("chi-square rejects negative features") {
    const std::vector<double> a{1, -2}, b{3, 4};
    CHECK(code_of([&] { kernel_eval(KernelSpec::parse("chi_square").resolved(2), a, b); }) == ErrorCode::NegativeFeature);
    const std::vector<double> c{1};
    CHECK(code_of([&] { kernel_eval(KernelSpec{}, a, c); }) == ErrorCode::DimensionMismatch);
  }
}

TEST_SUITE("svm") {
  TEST_CASE("linear kernel separates a margin-one set") {
    SvmParams p;
    p.C = 10.0;
    const auto d = separable_set();
    const SvmModel m = svm_train(d, p);
    CHECK(train_accuracy(m, d) == 1.0);
  }

  TEST_CASE("xor needs a non-linear kernel") {
    const auto d = xor_set();
    SvmParams lin;
    lin.C = 10.0;
    CHECK(train_accuracy(svm_train(d, lin), d) <= 0.75);
    SvmParams rbf;
    rbf.kernel = KernelSpec::parse("rbf");
    rbf.kernel.gamma = 1.0;
    rbf.C = 10.0;
    CHECK(train_accuracy(svm_train(d, rbf), d) == 1.0);
  }

  TEST_CASE("dual coefficients respect the box") {
    std::mt19937_64 rng(8);
    LabeledDataset d;
    d.dim = 4;
    d.class_names = {"a", "b", "c"};
    for (int i = 0; i < 60; ++i) {
      const auto v = random_vec(rng, 4);
      d.features.insert(d.features.end(), v.begin(), v.end());
      d.labels.push_back(i % 3);
    }
    SvmParams p;
    p.kernel = KernelSpec::parse("rbf");
    p.C = 0.5;
    const SvmModel m = svm_train(d, p);
    REQUIRE(m.coef.size() == 3);
    for (const auto& row : m.coef) {
      REQUIRE(row.size() == m.support_count());
      for (double c : row) CHECK(std::fabs(c) <= p.C + 1e-12);
    }
    for (int t = 0; t < 20; ++t) {
      const auto x = random_vec(rng, 4);
      const auto proba = svm_predict_proba(m, x);
      const auto dec = svm_decision_values(m, x);
      CHECK(std::accumulate(proba.begin(), proba.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(std::max_element(proba.begin(), proba.end()) - proba.begin() ==
            std::max_element(dec.begin(), dec.end()) - dec.begin());
    }
  }

  TEST_CASE("training is deterministic for a seed") {
    std::mt19937_64 rng(9);
    LabeledDataset d;
    d.dim = 3;
    d.class_names = {"a", "b"};
    for (int i = 0; i < 40; ++i) {
      const auto v = random_vec(rng, 3);
      d.features.insert(d.features.end(), v.begin(), v.end());
      d.labels.push_back(v[0] + v[1] > 0 ? 1 : 0);
    }
    SvmParams p;
    p.seed = 17;
    const SvmModel a = svm_train(d, p);
    p.threads = 2;
    const SvmModel b = svm_train(d, p);
    CHECK(a.coef == b.coef);
    CHECK(a.bias == b.bias);
    CHECK(a.support_vectors == b.support_vectors);
  }

  TEST_CASE("softmax is shift invariant") {
    const std::vector<double> v{0.3, -1.2, 2.5, 0.0};
    std::vector<double> shifted = v;
    for (auto& x : shifted) x += 41.0;
    const auto a = softmax(v), b = softmax(shifted);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::fabs(a[i] - b[i]) < 1e-12);
  }

  TEST_CASE("single class is rejected") {
    auto d = separable_set();
    std::fill(d.labels.begin(), d.labels.end(), 1);
    CHECK(code_of([&] { svm_train(d); }) == ErrorCode::SingleClassDataset);
  }
}
