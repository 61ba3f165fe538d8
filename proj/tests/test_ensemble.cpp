#include <doctest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "mek/error.hpp"
#include "mek/ensemble.hpp"
#include "test_support.hpp"

using namespace mek;
using mek::testing::random_labels;
using mek::testing::random_set;
using mek::testing::random_weights;

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

int vote_oracle(const PredictionSet& set, std::size_t s, const std::vector<int>& w) {
  std::vector<double> score(set.classes(), 0.0);
  for (std::size_t i = 0; i < set.model_count(); ++i)
    for (std::size_t c = 0; c < set.classes(); ++c)
      if (w[i] != 0) score[c] += w[i] * set.models[i].probs[s * set.classes() + c];
  int best = 0;
  for (std::size_t c = 1; c < score.size(); ++c)
    if (score[c] > score[best]) best = static_cast<int>(c);
  return best;
}

std::size_t correct_oracle(const PredictionSet& set, const std::vector<int>& truth, const std::vector<int>& w) {
  std::size_t hits = 0;
  for (std::size_t s = 0; s < set.samples(); ++s) hits += vote_oracle(set, s, w) == truth[s];
  return hits;
}

PredictionSet with_accuracies(PredictionSet set, const std::vector<double>& acc) {
  for (std::size_t i = 0; i < acc.size(); ++i) set.models[i].accuracy = acc[i];
  return set;
}

}  // namespace

TEST_SUITE("vote") {
  TEST_CASE("hand examples") {
    const std::vector<double> p{0.1, 0.7, 0.2};
    const std::vector<std::span<const double>> one{p};
    CHECK(weighted_vote(one, WeightVector{{1}}) == 1);
    const std::vector<double> a{1, 0, 0}, b{0, 1, 0};
    const std::vector<std::span<const double>> two{a, b};
    CHECK(weighted_vote(two, WeightVector{{2, 1}}) == 0);
    CHECK(weighted_vote(two, WeightVector{{1, 2}}) == 1);
    CHECK(weighted_vote(two, WeightVector{{1, 1}}) == 0);
  }

  TEST_CASE("errors") {
    const std::vector<double> a{0.5, 0.5}, b{1.0};
    const std::vector<std::span<const double>> two{a, a};
    CHECK(code_of([&] { weighted_vote(two, WeightVector{{1}}); }) == ErrorCode::LengthMismatch);
    CHECK(code_of([&] { weighted_vote(two, WeightVector{{0, 0}}); }) == ErrorCode::AllZeroWeights);
    const std::vector<std::span<const double>> ragged{a, b};
    CHECK(code_of([&] { weighted_vote(ragged, WeightVector{{1, 1}}); }) == ErrorCode::LengthMismatch);
  }

  TEST_CASE("matches the score oracle") {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 200; ++t) {
      const auto set = random_set(rng, 7, 4, 20);
      const auto w = random_weights(rng, 7, 10);
      const auto res = vote_all(set, w);
      for (std::size_t s = 0; s < set.samples(); ++s) CHECK(res.predicted[s] == vote_oracle(set, s, w.values));
    }
  }

  TEST_CASE("unanimous models decide") {
    std::mt19937_64 rng(2);
    auto set = random_set(rng, 1, 3, 30);
    for (int i = 1; i < 4; ++i) {
      auto copy = set.models[0];
      copy.model_name = "copy" + std::to_string(i);
      set.models.push_back(copy);
    }
    const auto base = vote_all(set, WeightVector{{1, 0, 0, 0}});
    for (int t = 0; t < 20; ++t) CHECK(vote_all(set, random_weights(rng, 4, 10)).predicted == base.predicted);
  }

  TEST_CASE("single non-zero weight is that model's argmax") {
    std::mt19937_64 rng(3);
    const auto set = random_set(rng, 4, 4, 50);
    for (std::size_t i = 0; i < 4; ++i) {
      std::vector<int> w(4, 0);
      w[i] = 3;
      const auto res = vote_all(set, WeightVector{w});
      for (std::size_t s = 0; s < 50; ++s) {
        const auto row = set.models[i].row(s);
        CHECK(res.predicted[s] == std::max_element(row.begin(), row.end()) - row.begin());
      }
    }
  }

  TEST_CASE("zero-weight models can be removed") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 50; ++t) {
      auto set = random_set(rng, 5, 3, 25);
      auto w = random_weights(rng, 5, 6);
      w.values[2] = 0;
      if (std::all_of(w.values.begin(), w.values.end(), [](int v) { return v == 0; })) w.values[0] = 1;
      const auto full = vote_all(set, w);
      set.models.erase(set.models.begin() + 2);
      w.values.erase(w.values.begin() + 2);
      CHECK(vote_all(set, w).predicted == full.predicted);
    }
  }

  TEST_CASE("uniform weights equal the probability-sum argmax") {
    std::mt19937_64 rng(5);
    const auto set = random_set(rng, 6, 4, 40);
    const auto res = vote_all(set, scenario_uniform(6));
    for (std::size_t s = 0; s < 40; ++s) CHECK(res.predicted[s] == vote_oracle(set, s, std::vector<int>(6, 1)));
  }

  TEST_CASE("scale invariance and canonicalization") {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 100; ++t) {
      const auto set = random_set(rng, 4, 3, 30);
      const auto w = random_weights(rng, 4, 10);
      const int lambda = 1 + t % 9;
      WeightVector scaled = w;
      for (auto& v : scaled.values) v *= lambda;
      const auto base = vote_all(set, w).predicted;
      CHECK(vote_all(set, scaled).predicted == base);
      CHECK(vote_all(set, canonicalize_weights(scaled)).predicted == base);
    }
  }

  TEST_CASE("report accompanies ground truth") {
    std::mt19937_64 rng(7);
    const auto set = random_set(rng, 3, 4, 60);
    const auto truth = random_labels(rng, 60, 4);
    const auto res = vote_all(set, WeightVector{{1, 2, 3}}, truth);
    REQUIRE(res.report.has_value());
    CHECK(res.accuracy == res.report->accuracy);
    CHECK(res.accuracy == static_cast<double>(res.correct) / 60.0);
    const std::vector<int> bad(59, 0);
    CHECK(code_of([&] { vote_all(set, WeightVector{{1, 1, 1}}, bad); }) == ErrorCode::LengthMismatch);
  }
}

TEST_SUITE("scenarios") {
  TEST_CASE("uniform") {
    CHECK(scenario_uniform(7).values == std::vector<int>(7, 1));
    CHECK(scenario_uniform(1).values == std::vector<int>{1});
  }

  TEST_CASE("incremental ranks best first") {
    std::mt19937_64 rng(8);
    auto set = with_accuracies(random_set(rng, 2, 2, 3), {0.9, 0.8});
    CHECK(scenario_incremental(set).values == std::vector<int>{2, 1});
    set = with_accuracies(random_set(rng, 4, 2, 3), {0.7, 0.9, 0.7, 0.6});
    CHECK(scenario_incremental(set).values == std::vector<int>{3, 4, 2, 1});
  }

  TEST_CASE("incremental assignment survives permutation") {
    std::mt19937_64 rng(9);
    auto set = with_accuracies(random_set(rng, 6, 2, 3), {0.91, 0.72, 0.88, 0.95, 0.60, 0.83});
    const auto w = scenario_incremental(set);
    std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
    for (int t = 0; t < 10; ++t) {
      std::shuffle(perm.begin(), perm.end(), rng);
      PredictionSet shuffled = set;
      for (std::size_t i = 0; i < perm.size(); ++i) shuffled.models[i] = set.models[perm[i]];
      const auto ws = scenario_incremental(shuffled);
      for (std::size_t i = 0; i < perm.size(); ++i) CHECK(ws.values[i] == w.values[perm[i]]);
    }
  }

  TEST_CASE("highest") {
    std::mt19937_64 rng(10);
    auto set = with_accuracies(random_set(rng, 3, 2, 3), {0.8, 0.95, 0.95});
    CHECK(scenario_highest(set).values == std::vector<int>{1, 2, 1});
    CHECK(scenario_highest(with_accuracies(random_set(rng, 1, 2, 3), {0.5})).values == std::vector<int>{2});
  }

  TEST_CASE("figshare-style ranking favours ResNet101") {
    const std::vector<mek::testing::FixtureSpec> models{{"KNN", 0.9641},      {"SVM", 0.9554},
                                                        {"ResNet50", 0.9663}, {"Xception", 0.9793},
                                                        {"CNN-MRI", 0.9565}, {"DenseNet121", 0.9815},
                                                        {"ResNet101", 0.9837}};
    const auto fx = mek::testing::make_accuracy_fixture(models, {"glioma", "meningioma", "pituitary"}, 920, 3);
    CHECK(scenario_highest(fx.set).values == std::vector<int>{1, 1, 1, 1, 1, 1, 2});
    CHECK(scenario_incremental(fx.set).values[6] == 7);
  }

  TEST_CASE("missing accuracies") {
    std::mt19937_64 rng(11);
    auto set = random_set(rng, 3, 2, 3);
    set.models[1].accuracy.reset();
    CHECK(code_of([&] { scenario_incremental(set); }) == ErrorCode::MissingAccuracies);
    CHECK(code_of([&] { scenario_highest(set); }) == ErrorCode::MissingAccuracies);
  }
}

TEST_SUITE("weights") {
  TEST_CASE("canonicalization") {
    CHECK(canonicalize_weights(WeightVector{{2, 4, 6}}).values == std::vector<int>{1, 2, 3});
    CHECK(canonicalize_weights(WeightVector{{1, 1, 0}}).values == std::vector<int>{1, 1, 0});
    CHECK(canonicalize_weights(WeightVector{{0, 5, 0}}).values == std::vector<int>{0, 1, 0});
    CHECK(code_of([] { canonicalize_weights(WeightVector{{0, 0}}); }) == ErrorCode::AllZeroWeights);
  }

  TEST_CASE("parse and print") {
    const auto w = WeightVector::parse("1,3,1,3,2,1,4");
    CHECK(w.values == std::vector<int>{1, 3, 1, 3, 2, 1, 4});
    CHECK(w.to_string() == "1,3,1,3,2,1,4");
    CHECK(code_of([] { WeightVector::parse("1,-2"); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { WeightVector::parse("1,x"); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { WeightVector::parse(""); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("canonical grid size matches a gcd count") {
    for (std::size_t m = 1; m <= 4; ++m)
      for (int g = 1; g <= 6; ++g) {
        std::uint64_t count = 0;
        std::vector<int> w(m, 0);
        std::uint64_t total = 1;
        for (std::size_t i = 0; i < m; ++i) total *= static_cast<std::uint64_t>(g + 1);
        for (std::uint64_t idx = 1; idx < total; ++idx) {
          std::uint64_t r = idx;
          int d = 0;
          for (std::size_t i = 0; i < m; ++i) {
            d = std::gcd(d, static_cast<int>(r % (g + 1)));
            r /= g + 1;
          }
          count += d == 1;
        }
        CHECK(canonical_grid_size(m, g) == count);
      }
    CHECK(canonical_grid_size(7, 10) < 19487171ull);
    CHECK(canonical_grid_size(7, 10) > 19000000ull);
  }
}

TEST_SUITE("optimizer") {
  TEST_CASE("dominant model wins") {
    PredictionSet set;
    set.class_names = {"a", "b"};
    set.sample_ids = {"s0", "s1", "s2", "s3"};
    const std::vector<int> truth{0, 1, 1, 0};
    const std::vector<std::vector<double>> probs{
        {1, 0, 0, 1, 0, 1, 1, 0},  // always right
        {0, 1, 1, 0, 0, 1, 0, 1},  // right only on s2
        {0, 1, 1, 0, 1, 0, 0, 1}};  // always wrong
    for (std::size_t i = 0; i < 3; ++i) set.models.push_back({"m" + std::to_string(i), 0.5, 2, probs[i]});
    OptimizeOptions opt;
    opt.grid_max = 3;
    const auto res = optimize_weights(set, truth, opt);
    CHECK(res.exhaustive);
    REQUIRE_FALSE(res.top.empty());
    CHECK(res.top[0].weights.values == std::vector<int>{1, 0, 0});
    CHECK(res.top[0].accuracy == 1.0);
  }

  TEST_CASE("exhaustive search matches triple loops") {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 30; ++t) {
      const auto set = random_set(rng, 3, 3, 20);
      const auto truth = random_labels(rng, 20, 3);
      std::size_t best = 0;
      std::vector<int> best_w;
      for (int a = 0; a <= 3; ++a)
        for (int b = 0; b <= 3; ++b)
          for (int c = 0; c <= 3; ++c) {
            if (a + b + c == 0) continue;
            const std::vector<int> w{a, b, c};
            const std::size_t hits = correct_oracle(set, truth, w);
            if (hits > best) best = hits;
          }
      OptimizeOptions opt;
      opt.grid_max = 3;
      opt.threads = 1 + t % 3;
      const auto res = optimize_weights(set, truth, opt);
      CHECK(res.exhaustive);
      CHECK(res.top[0].correct == best);
      for (std::size_t r = 0; r < res.top.size(); ++r) {
        CHECK(std::gcd(std::gcd(res.top[r].weights.values[0], res.top[r].weights.values[1]), res.top[r].weights.values[2]) == 1);
        CHECK(res.top[r].correct == correct_oracle(set, truth, res.top[r].weights.values));
        if (r > 0) {
          CHECK(res.top[r - 1].correct >= res.top[r].correct);
          if (res.top[r - 1].correct == res.top[r].correct) CHECK(res.top[r - 1].weights < res.top[r].weights);
        }
      }
    }
  }

  TEST_CASE("top list equals the sorted canonical enumeration") {
    std::mt19937_64 rng(13);
    const auto set = random_set(rng, 4, 3, 30);
    const auto truth = random_labels(rng, 30, 3);
    std::vector<std::pair<std::size_t, std::vector<int>>> all;
    for (int idx = 1; idx < 4 * 4 * 4 * 4; ++idx) {
      const std::vector<int> w{idx / 64, idx / 16 % 4, idx / 4 % 4, idx % 4};
      if (std::gcd(std::gcd(w[0], w[1]), std::gcd(w[2], w[3])) != 1) continue;
      all.push_back({correct_oracle(set, truth, w), w});
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    OptimizeOptions opt;
    opt.grid_max = 3;
    opt.top_k = 5;
    opt.threads = 3;
    const auto res = optimize_weights(set, truth, opt);
    REQUIRE(res.top.size() == 5);
    CHECK(res.evaluations == all.size());
    for (std::size_t r = 0; r < 5; ++r) CHECK(res.top[r].weights.values == all[r].second);
  }

  TEST_CASE("larger grids never lose accuracy") {
    std::mt19937_64 rng(14);
    for (int t = 0; t < 10; ++t) {
      const auto set = random_set(rng, 3, 4, 40);
      const auto truth = random_labels(rng, 40, 4);
      std::size_t prev = 0;
      for (int g = 1; g <= 5; ++g) {
        OptimizeOptions opt;
        opt.grid_max = g;
        const auto res = optimize_weights(set, truth, opt);
        CHECK(res.top[0].correct >= prev);
        prev = res.top[0].correct;
      }
    }
  }

  TEST_CASE("hill climbing respects the budget and beats every one-hot") {
    std::mt19937_64 rng(15);
    const auto set = random_set(rng, 7, 4, 80);
    const auto truth = random_labels(rng, 80, 4);
    OptimizeOptions opt;
    opt.grid_max = 10;
    opt.budget = 3000;
    opt.seed = 5;
    const auto res = optimize_weights(set, truth, opt);
    CHECK_FALSE(res.exhaustive);
    CHECK(res.evaluations <= opt.budget);
    CHECK(res.top.size() == 3);
    for (std::size_t i = 0; i < 7; ++i) {
      std::vector<int> w(7, 0);
      w[i] = 1;
      CHECK(res.top[0].correct >= correct_oracle(set, truth, w));
    }
    const auto again = optimize_weights(set, truth, opt);
    for (std::size_t r = 0; r < res.top.size(); ++r) CHECK(again.top[r].weights == res.top[r].weights);
    CHECK(again.evaluations == res.evaluations);
  }

  TEST_CASE("thread count does not change results") {
    std::mt19937_64 rng(16);
    const auto set = random_set(rng, 5, 3, 50);
    const auto truth = random_labels(rng, 50, 3);
    OptimizeOptions opt;
    opt.grid_max = 4;
    opt.top_k = 10;
    opt.threads = 1;
    const auto a = optimize_weights(set, truth, opt);
    opt.threads = 4;
    const auto b = optimize_weights(set, truth, opt);
    REQUIRE(a.top.size() == b.top.size());
    for (std::size_t r = 0; r < a.top.size(); ++r) CHECK(a.top[r].weights == b.top[r].weights);
  }

  TEST_CASE("budget below model count") {
    std::mt19937_64 rng(17);
    const auto set = random_set(rng, 4, 2, 5);
    const auto truth = random_labels(rng, 5, 2);
    OptimizeOptions opt;
    opt.budget = 3;
    CHECK(code_of([&] { optimize_weights(set, truth, opt); }) == ErrorCode::BudgetTooSmall);
  }
}

TEST_SUITE("prediction set") {
  TEST_CASE("validation") {
    std::mt19937_64 rng(18);
    auto set = random_set(rng, 2, 3, 4);
    CHECK_NOTHROW(set.validate());
    auto dup = set;
    dup.models[1].model_name = dup.models[0].model_name;
    CHECK(code_of([&] { dup.validate(); }) == ErrorCode::InvalidArgument);
    auto bad_row = set;
    bad_row.models[0].probs[0] += 0.01;
    CHECK(code_of([&] { bad_row.validate(); }) == ErrorCode::RowSumError);
    auto ids = set;
    ids.sample_ids[1] = ids.sample_ids[0];
    CHECK(code_of([&] { ids.validate(); }) == ErrorCode::DuplicateSampleId);
    auto short_model = set;
    short_model.models[1].probs.resize(9);
    CHECK(code_of([&] { short_model.validate(); }) == ErrorCode::LengthMismatch);
  }
}
