#include "mek/ensemble.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "mek/error.hpp"
#include "mek/parallel.hpp"

namespace mek {
namespace {

constexpr double kRowSumTolerance = 1e-3;

void check_weights(const WeightVector& w, std::size_t models) {
  if (w.size() != models)
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(w.size()) + " weights for " + std::to_string(models) + " models");
  bool any = false;
  for (int v : w.values) {
    if (v < 0) throw Error(ErrorCode::InvalidArgument, "weights must be non-negative");
    any = any || v > 0;
  }
  if (!any) throw Error(ErrorCode::AllZeroWeights, "at least one weight must be positive");
}

int argmax_lowest(const std::vector<double>& scores) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c)
    if (scores[c] > scores[best]) best = c;
  return static_cast<int>(best);
}

std::vector<std::size_t> accuracy_ranking(const PredictionSet& set) {
  if (set.models.empty()) throw Error(ErrorCode::InvalidArgument, "prediction set has no models");
  for (const auto& m : set.models)
    if (!m.accuracy) throw Error(ErrorCode::MissingAccuracies, "model '" + m.model_name + "' has no accuracy");
  std::vector<std::size_t> order(set.models.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return *set.models[a].accuracy > *set.models[b].accuracy; });
  return order;
}

void check_truth(std::span<const int> truth, std::size_t samples, std::size_t classes) {
  if (truth.size() != samples)
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(truth.size()) + " labels for " + std::to_string(samples) + " samples");
  for (std::size_t s = 0; s < truth.size(); ++s)
    if (truth[s] < 0 || static_cast<std::size_t>(truth[s]) >= classes)
      throw Error(ErrorCode::LabelOutOfRange, "label of sample " + std::to_string(s) + " out of range");
}

// Sample-major copy of the probabilities: block(s) holds m rows of C scores.
class ScoreLayout {
 public:
  explicit ScoreLayout(const PredictionSet& set)
      : n_(set.samples()), m_(set.model_count()), c_(set.classes()), data_(n_ * m_ * c_) {
    for (std::size_t s = 0; s < n_; ++s)
      for (std::size_t i = 0; i < m_; ++i) {
        const auto row = set.models[i].row(s);
        std::copy(row.begin(), row.end(), data_.begin() + static_cast<std::ptrdiff_t>((s * m_ + i) * c_));
      }
  }

  // Same accumulation order as weighted_vote (model order, zero weights add
  // nothing), so predictions agree bit for bit.
  std::size_t count_correct(const std::vector<int>& weights, std::span<const int> truth,
                            std::vector<double>& scores) const {
    std::size_t correct = 0;
    for (std::size_t s = 0; s < n_; ++s) {
      std::fill(scores.begin(), scores.end(), 0.0);
      const double* block = data_.data() + s * m_ * c_;
      for (std::size_t i = 0; i < m_; ++i) {
        const int w = weights[i];
        if (w == 0) continue;
        const double* p = block + i * c_;
        for (std::size_t c = 0; c < c_; ++c) scores[c] += w * p[c];
      }
      if (argmax_lowest(scores) == truth[s]) ++correct;
    }
    return correct;
  }

  std::size_t classes() const noexcept { return c_; }

 private:
  std::size_t n_, m_, c_;
  std::vector<double> data_;
};

int moebius(int n) {
  int result = 1;
  for (int p = 2; p * p <= n; ++p) {
    if (n % p != 0) continue;
    n /= p;
    if (n % p == 0) return 0;
    result = -result;
  }
  return n > 1 ? -result : result;
}

int gcd_of(const std::vector<int>& v) {
  int g = 0;
  for (int x : v) g = std::gcd(g, x);
  return g;
}

struct Candidate {
  std::size_t correct = 0;
  std::vector<int> weights;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.correct != b.correct) return a.correct > b.correct;
  return a.weights < b.weights;
}

void keep_top(std::vector<Candidate>& top, Candidate cand, std::size_t k) {
  if (top.size() == k && !better(cand, top.back())) return;
  auto pos = std::upper_bound(top.begin(), top.end(), cand, better);
  top.insert(pos, std::move(cand));
  if (top.size() > k) top.pop_back();
}

std::vector<Candidate> exhaustive_search(const ScoreLayout& layout, std::span<const int> truth, std::size_t models,
                                         int grid_max, std::size_t top_k, unsigned threads) {
  const std::uint64_t radix = static_cast<std::uint64_t>(grid_max) + 1;
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < models; ++i) total *= radix;

  const std::size_t chunks = std::max<std::size_t>(1, threads) * 8;
  std::vector<std::vector<Candidate>> partial(chunks);
  const std::uint64_t per_chunk = (total + chunks - 1) / chunks;
  parallel_for(chunks, threads, [&](std::size_t chunk) {
    std::vector<double> scores(layout.classes());
    std::vector<int> w(models);
    const std::uint64_t begin = std::max<std::uint64_t>(1, chunk * per_chunk);
    const std::uint64_t end = std::min(total, (chunk + 1) * per_chunk);
    for (std::uint64_t index = begin; index < end; ++index) {
      std::uint64_t rest = index;
      for (std::size_t i = models; i-- > 0;) {
        w[i] = static_cast<int>(rest % radix);
        rest /= radix;
      }
      if (gcd_of(w) != 1) continue;
      keep_top(partial[chunk], Candidate{layout.count_correct(w, truth, scores), w}, top_k);
    }
  });
  std::vector<Candidate> merged;
  for (auto& p : partial)
    for (auto& c : p) keep_top(merged, std::move(c), top_k);
  return merged;
}

struct HillClimbOutcome {
  std::vector<Candidate> top;
  std::uint64_t evaluations = 0;
};

HillClimbOutcome hill_climb(const ScoreLayout& layout, std::span<const int> truth, std::size_t models,
                            const OptimizeOptions& opt) {
  std::map<std::vector<int>, std::size_t> seen;  // canonical vector -> correct count
  std::vector<double> scores(layout.classes());
  std::uint64_t evaluations = 0;

  auto evaluate = [&](const std::vector<int>& raw) -> std::size_t {
    ++evaluations;
    const std::vector<int> canon = canonicalize_weights(WeightVector{raw}).values;
    if (auto it = seen.find(canon); it != seen.end()) return it->second;
    const std::size_t correct = layout.count_correct(canon, truth, scores);
    seen.emplace(canon, correct);
    return correct;
  };

  for (std::size_t i = 0; i < models; ++i) {
    std::vector<int> one_hot(models, 0);
    one_hot[i] = 1;
    evaluate(one_hot);
  }
  if (evaluations < opt.budget) evaluate(std::vector<int>(models, 1));

  std::mt19937_64 rng(opt.seed);
  const auto radix = static_cast<std::uint64_t>(opt.grid_max) + 1;
  while (evaluations < opt.budget) {
    std::vector<int> current(models, 0);
    while (std::all_of(current.begin(), current.end(), [](int v) { return v == 0; }))
      for (int& v : current) v = static_cast<int>(rng() % radix);
    std::size_t current_correct = evaluate(current);

    while (evaluations < opt.budget) {
      std::vector<int> best_move;
      std::size_t best_correct = current_correct;
      for (std::size_t i = 0; i < models && evaluations < opt.budget; ++i) {
        for (int step : {-1, 1}) {
          if (evaluations >= opt.budget) break;
          std::vector<int> next = current;
          next[i] += step;
          if (next[i] < 0 || next[i] > opt.grid_max) continue;
          if (std::all_of(next.begin(), next.end(), [](int v) { return v == 0; })) continue;
          const std::size_t correct = evaluate(next);
          if (correct > best_correct || (correct == best_correct && !best_move.empty() && next < best_move)) {
            best_correct = correct;
            best_move = std::move(next);
          }
        }
      }
      if (best_move.empty() || best_correct <= current_correct) break;
      current = std::move(best_move);
      current_correct = best_correct;
    }
  }

  HillClimbOutcome out;
  out.evaluations = evaluations;
  for (const auto& [w, correct] : seen) keep_top(out.top, Candidate{correct, w}, opt.top_k);
  return out;
}

}  // namespace

void PredictionSet::validate() const {
  if (models.empty()) throw Error(ErrorCode::InvalidArgument, "prediction set has no models");
  if (class_names.empty()) throw Error(ErrorCode::InvalidArgument, "prediction set has no classes");
  std::set<std::string> names;
  for (const auto& m : models) {
    if (!names.insert(m.model_name).second)
      throw Error(ErrorCode::InvalidArgument, "duplicate model name '" + m.model_name + "'");
    if (m.classes != class_names.size())
      throw Error(ErrorCode::LengthMismatch, "model '" + m.model_name + "' has a different class count");
    if (m.probs.size() != sample_ids.size() * m.classes)
      throw Error(ErrorCode::LengthMismatch, "model '" + m.model_name + "' has a different sample count");
    if (m.accuracy && !(*m.accuracy >= 0.0 && *m.accuracy <= 1.0))
      throw Error(ErrorCode::InvalidArgument, "model '" + m.model_name + "' accuracy outside [0, 1]");
    for (std::size_t s = 0; s < m.samples(); ++s) {
      double sum = 0.0;
      for (double p : m.row(s)) {
        if (!(p >= 0.0 && p <= 1.0))
          throw Error(ErrorCode::RowSumError,
                      "model '" + m.model_name + "' row " + std::to_string(s + 1) + " has a value outside [0, 1]");
        sum += p;
      }
      if (std::abs(sum - 1.0) > kRowSumTolerance)
        throw Error(ErrorCode::RowSumError, "model '" + m.model_name + "' row " + std::to_string(s + 1) + " sums to " +
                                                std::to_string(sum));
    }
  }
  std::set<std::string> ids;
  for (const auto& id : sample_ids)
    if (!ids.insert(id).second) throw Error(ErrorCode::DuplicateSampleId, "sample id '" + id + "' repeats");
}

WeightVector WeightVector::parse(const std::string& csv) {
  WeightVector w;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int v = 0;
    const auto* end = item.data() + item.size();
    const auto [ptr, ec] = std::from_chars(item.data(), end, v);
    if (ec != std::errc{} || ptr != end || item.empty())
      throw Error(ErrorCode::InvalidArgument, "bad weight '" + item + "'");
    if (v < 0) throw Error(ErrorCode::InvalidArgument, "weights must be non-negative");
    w.values.push_back(v);
  }
  if (w.values.empty()) throw Error(ErrorCode::InvalidArgument, "empty weight list");
  return w;
}

std::string WeightVector::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

int weighted_vote(std::span<const std::span<const double>> model_probs, const WeightVector& weights) {
  check_weights(weights, model_probs.size());
  const std::size_t C = model_probs.front().size();
  if (C == 0) throw Error(ErrorCode::LengthMismatch, "empty probability vector");
  std::vector<double> scores(C, 0.0);
  for (std::size_t i = 0; i < model_probs.size(); ++i) {
    if (model_probs[i].size() != C) throw Error(ErrorCode::LengthMismatch, "probability vectors differ in length");
    const int w = weights.values[i];
    if (w == 0) continue;
    for (std::size_t c = 0; c < C; ++c) scores[c] += w * model_probs[i][c];
  }
  return argmax_lowest(scores);
}

ScenarioResult vote_all(const PredictionSet& set, const WeightVector& weights, std::span<const int> truth) {
  check_weights(weights, set.model_count());
  ScenarioResult res;
  res.weights = weights;
  res.predicted.resize(set.samples());
  std::vector<std::span<const double>> rows(set.model_count());
  for (std::size_t s = 0; s < set.samples(); ++s) {
    for (std::size_t i = 0; i < set.model_count(); ++i) rows[i] = set.models[i].row(s);
    res.predicted[s] = weighted_vote(rows, weights);
  }
  if (!truth.empty()) {
    check_truth(truth, set.samples(), set.classes());
    for (std::size_t s = 0; s < truth.size(); ++s) res.correct += res.predicted[s] == truth[s] ? 1 : 0;
    res.report = report(confusion(truth, res.predicted, set.classes(), set.class_names));
    res.accuracy = res.report->accuracy;
  }
  return res;
}

WeightVector scenario_uniform(std::size_t models) {
  if (models == 0) throw Error(ErrorCode::InvalidArgument, "need at least one model");
  return WeightVector{std::vector<int>(models, 1)};
}

WeightVector scenario_incremental(const PredictionSet& set) {
  const auto order = accuracy_ranking(set);
  const std::size_t m = order.size();
  WeightVector w{std::vector<int>(m, 0)};
  for (std::size_t rank = 0; rank < m; ++rank) w.values[order[rank]] = static_cast<int>(m - rank);
  return w;
}

WeightVector scenario_highest(const PredictionSet& set) {
  const auto order = accuracy_ranking(set);
  WeightVector w{std::vector<int>(order.size(), 1)};
  w.values[order.front()] = 2;
  return w;
}

WeightVector canonicalize_weights(const WeightVector& weights) {
  for (int v : weights.values)
    if (v < 0) throw Error(ErrorCode::InvalidArgument, "weights must be non-negative");
  const int g = gcd_of(weights.values);
  if (g == 0) throw Error(ErrorCode::AllZeroWeights, "cannot canonicalize the zero vector");
  WeightVector out = weights;
  for (int& v : out.values) v /= g;
  return out;
}

__extension__ using Wide = __int128;

std::uint64_t canonical_grid_size(std::size_t models, int grid_max) {
  if (models == 0 || grid_max < 1) return 0;
  // Moebius inversion over the common divisor d of all entries.
  constexpr auto kCap = static_cast<Wide>(std::numeric_limits<std::uint64_t>::max());
  Wide total = 0;
  for (int d = 1; d <= grid_max; ++d) {
    const int mu = moebius(d);
    if (mu == 0) continue;
    Wide count = 1;
    const Wide base = grid_max / d + 1;
    for (std::size_t i = 0; i < models; ++i) {
      count *= base;
      if (count > kCap * 2) return std::numeric_limits<std::uint64_t>::max();
    }
    total += mu * (count - 1);
  }
  return total > kCap ? std::numeric_limits<std::uint64_t>::max() : static_cast<std::uint64_t>(total);
}

OptimizeResult optimize_weights(const PredictionSet& set, std::span<const int> truth, const OptimizeOptions& options) {
  set.validate();
  check_truth(truth, set.samples(), set.classes());
  if (options.grid_max < 1) throw Error(ErrorCode::InvalidArgument, "grid_max must be at least 1");
  if (options.top_k < 1) throw Error(ErrorCode::InvalidArgument, "top_k must be at least 1");
  const std::size_t m = set.model_count();
  if (options.budget < m)
    throw Error(ErrorCode::BudgetTooSmall,
                "budget " + std::to_string(options.budget) + " below model count " + std::to_string(m));

  const ScoreLayout layout(set);
  OptimizeResult result;
  std::vector<Candidate> best;
  const std::uint64_t canonical = canonical_grid_size(m, options.grid_max);
  if (canonical <= options.budget) {
    result.exhaustive = true;
    result.evaluations = canonical;
    best = exhaustive_search(layout, truth, m, options.grid_max, options.top_k, options.threads);
  } else {
    auto climb = hill_climb(layout, truth, m, options);
    result.evaluations = climb.evaluations;
    best = std::move(climb.top);
  }
  for (auto& cand : best) {
    ScenarioResult r = vote_all(set, WeightVector{std::move(cand.weights)}, truth);
    result.top.push_back(std::move(r));
  }
  return result;
}

}  // namespace mek
