#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mek/classifiers.hpp"
#include "mek/ensemble.hpp"
#include "mek/error.hpp"
#include "mek/evaluation.hpp"
#include "mek/features.hpp"
#include "mek/image_io.hpp"
#include "mek/imageproc.hpp"
#include "mek/manifest_io.hpp"
#include "mek/model_io.hpp"
#include "mek/parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mek::cli {
namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

unsigned resolve_threads(int flag) { return flag > 0 ? static_cast<unsigned>(flag) : default_threads(); }

// ---------------------------------------------------------------- preprocess

struct PreprocessOptions {
  std::string mode;
  fs::path input;
  fs::path output;
  int k = 4;
  double sigma = 1.4;
  double low = 0.05;
  double high = 0.15;
  std::uint64_t seed = 0;
  double target_min = 0.0;
  double target_max = 255.0;
  double target_mean = 110.0;
  int threads = 0;
};

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(fs::relative(entry.path(), dir));
  std::sort(files.begin(), files.end());
  return files;
}

int cmd_preprocess(const PreprocessOptions& o, std::ostream& out, std::ostream& err) {
  EdgePipelineParams params;
  params.bcet = {o.target_min, o.target_max, o.target_mean};
  params.kmeans.k = o.k;
  params.kmeans.seed = o.seed;
  params.canny = {o.sigma, o.low, o.high};
  params.canny.validate();

  const auto files = list_images(o.input);
  err << "preprocess: " << files.size() << " images, mode " << o.mode << "\n";
  parallel_for(files.size(), resolve_threads(o.threads), [&](std::size_t i) {
    const GrayImage img = read_image(o.input / files[i]);
    fs::path target = o.output / files[i];
    target.replace_extension(".png");
    if (o.mode == "bcet") {
      write_png(bcet(img, params.bcet), target);
    } else {
      write_png(edge_pipeline(img, params), target);
    }
  });
  out << files.size() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- extract

struct ExtractOptions {
  fs::path input;
  fs::path output;
  int resize = 128;
  int cell = 8;
  int block = 2;
  int stride = 1;
  int bins = 9;
  bool no_bcet = false;
  std::string split = "all";
  fs::path labels_out;
  int threads = 0;
};

struct ImageJob {
  std::string sample_id;
  fs::path path;
  std::string label;
};

std::vector<ImageJob> collect_jobs(const fs::path& input, const std::string& split) {
  std::vector<ImageJob> jobs;
  if (fs::is_directory(input)) {
    if (split != "all") throw UsageError("--split needs a manifest input");
    for (const auto& rel : list_images(input)) jobs.push_back({rel.generic_string(), input / rel, ""});
    return jobs;
  }
  const DatasetManifest manifest = load_manifest(input);
  const fs::path base = input.parent_path();
  for (const auto& e : manifest.entries) {
    if (split != "all" && to_string(e.split) != split) continue;
    jobs.push_back({e.path, base / e.path, e.label});
  }
  return jobs;
}

FeatureTable extract_features(const std::vector<ImageJob>& jobs, const HogParams& hog_params, bool use_bcet,
                              unsigned threads) {
  std::vector<FeatureVector> rows(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t i) {
    GrayImage img = read_image(jobs[i].path);
    if (use_bcet) img = bcet(img);
    rows[i] = hog(img, hog_params);
  });
  FeatureTable table;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (i == 0) table.dim = rows[i].size();
    if (rows[i].size() != table.dim) throw Error(ErrorCode::DimensionMismatch, "descriptor length differs for " + jobs[i].sample_id);
    table.sample_ids.push_back(jobs[i].sample_id);
    table.values.insert(table.values.end(), rows[i].begin(), rows[i].end());
  }
  return table;
}

int cmd_extract(const ExtractOptions& o, std::ostream& out, std::ostream& err) {
  HogParams hp;
  hp.resize_to = o.resize;
  hp.cell_size = o.cell;
  hp.block_cells = o.block;
  hp.block_stride = o.stride;
  hp.bins = o.bins;
  hp.validate();
  const auto jobs = collect_jobs(o.input, o.split);
  if (jobs.empty()) throw Error(ErrorCode::InvalidArgument, "no images selected from " + o.input.string());
  err << "extract: " << jobs.size() << " images\n";
  const FeatureTable table = extract_features(jobs, hp, !o.no_bcet, resolve_threads(o.threads));
  write_features(table, o.output);
  if (!o.labels_out.empty()) {
    LabelTable labels;
    for (const auto& j : jobs) {
      if (j.label.empty()) throw UsageError("--labels-out needs a manifest input");
      labels.sample_ids.push_back(j.sample_id);
      labels.labels.push_back(j.label);
    }
    write_labels(labels, o.labels_out);
  }
  out << table.sample_ids.size() << " x " << table.dim << "\n";
  return kExitOk;
}

// --------------------------------------------------------------------- train

struct TrainOptions {
  std::string model;
  fs::path features;
  fs::path labels;
  fs::path out;
  int k = 3;
  std::string metric = "euclidean";
  double p = 3.0;
  bool grid_search = false;
  fs::path val_features;
  fs::path val_labels;
  fs::path grid_out;
  std::string kernel = "linear";
  double C = 1.0;
  double gamma = 0.0;
  int degree = 3;
  double coef0 = 0.0;
  double sigma = 1.0;
  double tol = 1e-3;
  int max_passes = 10;
  std::uint64_t seed = 0;
  int threads = 0;
};

LabeledDataset load_dataset(const fs::path& features_path, const fs::path& labels_path,
                            std::optional<std::vector<std::string>> class_names = std::nullopt) {
  const FeatureTable features = read_features(features_path);
  const LabelTable labels = read_labels(labels_path);
  LabeledDataset data;
  data.dim = features.dim;
  data.features = features.values;
  data.class_names = class_names ? *class_names : derive_class_names(labels.labels);
  data.labels = align_labels(labels, features.sample_ids, data.class_names);
  data.validate();
  return data;
}

ClassicalModel train_model(const TrainOptions& o, const LabeledDataset& data, std::ostream& err) {
  if (o.model == "knn") {
    DistanceMetric metric = DistanceMetric::parse(o.metric, o.p);
    int k = o.k;
    if (k < 1 || k > 10) throw UsageError("--k must lie in [1, 10]");
    if (o.grid_search) {
      if (o.val_features.empty() || o.val_labels.empty())
        throw UsageError("--grid-search needs --val-features and --val-labels");
      const LabeledDataset val = load_dataset(o.val_features, o.val_labels, data.class_names);
      const auto grid = knn_grid_search(data, val, std::min<int>(10, static_cast<int>(data.size())),
                                        standard_metrics(o.p), resolve_threads(o.threads));
      k = grid.best.k;
      metric = grid.best.metric;
      err << "grid search: best k=" << k << " metric=" << metric.name() << " accuracy=" << grid.best.accuracy << "\n";
      if (!o.grid_out.empty()) {
        json table = json::array();
        for (const auto& e : grid.table) table.push_back({{"k", e.k}, {"metric", e.metric.name()}, {"accuracy", e.accuracy}});
        write_json(o.grid_out, {{"best", {{"k", k}, {"metric", metric.name()}, {"accuracy", grid.best.accuracy}}},
                                {"table", table}});
      }
    }
    return knn_fit(data, k, metric);
  }
  SvmParams sp;
  sp.kernel = KernelSpec::parse(o.kernel);
  sp.kernel.gamma = o.gamma;
  sp.kernel.degree = o.degree;
  sp.kernel.coef0 = o.coef0;
  sp.kernel.sigma = o.sigma;
  sp.C = o.C;
  sp.tol = o.tol;
  sp.max_passes = o.max_passes;
  sp.seed = o.seed;
  sp.threads = resolve_threads(o.threads);
  SvmModel m = svm_train(data, sp);
  err << "svm: " << m.support_count() << " support vectors\n";
  return m;
}

int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
  const LabeledDataset data = load_dataset(o.features, o.labels);
  err << "train: " << data.size() << " samples, " << data.dim << " features, " << data.class_names.size()
      << " classes\n";
  save_model(train_model(o, data, err), o.out);
  out << o.out.string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- predict

struct PredictOptions {
  fs::path model;
  fs::path features;
  fs::path out;
  int threads = 0;
};

ModelPredictions predict_table(const ClassicalModel& model, const FeatureTable& features, unsigned threads) {
  const auto& names = class_names(model);
  if (features.dim != feature_dim(model))
    throw Error(ErrorCode::DimensionMismatch, "features have " + std::to_string(features.dim) +
                                                  " columns, model expects " + std::to_string(feature_dim(model)));
  ModelPredictions preds;
  preds.classes = names.size();
  preds.probs.resize(features.sample_ids.size() * preds.classes);
  parallel_for(features.sample_ids.size(), threads, [&](std::size_t s) {
    const auto proba = predict_proba(model, {features.values.data() + s * features.dim, features.dim});
    std::copy(proba.begin(), proba.end(), preds.probs.begin() + static_cast<std::ptrdiff_t>(s * preds.classes));
  });
  return preds;
}

int cmd_predict(const PredictOptions& o, std::ostream& out, std::ostream& err) {
  const ClassicalModel model = load_model(o.model);
  const FeatureTable features = read_features(o.features);
  err << "predict: " << features.sample_ids.size() << " samples\n";
  write_predictions(features.sample_ids, class_names(model), predict_table(model, features, resolve_threads(o.threads)),
                    o.out);
  out << o.out.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------- vote

struct VoteOptions {
  fs::path models;
  fs::path labels;
  std::string weights;
  std::string scenario;
  fs::path report;
  fs::path predictions_out;
  bool text = false;
};

std::vector<std::string> model_names(const PredictionSet& set) {
  std::vector<std::string> names;
  for (const auto& m : set.models) names.push_back(m.model_name);
  return names;
}

json scenario_json(const PredictionSet& set, const ScenarioResult& r) {
  json doc = {{"weights", r.weights.values}, {"models", model_names(set)}};
  if (r.report) {
    doc["accuracy"] = r.accuracy;
    doc["correct"] = r.correct;
    doc["report"] = to_json(*r.report);
  }
  return doc;
}

int cmd_vote(const VoteOptions& o, std::ostream& out, std::ostream& err) {
  const PredictionSet set = load_prediction_set(o.models);
  const std::vector<int> truth = align_labels(read_labels(o.labels), set.sample_ids, set.class_names);
  WeightVector w;
  std::string scenario = o.scenario;
  if (!o.weights.empty()) {
    w = WeightVector::parse(o.weights);
    scenario = "custom";
  } else if (o.scenario == "uniform") {
    w = scenario_uniform(set.model_count());
  } else if (o.scenario == "incremental") {
    w = scenario_incremental(set);
  } else {
    w = scenario_highest(set);
  }
  const ScenarioResult r = vote_all(set, w, truth);
  err << "vote: scenario " << scenario << ", weights " << w.to_string() << ", accuracy " << r.accuracy << "\n";
  json doc = scenario_json(set, r);
  doc["scenario"] = scenario;
  write_json(o.report, doc);
  if (!o.predictions_out.empty()) {
    LabelTable preds;
    preds.sample_ids = set.sample_ids;
    for (int c : r.predicted) preds.labels.push_back(set.class_names[static_cast<std::size_t>(c)]);
    write_labels(preds, o.predictions_out);
  }
  if (o.text) out << to_text(*r.report);
  return kExitOk;
}

// ------------------------------------------------------------------ optimize

struct OptimizeCliOptions {
  fs::path models;
  fs::path labels;
  int grid_max = 10;
  std::size_t top = 3;
  std::uint64_t budget = 2'000'000;
  std::uint64_t seed = 0;
  fs::path out;
  int threads = 0;
};

int cmd_optimize(const OptimizeCliOptions& o, std::ostream& out, std::ostream& err) {
  const PredictionSet set = load_prediction_set(o.models);
  const std::vector<int> truth = align_labels(read_labels(o.labels), set.sample_ids, set.class_names);
  OptimizeOptions opt;
  opt.grid_max = o.grid_max;
  opt.top_k = o.top;
  opt.budget = o.budget;
  opt.seed = o.seed;
  opt.threads = resolve_threads(o.threads);
  const OptimizeResult res = optimize_weights(set, truth, opt);
  err << "optimize: " << (res.exhaustive ? "exhaustive" : "hill-climbing") << ", " << res.evaluations
      << " evaluations\n";
  json results = json::array();
  for (std::size_t i = 0; i < res.top.size(); ++i) {
    json item = scenario_json(set, res.top[i]);
    item["rank"] = i + 1;
    results.push_back(std::move(item));
  }
  write_json(o.out, {{"search", res.exhaustive ? "exhaustive" : "hill_climbing"},
                     {"evaluations", res.evaluations},
                     {"grid_max", o.grid_max},
                     {"budget", o.budget},
                     {"seed", o.seed},
                     {"models", model_names(set)},
                     {"results", results}});
  for (const auto& r : res.top) out << r.weights.to_string() << " " << r.accuracy << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ evaluate

struct EvaluateOptions {
  fs::path predictions;
  fs::path labels;
  fs::path out;
  bool text = false;
};

int cmd_evaluate(const EvaluateOptions& o, std::ostream& out, std::ostream& err) {
  const PredictionTable table = read_predictions(o.predictions, {});
  if (table.renormalized_rows > 0) err << "warning: " << table.renormalized_rows << " rows renormalized\n";
  const std::vector<int> truth = align_labels(read_labels(o.labels), table.sample_ids, table.class_names);
  std::vector<int> predicted;
  for (std::size_t s = 0; s < table.sample_ids.size(); ++s) {
    const auto row = table.predictions.row(s);
    predicted.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  const EvaluationReport rep = report(confusion(truth, predicted, table.class_names.size(), table.class_names));
  write_json(o.out, to_json(rep));
  err << "evaluate: accuracy " << rep.accuracy << "\n";
  if (o.text) out << to_text(rep);
  return kExitOk;
}

// ------------------------------------------------------------------ pipeline

struct PipelineOptions {
  fs::path manifest;
  fs::path workdir;
  double split_fraction = 0.0;
  std::uint64_t seed = 0;
  ExtractOptions extract;
  TrainOptions knn;
  TrainOptions svm;
  fs::path deep_models;
  std::string scenario = "uniform";
  bool optimize = false;
  int grid_max = 10;
  std::uint64_t budget = 2'000'000;
  int threads = 0;
};

int cmd_pipeline(PipelineOptions o, std::ostream& out, std::ostream& err) {
  const unsigned threads = resolve_threads(o.threads);
  DatasetManifest manifest = load_manifest(o.manifest);
  const fs::path base = o.manifest.parent_path();
  if (o.split_fraction > 0.0) {
    manifest = split_manifest(manifest, o.split_fraction, o.seed);
    write_manifest(manifest, o.workdir / "manifest_split.csv");
  }
  if (manifest.select(Split::Train).empty() || manifest.select(Split::Test).empty())
    throw Error(ErrorCode::InvalidArgument, "manifest needs both train and test entries");

  HogParams hp;
  hp.resize_to = o.extract.resize;
  hp.cell_size = o.extract.cell;
  hp.block_cells = o.extract.block;
  hp.block_stride = o.extract.stride;
  hp.bins = o.extract.bins;
  hp.validate();

  auto jobs_for = [&](Split split) {
    std::vector<ImageJob> jobs;
    for (const auto* e : manifest.select(split)) jobs.push_back({e->path, base / e->path, e->label});
    return jobs;
  };
  auto labels_for = [](const std::vector<ImageJob>& jobs) {
    LabelTable t;
    for (const auto& j : jobs) {
      t.sample_ids.push_back(j.sample_id);
      t.labels.push_back(j.label);
    }
    return t;
  };
  const auto train_jobs = jobs_for(Split::Train);
  const auto test_jobs = jobs_for(Split::Test);
  err << "pipeline: extracting " << train_jobs.size() << " train / " << test_jobs.size() << " test images\n";
  const FeatureTable train_features = extract_features(train_jobs, hp, !o.extract.no_bcet, threads);
  const FeatureTable test_features = extract_features(test_jobs, hp, !o.extract.no_bcet, threads);
  write_features(train_features, o.workdir / "train_features.csv");
  write_features(test_features, o.workdir / "test_features.csv");
  write_labels(labels_for(train_jobs), o.workdir / "train_labels.csv");
  const LabelTable test_labels = labels_for(test_jobs);
  write_labels(test_labels, o.workdir / "test_labels.csv");

  LabeledDataset train;
  train.dim = train_features.dim;
  train.features = train_features.values;
  train.class_names = manifest.class_names;
  train.labels = align_labels(labels_for(train_jobs), train_features.sample_ids, train.class_names);
  const std::vector<int> truth = align_labels(test_labels, test_features.sample_ids, manifest.class_names);

  std::vector<ModelEntry> entries;
  for (TrainOptions* t : {&o.knn, &o.svm}) {
    t->threads = o.threads;
    err << "pipeline: training " << t->model << "\n";
    const ClassicalModel model = train_model(*t, train, err);
    save_model(model, o.workdir / (t->model + ".bin"));
    const ModelPredictions preds = predict_table(model, test_features, threads);
    const std::string file = t->model + "_predictions.csv";
    write_predictions(test_features.sample_ids, manifest.class_names, preds, o.workdir / file);
    std::vector<int> predicted;
    for (std::size_t s = 0; s < preds.samples(); ++s) {
      const auto row = preds.row(s);
      predicted.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
    const EvaluationReport rep = report(confusion(truth, predicted, manifest.class_names.size(), manifest.class_names));
    write_json(o.workdir / (t->model + "_report.json"), to_json(rep));
    err << "pipeline: " << t->model << " accuracy " << rep.accuracy << "\n";
    entries.push_back({t->model == "knn" ? "KNN" : "SVM", file, rep.accuracy});
  }
  if (!o.deep_models.empty()) {
    const fs::path deep_base = fs::absolute(o.deep_models).parent_path();
    for (auto e : read_model_list(o.deep_models)) {
      e.prediction_file = fs::absolute(deep_base / e.prediction_file).string();
      entries.push_back(std::move(e));
    }
  }
  write_model_list(entries, o.workdir / "models.json");

  const PredictionSet set = load_prediction_set(o.workdir / "models.json", manifest.class_names);
  const std::vector<int> set_truth = align_labels(test_labels, set.sample_ids, set.class_names);
  WeightVector w = o.scenario == "uniform"       ? scenario_uniform(set.model_count())
                   : o.scenario == "incremental" ? scenario_incremental(set)
                                                 : scenario_highest(set);
  const ScenarioResult vote = vote_all(set, w, set_truth);
  json doc = scenario_json(set, vote);
  doc["scenario"] = o.scenario;
  if (o.optimize) {
    OptimizeOptions opt;
    opt.grid_max = o.grid_max;
    opt.budget = o.budget;
    opt.seed = o.seed;
    opt.threads = threads;
    const OptimizeResult res = optimize_weights(set, set_truth, opt);
    json results = json::array();
    for (const auto& r : res.top) results.push_back(scenario_json(set, r));
    doc["optimized"] = {{"search", res.exhaustive ? "exhaustive" : "hill_climbing"}, {"results", results}};
  }
  write_json(o.workdir / "report.json", doc);
  out << to_text(*vote.report);
  return kExitOk;
}

// ------------------------------------------------------------------- wiring

void add_threads(CLI::App* cmd, int& threads) {
  cmd->add_option("--threads", threads, "Worker threads (default: MEK_THREADS or all cores)")->check(CLI::NonNegativeNumber);
}

void add_knn_options(CLI::App* cmd, TrainOptions& o) {
  cmd->add_option("--k", o.k, "Neighbours (1-10)")->check(CLI::Range(1, 10));
  cmd->add_option("--metric", o.metric, "Distance metric")
      ->check(CLI::IsMember({"euclidean", "manhattan", "minkowski", "chebyshev"}));
  cmd->add_option("--p", o.p, "Minkowski exponent")->check(CLI::PositiveNumber);
}

void add_svm_options(CLI::App* cmd, TrainOptions& o) {
  cmd->add_option("--kernel", o.kernel, "SVM kernel")
      ->check(CLI::IsMember({"linear", "rbf", "polynomial", "sigmoid", "chi_square", "laplacian", "gaussian"}));
  cmd->add_option("--C", o.C, "SVM box constraint")->check(CLI::PositiveNumber);
  cmd->add_option("--gamma", o.gamma, "Kernel gamma (0 = 1/d)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--degree", o.degree, "Polynomial degree")->check(CLI::PositiveNumber);
  cmd->add_option("--coef0", o.coef0, "Polynomial/sigmoid offset");
  cmd->add_option("--kernel-sigma", o.sigma, "Gaussian kernel width")->check(CLI::PositiveNumber);
  cmd->add_option("--tol", o.tol, "SMO KKT tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--max-passes", o.max_passes, "SMO passes without change before stopping")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "SMO partner-selection seed");
}

void add_hog_options(CLI::App* cmd, ExtractOptions& o) {
  cmd->add_option("--resize", o.resize, "Square resize before HOG (0 = native)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--cell", o.cell, "HOG cell size")->check(CLI::Range(2, 4096));
  cmd->add_option("--block", o.block, "HOG block size in cells")->check(CLI::PositiveNumber);
  cmd->add_option("--stride", o.stride, "HOG block stride in cells")->check(CLI::PositiveNumber);
  cmd->add_option("--bins", o.bins, "HOG orientation bins")->check(CLI::Range(2, 360));
  cmd->add_flag("--no-bcet", o.no_bcet, "Skip contrast enhancement before HOG");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weighted-ensemble MRI classification toolkit", "mek"};
  app.require_subcommand(1);

  PreprocessOptions pre;
  auto* c_pre = app.add_subcommand("preprocess", "Contrast enhancement or edge maps for a directory of images");
  c_pre->add_option("--mode", pre.mode, "bcet or edge")->required()->check(CLI::IsMember({"bcet", "edge"}));
  c_pre->add_option("--input", pre.input, "Input directory")->required();
  c_pre->add_option("--output", pre.output, "Output directory")->required();
  c_pre->add_option("--k", pre.k, "K-means clusters")->check(CLI::Range(2, 255));
  c_pre->add_option("--sigma", pre.sigma, "Gaussian sigma")->check(CLI::PositiveNumber);
  c_pre->add_option("--low", pre.low, "Low threshold ratio")->check(CLI::Range(0.0, 1.0));
  c_pre->add_option("--high", pre.high, "High threshold ratio")->check(CLI::Range(0.0, 1.0));
  c_pre->add_option("--seed", pre.seed, "K-means seed");
  c_pre->add_option("--target-min", pre.target_min, "BCET output minimum")->check(CLI::Range(0.0, 255.0));
  c_pre->add_option("--target-max", pre.target_max, "BCET output maximum")->check(CLI::Range(0.0, 255.0));
  c_pre->add_option("--target-mean", pre.target_mean, "BCET output mean")->check(CLI::Range(0.0, 255.0));
  add_threads(c_pre, pre.threads);

  ExtractOptions ext;
  auto* c_ext = app.add_subcommand("extract", "HOG features for a directory or manifest");
  c_ext->add_option("--input", ext.input, "Image directory or manifest CSV")->required();
  c_ext->add_option("--output", ext.output, "Feature CSV")->required();
  c_ext->add_option("--split", ext.split, "Manifest split to extract")->check(CLI::IsMember({"train", "test", "all"}));
  c_ext->add_option("--labels-out", ext.labels_out, "Also write sample_id,label for manifest input");
  add_hog_options(c_ext, ext);
  add_threads(c_ext, ext.threads);

  TrainOptions tr;
  auto* c_tr = app.add_subcommand("train", "Fit a KNN or SVM model on a feature file");
  c_tr->add_option("--model", tr.model, "knn or svm")->required()->check(CLI::IsMember({"knn", "svm"}));
  c_tr->add_option("--features", tr.features, "Training features CSV")->required();
  c_tr->add_option("--labels", tr.labels, "Training labels CSV")->required();
  c_tr->add_option("--out", tr.out, "Model file")->required();
  add_knn_options(c_tr, tr);
  c_tr->add_flag("--grid-search", tr.grid_search, "Pick k and metric on a validation set (KNN)");
  c_tr->add_option("--val-features", tr.val_features, "Validation features for grid search");
  c_tr->add_option("--val-labels", tr.val_labels, "Validation labels for grid search");
  c_tr->add_option("--grid-out", tr.grid_out, "Write the grid table as JSON");
  add_svm_options(c_tr, tr);
  add_threads(c_tr, tr.threads);

  PredictOptions pr;
  auto* c_pr = app.add_subcommand("predict", "Write per-class probabilities for a feature file");
  c_pr->add_option("--model", pr.model, "Model file")->required();
  c_pr->add_option("--features", pr.features, "Features CSV")->required();
  c_pr->add_option("--out", pr.out, "Predictions CSV")->required();
  add_threads(c_pr, pr.threads);

  VoteOptions vo;
  auto* c_vo = app.add_subcommand("vote", "Weighted vote over the models in models.json");
  c_vo->add_option("--models", vo.models, "models.json")->required();
  c_vo->add_option("--labels", vo.labels, "Ground-truth labels CSV")->required();
  auto* o_weights = c_vo->add_option("--weights", vo.weights, "Comma-separated integer weights");
  auto* o_scenario = c_vo->add_option("--scenario", vo.scenario, "uniform, incremental or highest")
                         ->check(CLI::IsMember({"uniform", "incremental", "highest"}));
  o_weights->excludes(o_scenario);
  c_vo->add_option("--report", vo.report, "Report JSON")->required();
  c_vo->add_option("--predictions-out", vo.predictions_out, "Write sample_id,label of the ensemble");
  c_vo->add_flag("--text", vo.text, "Print an aligned table");

  OptimizeCliOptions op;
  auto* c_op = app.add_subcommand("optimize", "Search integer vote weights");
  c_op->add_option("--models", op.models, "models.json")->required();
  c_op->add_option("--labels", op.labels, "Ground-truth labels CSV")->required();
  c_op->add_option("--grid-max", op.grid_max, "Largest weight")->check(CLI::PositiveNumber);
  c_op->add_option("--top", op.top, "Configurations to report")->check(CLI::PositiveNumber);
  c_op->add_option("--budget", op.budget, "Evaluation budget before hill climbing")->check(CLI::PositiveNumber);
  c_op->add_option("--seed", op.seed, "Hill-climbing seed");
  c_op->add_option("--out", op.out, "Results JSON")->required();
  add_threads(c_op, op.threads);

  EvaluateOptions ev;
  auto* c_ev = app.add_subcommand("evaluate", "Metrics for one prediction file");
  c_ev->add_option("--predictions", ev.predictions, "Predictions CSV")->required();
  c_ev->add_option("--labels", ev.labels, "Ground-truth labels CSV")->required();
  c_ev->add_option("--out", ev.out, "Report JSON")->required();
  c_ev->add_flag("--text", ev.text, "Print an aligned table");

  PipelineOptions pl;
  pl.knn.model = "knn";
  pl.svm.model = "svm";
  auto* c_pl = app.add_subcommand("pipeline", "Manifest to report: features, KNN, SVM, vote");
  c_pl->add_option("--manifest", pl.manifest, "Dataset manifest")->required();
  c_pl->add_option("--workdir", pl.workdir, "Output directory")->required();
  c_pl->add_option("--split-fraction", pl.split_fraction, "Re-split the manifest with this train fraction")
      ->check(CLI::Range(0.0, 1.0));
  c_pl->add_option("--seed", pl.seed, "Split and optimizer seed");
  add_hog_options(c_pl, pl.extract);
  add_knn_options(c_pl, pl.knn);
  c_pl->add_option("--kernel", pl.svm.kernel, "SVM kernel")
      ->check(CLI::IsMember({"linear", "rbf", "polynomial", "sigmoid", "chi_square", "laplacian", "gaussian"}));
  c_pl->add_option("--C", pl.svm.C, "SVM box constraint")->check(CLI::PositiveNumber);
  c_pl->add_option("--gamma", pl.svm.gamma, "Kernel gamma (0 = 1/d)")->check(CLI::NonNegativeNumber);
  c_pl->add_option("--deep-models", pl.deep_models, "Extra models.json with exported deep-model predictions");
  c_pl->add_option("--scenario", pl.scenario, "Fixed weighting scenario")
      ->check(CLI::IsMember({"uniform", "incremental", "highest"}));
  c_pl->add_flag("--optimize", pl.optimize, "Also run the weight search");
  c_pl->add_option("--grid-max", pl.grid_max, "Largest weight for --optimize")->check(CLI::PositiveNumber);
  c_pl->add_option("--budget", pl.budget, "Evaluation budget for --optimize")->check(CLI::PositiveNumber);
  add_threads(c_pl, pl.threads);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (c_vo->parsed() && vo.weights.empty() && vo.scenario.empty())
      throw CLI::ValidationError("vote", "one of --weights or --scenario is required");
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    err << (sub != nullptr ? sub->help() : app.help());
    return kExitUsage;
  }

  try {
    if (c_pre->parsed()) return cmd_preprocess(pre, out, err);
    if (c_ext->parsed()) return cmd_extract(ext, out, err);
    if (c_tr->parsed()) return cmd_train(tr, out, err);
    if (c_pr->parsed()) return cmd_predict(pr, out, err);
    if (c_vo->parsed()) return cmd_vote(vo, out, err);
    if (c_op->parsed()) return cmd_optimize(op, out, err);
    if (c_ev->parsed()) return cmd_evaluate(ev, out, err);
    if (c_pl->parsed()) return cmd_pipeline(pl, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomainError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomainError;
  }
  return kExitUsage;
}

}  // namespace mek::cli
