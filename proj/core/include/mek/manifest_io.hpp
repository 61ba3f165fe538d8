#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mek/ensemble.hpp"

namespace mek {

enum class Split { Train, Test };

std::string_view to_string(Split split) noexcept;

struct ManifestEntry {
  std::string path;
  std::string label;
  Split split = Split::Train;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> class_names;  ///< sorted unique labels

  /// Index of `label` in class_names; throws LabelOutOfRange for unknown labels.
  int class_index(const std::string& label) const;
  std::vector<const ManifestEntry*> select(Split split) const;
};

/// Sorted unique labels; the only class ordering used across the toolkit.
std::vector<std::string> derive_class_names(const std::vector<std::string>& labels);

/// CSV with header `path,label,split`.
DatasetManifest load_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(const std::string& text, const std::string& origin = "<manifest>");
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Stratified shuffle: floor(train_fraction * class size) samples of each
/// class become train, the rest test.
DatasetManifest split_manifest(const DatasetManifest& manifest, double train_fraction, std::uint64_t seed);

/// Interchange file `sample_id,<class_0>,...,<class_{C-1}>`.
struct PredictionTable {
  std::vector<std::string> sample_ids;
  std::vector<std::string> class_names;
  ModelPredictions predictions;
  std::size_t renormalized_rows = 0;  ///< rows off by more than 1e-6, rescaled to sum to 1
};

PredictionTable read_predictions(const std::filesystem::path& path, const std::vector<std::string>& expected_classes);
void write_predictions(const std::vector<std::string>& sample_ids, const std::vector<std::string>& class_names,
                       const ModelPredictions& predictions, const std::filesystem::path& path);

/// Labels file `sample_id,label` with label given by class name.
struct LabelTable {
  std::vector<std::string> sample_ids;
  std::vector<std::string> labels;
};

LabelTable read_labels(const std::filesystem::path& path);
void write_labels(const LabelTable& labels, const std::filesystem::path& path);

/// Class indices for `sample_ids`, looked up by id in `labels`.
std::vector<int> align_labels(const LabelTable& labels, const std::vector<std::string>& sample_ids,
                              const std::vector<std::string>& class_names);

/// Feature file `sample_id,f0,...,f{d-1}`.
struct FeatureTable {
  std::vector<std::string> sample_ids;
  std::size_t dim = 0;
  std::vector<double> values;  ///< row-major
};

FeatureTable read_features(const std::filesystem::path& path);
void write_features(const FeatureTable& table, const std::filesystem::path& path);

/// `models.json`: array of {name, prediction_file, accuracy}. Prediction
/// paths are relative to the directory of models.json. Class names come from the
/// first file's header unless given.
struct ModelEntry {
  std::string name;
  std::string prediction_file;
  std::optional<double> accuracy;
};

std::vector<ModelEntry> read_model_list(const std::filesystem::path& path);
void write_model_list(const std::vector<ModelEntry>& entries, const std::filesystem::path& path);
PredictionSet load_prediction_set(const std::filesystem::path& models_json,
                                  std::optional<std::vector<std::string>> class_names = std::nullopt);

/// Decimal rendering with nine significant digits.
std::string format_decimal(double value);

}  // namespace mek
