#include "mek/manifest_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "mek/error.hpp"

namespace mek {
namespace {

constexpr double kRowSumTolerance = 1e-3;
// Deviations below this are serialization noise and are left untouched.
constexpr double kRenormalizeThreshold = 1e-6;

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

// Lines without their terminators; a trailing empty line is dropped.
std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

[[noreturn]] void parse_fail(const std::string& origin, std::size_t line, const std::string& what) {
  throw Error(ErrorCode::ParseError, origin + ":" + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& field, const std::string& origin, std::size_t line) {
  double v = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end || field.empty() || !std::isfinite(v))
    parse_fail(origin, line, "not a number: '" + field + "'");
  return v;
}

std::string header_string(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) out += (i ? "," : "") + fields[i];
  return out;
}

}  // namespace

std::string_view to_string(Split split) noexcept { return split == Split::Train ? "train" : "test"; }

std::string format_decimal(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 9);
  return std::string(buf, ptr);
}

std::vector<std::string> derive_class_names(const std::vector<std::string>& labels) {
  std::set<std::string> unique(labels.begin(), labels.end());
  return {unique.begin(), unique.end()};
}

int DatasetManifest::class_index(const std::string& label) const {
  const auto it = std::lower_bound(class_names.begin(), class_names.end(), label);
  if (it == class_names.end() || *it != label)
    throw Error(ErrorCode::LabelOutOfRange, "unknown class '" + label + "'");
  return static_cast<int>(it - class_names.begin());
}

std::vector<const ManifestEntry*> DatasetManifest::select(Split split) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries)
    if (e.split == split) out.push_back(&e);
  return out;
}

DatasetManifest parse_manifest(const std::string& text, const std::string& origin) {
  const auto lines = split_lines(text);
  if (lines.empty()) parse_fail(origin, 1, "empty manifest");
  if (lines[0] != "path,label,split") parse_fail(origin, 1, "expected header 'path,label,split'");
  DatasetManifest m;
  std::set<std::string> paths;
  std::vector<std::string> labels;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (lines[i].empty()) continue;
    const auto f = split_fields(lines[i]);
    if (f.size() != 3) parse_fail(origin, line_no, "expected 3 fields, found " + std::to_string(f.size()));
    if (f[0].empty() || f[1].empty()) parse_fail(origin, line_no, "empty path or label");
    ManifestEntry e{f[0], f[1], Split::Train};
    if (f[2] == "train") {
      e.split = Split::Train;
    } else if (f[2] == "test") {
      e.split = Split::Test;
    } else {
      throw Error(ErrorCode::UnknownSplit, origin + ":" + std::to_string(line_no) + ": split '" + f[2] + "'");
    }
    if (!paths.insert(e.path).second)
      throw Error(ErrorCode::DuplicatePath, origin + ":" + std::to_string(line_no) + ": '" + e.path + "'");
    labels.push_back(e.label);
    m.entries.push_back(std::move(e));
  }
  m.class_names = derive_class_names(labels);
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) { return parse_manifest(slurp(path), path.string()); }

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "path,label,split\n";
  for (const auto& e : manifest.entries) out << e.path << ',' << e.label << ',' << to_string(e.split) << '\n';
}

DatasetManifest split_manifest(const DatasetManifest& manifest, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "train fraction must lie in (0, 1)");
  DatasetManifest out = manifest;
  std::vector<std::vector<std::size_t>> by_class(out.class_names.size());
  for (std::size_t i = 0; i < out.entries.size(); ++i)
    by_class[static_cast<std::size_t>(out.class_index(out.entries[i].label))].push_back(i);

  std::mt19937_64 rng(seed);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.size() < 2)
      throw Error(ErrorCode::ClassTooSmall, "class '" + out.class_names[c] + "' has fewer than 2 samples");
    // Fisher-Yates with raw engine output keeps the permutation portable.
    for (std::size_t i = members.size() - 1; i > 0; --i) std::swap(members[i], members[rng() % (i + 1)]);
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(members.size())));
    for (std::size_t r = 0; r < members.size(); ++r)
      out.entries[members[r]].split = r < n_train ? Split::Train : Split::Test;
  }
  return out;
}

PredictionTable read_predictions(const std::filesystem::path& path, const std::vector<std::string>& expected_classes) {
  const std::string origin = path.string();
  const auto lines = split_lines(slurp(path));
  if (lines.empty()) parse_fail(origin, 1, "missing header");
  const auto header = split_fields(lines[0]);
  if (header.size() < 2 || header[0] != "sample_id")
    throw Error(ErrorCode::HeaderMismatch, origin + ": header must be 'sample_id,<class>,...'");
  std::vector<std::string> classes(header.begin() + 1, header.end());
  if (!expected_classes.empty() && classes != expected_classes)
    throw Error(ErrorCode::HeaderMismatch, origin + ": header '" + lines[0] + "' does not match classes '" +
                                               header_string(expected_classes) + "'");
  const std::size_t C = classes.size();

  PredictionTable table;
  table.class_names = classes;
  table.predictions.model_name = path.stem().string();
  table.predictions.classes = C;
  std::set<std::string> ids;
  std::vector<double> row(C);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (lines[i].empty()) continue;
    const auto f = split_fields(lines[i]);
    if (f.size() != C + 1)
      parse_fail(origin, line_no, "expected " + std::to_string(C + 1) + " fields, found " + std::to_string(f.size()));
    if (!ids.insert(f[0]).second)
      throw Error(ErrorCode::DuplicateSampleId, origin + ":" + std::to_string(line_no) + ": '" + f[0] + "'");
    double sum = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      row[c] = parse_double(f[c + 1], origin, line_no);
      if (row[c] < 0.0 || row[c] > 1.0 + kRowSumTolerance)
        throw Error(ErrorCode::RowSumError,
                    origin + ":" + std::to_string(line_no) + ": probability " + f[c + 1] + " outside [0, 1]");
      sum += row[c];
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance)
      throw Error(ErrorCode::RowSumError, origin + ":" + std::to_string(line_no) + ": row sums to " + format_decimal(sum));
    if (std::abs(sum - 1.0) > kRenormalizeThreshold) {
      ++table.renormalized_rows;
      for (double& v : row) v /= sum;
    }
    table.sample_ids.push_back(f[0]);
    table.predictions.probs.insert(table.predictions.probs.end(), row.begin(), row.end());
  }
  return table;
}

void write_predictions(const std::vector<std::string>& sample_ids, const std::vector<std::string>& class_names,
                       const ModelPredictions& predictions, const std::filesystem::path& path) {
  if (predictions.classes != class_names.size() || predictions.samples() != sample_ids.size())
    throw Error(ErrorCode::LengthMismatch, "prediction matrix does not match ids and classes");
  auto out = open_out(path);
  out << "sample_id";
  for (const auto& c : class_names) out << ',' << c;
  out << '\n';
  for (std::size_t s = 0; s < sample_ids.size(); ++s) {
    out << sample_ids[s];
    for (double p : predictions.row(s)) out << ',' << format_decimal(p);
    out << '\n';
  }
}

LabelTable read_labels(const std::filesystem::path& path) {
  const std::string origin = path.string();
  const auto lines = split_lines(slurp(path));
  if (lines.empty()) parse_fail(origin, 1, "missing header");
  if (lines[0] != "sample_id,label") throw Error(ErrorCode::HeaderMismatch, origin + ": expected 'sample_id,label'");
  LabelTable t;
  std::set<std::string> ids;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split_fields(lines[i]);
    if (f.size() != 2 || f[0].empty() || f[1].empty()) parse_fail(origin, i + 1, "expected 'sample_id,label'");
    if (!ids.insert(f[0]).second)
      throw Error(ErrorCode::DuplicateSampleId, origin + ":" + std::to_string(i + 1) + ": '" + f[0] + "'");
    t.sample_ids.push_back(f[0]);
    t.labels.push_back(f[1]);
  }
  return t;
}

void write_labels(const LabelTable& labels, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "sample_id,label\n";
  for (std::size_t i = 0; i < labels.sample_ids.size(); ++i) out << labels.sample_ids[i] << ',' << labels.labels[i] << '\n';
}

std::vector<int> align_labels(const LabelTable& labels, const std::vector<std::string>& sample_ids,
                              const std::vector<std::string>& class_names) {
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < labels.sample_ids.size(); ++i) by_id.emplace(labels.sample_ids[i], i);
  std::unordered_map<std::string, int> class_index;
  for (std::size_t c = 0; c < class_names.size(); ++c) class_index.emplace(class_names[c], static_cast<int>(c));
  std::vector<int> out;
  out.reserve(sample_ids.size());
  for (const auto& id : sample_ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorCode::LengthMismatch, "no label for sample '" + id + "'");
    const auto& name = labels.labels[it->second];
    const auto c = class_index.find(name);
    if (c == class_index.end()) throw Error(ErrorCode::LabelOutOfRange, "sample '" + id + "' has unknown class '" + name + "'");
    out.push_back(c->second);
  }
  return out;
}

FeatureTable read_features(const std::filesystem::path& path) {
  const std::string origin = path.string();
  const auto lines = split_lines(slurp(path));
  if (lines.empty()) parse_fail(origin, 1, "missing header");
  const auto header = split_fields(lines[0]);
  if (header.size() < 2 || header[0] != "sample_id")
    throw Error(ErrorCode::HeaderMismatch, origin + ": header must be 'sample_id,f0,...'");
  FeatureTable t;
  t.dim = header.size() - 1;
  for (std::size_t j = 0; j < t.dim; ++j)
    if (header[j + 1] != "f" + std::to_string(j))
      throw Error(ErrorCode::HeaderMismatch, origin + ": column " + std::to_string(j + 2) + " should be f" + std::to_string(j));
  std::set<std::string> ids;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split_fields(lines[i]);
    if (f.size() != t.dim + 1)
      parse_fail(origin, i + 1, "expected " + std::to_string(t.dim + 1) + " fields, found " + std::to_string(f.size()));
    if (!ids.insert(f[0]).second)
      throw Error(ErrorCode::DuplicateSampleId, origin + ":" + std::to_string(i + 1) + ": '" + f[0] + "'");
    t.sample_ids.push_back(f[0]);
    for (std::size_t j = 0; j < t.dim; ++j) t.values.push_back(parse_double(f[j + 1], origin, i + 1));
  }
  return t;
}

void write_features(const FeatureTable& table, const std::filesystem::path& path) {
  if (table.values.size() != table.sample_ids.size() * table.dim)
    throw Error(ErrorCode::LengthMismatch, "feature matrix does not match ids and dimension");
  auto out = open_out(path);
  out << "sample_id";
  for (std::size_t j = 0; j < table.dim; ++j) out << ",f" << j;
  out << '\n';
  for (std::size_t i = 0; i < table.sample_ids.size(); ++i) {
    out << table.sample_ids[i];
    for (std::size_t j = 0; j < table.dim; ++j) out << ',' << format_decimal(table.values[i * table.dim + j]);
    out << '\n';
  }
}

std::vector<ModelEntry> read_model_list(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(slurp(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::ParseError, path.string() + ": expected a JSON array");
  std::vector<ModelEntry> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& item = doc[i];
    const std::string where = path.string() + ": entry " + std::to_string(i);
    if (!item.is_object() || !item.contains("name") || !item.contains("prediction_file") ||
        !item["name"].is_string() || !item["prediction_file"].is_string())
      throw Error(ErrorCode::ParseError, where + " needs string fields 'name' and 'prediction_file'");
    ModelEntry e{item["name"].get<std::string>(), item["prediction_file"].get<std::string>(), std::nullopt};
    if (item.contains("accuracy") && !item["accuracy"].is_null()) {
      if (!item["accuracy"].is_number()) throw Error(ErrorCode::ParseError, where + ": accuracy must be a number");
      const double acc = item["accuracy"].get<double>();
      if (!(acc >= 0.0 && acc <= 1.0)) throw Error(ErrorCode::ParseError, where + ": accuracy must lie in [0, 1]");
      e.accuracy = acc;
    }
    out.push_back(std::move(e));
  }
  if (out.empty()) throw Error(ErrorCode::ParseError, path.string() + ": no models listed");
  return out;
}

void write_model_list(const std::vector<ModelEntry>& entries, const std::filesystem::path& path) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json item = {{"name", e.name}, {"prediction_file", e.prediction_file}};
    if (e.accuracy) item["accuracy"] = *e.accuracy;
    doc.push_back(std::move(item));
  }
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

PredictionSet load_prediction_set(const std::filesystem::path& models_json,
                                  std::optional<std::vector<std::string>> class_names) {
  const auto entries = read_model_list(models_json);
  const auto base = models_json.parent_path();
  PredictionSet set;
  for (const auto& e : entries) {
    PredictionTable t = read_predictions(base / e.prediction_file, class_names.value_or(std::vector<std::string>{}));
    // The first file's header fixes the classes every later file must match.
    if (!class_names) class_names = t.class_names;
    if (set.models.empty()) {
      set.sample_ids = t.sample_ids;
    } else if (t.sample_ids != set.sample_ids) {
      throw Error(ErrorCode::LengthMismatch, e.prediction_file + ": sample ids or order differ from the first model");
    }
    t.predictions.model_name = e.name;
    t.predictions.accuracy = e.accuracy;
    set.models.push_back(std::move(t.predictions));
  }
  set.class_names = *class_names;
  set.validate();
  return set;
}

}  // namespace mek
