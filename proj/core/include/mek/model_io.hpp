#pragma once

#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "mek/classifiers.hpp"

namespace mek {

using ClassicalModel = std::variant<KnnModel, SvmModel>;

/// Binary model file: magic "MEK1", u32 format version, u8 model kind, then
/// the class names and model payload, all little-endian.
void save_model(const ClassicalModel& model, const std::filesystem::path& path);
ClassicalModel load_model(const std::filesystem::path& path);

const std::vector<std::string>& class_names(const ClassicalModel& model);
std::size_t feature_dim(const ClassicalModel& model);
std::vector<double> predict_proba(const ClassicalModel& model, std::span<const double> x);

}  // namespace mek
