#include "mek/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mek/error.hpp"

namespace mek {

GrayImage::GrayImage(int width, int height, double fill)
    : GrayImage(width, height,
                std::vector<double>(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill)) {}

GrayImage::GrayImage(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 0 || height < 0) throw Error(ErrorCode::InvalidArgument, "negative image dimensions");
  if (data_.size() != static_cast<std::size_t>(width) * height)
    throw Error(ErrorCode::InvalidArgument, "pixel count does not match width x height");
}

double GrayImage::clamped(int x, int y) const {
  x = std::clamp(x, 0, width_ - 1);
  y = std::clamp(y, 0, height_ - 1);
  return at(x, y);
}

double GrayImage::min() const { return *std::min_element(data_.begin(), data_.end()); }
double GrayImage::max() const { return *std::max_element(data_.begin(), data_.end()); }

double GrayImage::mean() const {
  return std::accumulate(data_.begin(), data_.end(), 0.0) / static_cast<double>(data_.size());
}

void GrayImage::check_range() const {
  for (double v : data_) {
    if (!std::isfinite(v) || v < 0.0 || v > 255.0)
      throw Error(ErrorCode::InvalidArgument, "intensity outside [0, 255]");
  }
}

std::size_t EdgeImage::edge_count() const {
  return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{255}));
}

std::uint8_t quantize(double value) noexcept {
  const double r = std::floor(value + 0.5);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

std::vector<std::uint8_t> quantize(const GrayImage& img) {
  std::vector<std::uint8_t> out(img.size());
  std::transform(img.data().begin(), img.data().end(), out.begin(),
                 [](double v) { return quantize(v); });
  return out;
}

GrayImage transpose(const GrayImage& img) {
  GrayImage out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out.at(y, x) = img.at(x, y);
  return out;
}

GrayImage rotate90(const GrayImage& img) {
  const int w = img.height();
  const int h = img.width();
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(x, y) = img.at(y, img.height() - 1 - x);
  return out;
}

}  // namespace mek
