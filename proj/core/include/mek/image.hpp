#pragma once

#include <cstdint>
#include <vector>

namespace mek {

/// Row-major grayscale raster. Intensities stay real-valued in [0, 255]
/// through processing; quantization happens only when writing out.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, double fill = 0.0);
  GrayImage(int width, int height, std::vector<double> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  double& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  /// Pixel access with coordinates clamped to the border (edge replication).
  double clamped(int x, int y) const;

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  double min() const;
  double max() const;
  double mean() const;

  /// Throws InvalidArgument if any value lies outside [0, 255] or is not finite.
  void check_range() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Binary edge mask, every value 0 or 255.
struct EdgeImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t edge_count() const;
};

/// Real-valued raster without the [0, 255] constraint (gradients, NMS output).
struct RealRaster {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// Round half-up and clamp to [0, 255].
std::uint8_t quantize(double value) noexcept;
std::vector<std::uint8_t> quantize(const GrayImage& img);

GrayImage transpose(const GrayImage& img);
/// Rotates a quarter turn clockwise: output(x, y) = input(y, H - 1 - x).
GrayImage rotate90(const GrayImage& img);

}  // namespace mek
