#pragma once

#include <vector>

#include "mek/image.hpp"

namespace mek {

struct HogParams {
  int resize_to = 128;  ///< square resize before extraction, 0 keeps the native size
  int cell_size = 8;
  int block_cells = 2;
  int block_stride = 1;  ///< in cells
  int bins = 9;
  double clip = 0.2;
  double epsilon = 1e-5;

  void validate() const;
};

using FeatureVector = std::vector<double>;

/// Descriptor length for an image of the given size; throws
/// IncompatibleDimensions when the geometry does not fit the parameters.
std::size_t hog_dim(const HogParams& params, int width, int height);

/// Per-cell orientation histograms (cells_y x cells_x x bins, row-major) of an
/// image that already has its working size.
std::vector<double> hog_cell_histograms(const GrayImage& img, const HogParams& params);

/// Histogram of oriented gradients: unsigned orientations over [0, 180),
/// linear vote splitting between adjacent bins, L2-Hys block normalization.
FeatureVector hog(const GrayImage& img, const HogParams& params = {});

}  // namespace mek
