#include "mek/features.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mek/error.hpp"
#include "mek/imageproc.hpp"

namespace mek {
namespace {

constexpr double kPi = 3.14159265358979323846;

struct Geometry {
  int width = 0;
  int height = 0;
  int cells_x = 0;
  int cells_y = 0;
  int blocks_x = 0;
  int blocks_y = 0;
};

Geometry geometry(const HogParams& p, int width, int height) {
  p.validate();
  Geometry g;
  g.width = p.resize_to > 0 ? p.resize_to : width;
  g.height = p.resize_to > 0 ? p.resize_to : height;
  if (width < 1 || height < 1)
    throw Error(ErrorCode::IncompatibleDimensions, "empty image");
  if (g.width % p.cell_size != 0 || g.height % p.cell_size != 0)
    throw Error(ErrorCode::IncompatibleDimensions,
                std::to_string(g.width) + "x" + std::to_string(g.height) + " not divisible by cell size " +
                    std::to_string(p.cell_size));
  g.cells_x = g.width / p.cell_size;
  g.cells_y = g.height / p.cell_size;
  if (g.cells_x < p.block_cells || g.cells_y < p.block_cells)
    throw Error(ErrorCode::IncompatibleDimensions, "image smaller than one block");
  g.blocks_x = (g.cells_x - p.block_cells) / p.block_stride + 1;
  g.blocks_y = (g.cells_y - p.block_cells) / p.block_stride + 1;
  return g;
}

}  // namespace

void HogParams::validate() const {
  if (resize_to < 0) throw Error(ErrorCode::InvalidArgument, "resize must be >= 0");
  if (cell_size < 2) throw Error(ErrorCode::InvalidArgument, "cell size must be >= 2");
  if (block_cells < 1 || block_stride < 1) throw Error(ErrorCode::InvalidArgument, "block geometry must be positive");
  if (bins < 2) throw Error(ErrorCode::InvalidArgument, "bins must be >= 2");
  if (!(clip > 0.0 && clip <= 1.0)) throw Error(ErrorCode::InvalidArgument, "clip must lie in (0, 1]");
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
}

std::size_t hog_dim(const HogParams& params, int width, int height) {
  const Geometry g = geometry(params, width, height);
  return static_cast<std::size_t>(g.blocks_x) * g.blocks_y * params.block_cells * params.block_cells * params.bins;
}

std::vector<double> hog_cell_histograms(const GrayImage& img, const HogParams& params) {
  HogParams native = params;
  native.resize_to = 0;
  const Geometry g = geometry(native, img.width(), img.height());
  const int bins = params.bins;
  const double bin_width = 180.0 / bins;
  std::vector<double> hist(static_cast<std::size_t>(g.cells_x) * g.cells_y * bins, 0.0);

  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const double dx = img.clamped(x + 1, y) - img.clamped(x - 1, y);
      const double dy = img.clamped(x, y + 1) - img.clamped(x, y - 1);
      const double mag = std::sqrt(dx * dx + dy * dy);
      if (mag == 0.0) continue;
      double angle = std::atan2(dy, dx) * 180.0 / kPi;
      if (angle < 0.0) angle += 180.0;
      if (angle >= 180.0) angle -= 180.0;
      // Bin centres sit at (i + 0.5) * bin_width; the vote splits linearly
      // between the two nearest centres, wrapping around 180 degrees.
      const double pos = angle / bin_width - 0.5;
      const double lower = std::floor(pos);
      const double frac = pos - lower;
      const int b0 = (static_cast<int>(lower) + bins) % bins;
      const int b1 = (b0 + 1) % bins;
      const std::size_t cell =
          (static_cast<std::size_t>(y / params.cell_size) * g.cells_x + x / params.cell_size) * bins;
      hist[cell + b0] += mag * (1.0 - frac);
      hist[cell + b1] += mag * frac;
    }
  }
  return hist;
}

FeatureVector hog(const GrayImage& img, const HogParams& params) {
  const Geometry g = geometry(params, img.width(), img.height());
  const GrayImage work =
      params.resize_to > 0 ? resize_bilinear(img, params.resize_to, params.resize_to) : img;
  const std::vector<double> cells = hog_cell_histograms(work, params);

  const int bins = params.bins;
  const std::size_t block_len = static_cast<std::size_t>(params.block_cells) * params.block_cells * bins;
  FeatureVector out;
  out.reserve(static_cast<std::size_t>(g.blocks_x) * g.blocks_y * block_len);
  std::vector<double> block(block_len);
  const double eps_sq = params.epsilon * params.epsilon;

  auto l2_normalize = [&] {
    double norm_sq = 0.0;
    for (double v : block) norm_sq += v * v;
    const double inv = 1.0 / std::sqrt(norm_sq + eps_sq);
    for (double& v : block) v *= inv;
  };

  for (int by = 0; by < g.blocks_y; ++by) {
    for (int bx = 0; bx < g.blocks_x; ++bx) {
      std::size_t k = 0;
      for (int cy = 0; cy < params.block_cells; ++cy) {
        for (int cx = 0; cx < params.block_cells; ++cx) {
          const int cell_y = by * params.block_stride + cy;
          const int cell_x = bx * params.block_stride + cx;
          const std::size_t base = (static_cast<std::size_t>(cell_y) * g.cells_x + cell_x) * bins;
          for (int b = 0; b < bins; ++b) block[k++] = cells[base + b];
        }
      }
      l2_normalize();
      for (double& v : block) v = std::min(v, params.clip);
      l2_normalize();
      out.insert(out.end(), block.begin(), block.end());
    }
  }
  return out;
}

}  // namespace mek
