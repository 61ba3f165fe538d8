#pragma once

#include <cmath>

#include <array>
#include <cstdint>
#include <vector>

#include "mek/image.hpp"

namespace mek {

struct BcetTargets {
  double min = 0.0;
  double max = 255.0;
  double mean = 110.0;
};

/// Coefficients of the BCET parabola y = a (x - b)^2 + c. When the fit
/// degenerates (b at infinity) the mapping is the linear stretch
/// y = slope * x + offset, which then meets the target mean exactly.
/// When the parabola's vertex falls strictly inside the input range the
/// mapping is the power curve y = L + (H - L) ((x - l) / (h - l))^gamma,
/// with gamma chosen so the output mean meets the target.
struct BcetCoefficients {
  enum class Shape { Parabola, Linear, Power };

  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  bool linear = false;
  double slope = 0.0;
  double offset = 0.0;
  Shape shape = Shape::Parabola;
  double gamma = 1.0;
  double lo = 0.0, hi = 1.0;            ///< input range for the power curve
  double out_lo = 0.0, out_hi = 255.0;  ///< target range for the power curve

  double apply(double x) const {
    switch (shape) {
      case Shape::Linear: return slope * x + offset;
      case Shape::Power: return out_lo + (out_hi - out_lo) * std::pow((x - lo) / (hi - lo), gamma);
      default: return a * (x - b) * (x - b) + c;
    }
  }
};

/// Fits the parabola from the input min, max, mean and mean square.
BcetCoefficients bcet_fit(const GrayImage& img, const BcetTargets& targets = {});

/// Balance contrast enhancement. Output extremes equal the target extremes and
/// the output mean equals the target mean, unless nearly every pixel sits at
/// an input extreme and no monotone mapping can reach it.
GrayImage bcet(const GrayImage& img, const BcetTargets& targets = {});

struct KMeansParams {
  int k = 4;
  int max_iter = 100;
  double tol = 1e-4;
  std::uint64_t seed = 0;
};

struct SegmentationResult {
  int width = 0;
  int height = 0;
  std::vector<int> labels;        ///< per pixel, index into centroids
  std::vector<double> centroids;  ///< ascending
  double inertia = 0.0;
  /// Inertia of each assignment step, in iteration order.
  std::vector<double> inertia_trace;
  int iterations = 0;
};

/// Initial centroids from farthest-point seeding over the distinct intensities.
/// The first seed is drawn from the distinct values with the given seed.
std::vector<double> kmeans_seed_centroids(const GrayImage& img, int k, std::uint64_t seed);

/// Lloyd's algorithm on 1-D intensities.
SegmentationResult kmeans_segment(const GrayImage& img, const KMeansParams& params = {});

/// Replaces each pixel by its (rounded) cluster centroid.
GrayImage remap_to_centroids(const SegmentationResult& seg);

struct CannyParams {
  double gaussian_sigma = 1.4;
  double low_threshold_ratio = 0.05;
  double high_threshold_ratio = 0.15;

  void validate() const;
};

std::array<double, 25> gaussian_kernel_5x5(double sigma);

/// Normalized 5x5 Gaussian convolution with edge replication.
GrayImage gaussian_blur_5x5(const GrayImage& img, double sigma);

struct Gradients {
  RealRaster gx;
  RealRaster gy;
  RealRaster magnitude;
  RealRaster direction;  ///< atan2(gy, gx), radians
};

/// 3x3 Sobel operator; x grows rightwards and y downwards, borders replicated.
Gradients sobel_gradients(const GrayImage& img);

/// Thin edges by keeping local maxima along the gradient direction quantized
/// to 0, 45, 90 or 135 degrees. Border pixels are always suppressed.
RealRaster non_max_suppression(const Gradients& grad);

enum class EdgeClass : std::uint8_t { None = 0, Weak = 1, Strong = 2 };

struct ThresholdMap {
  int width = 0;
  int height = 0;
  std::vector<EdgeClass> data;
};

/// Absolute thresholds; requires low <= high. Zero responses are never edges.
ThresholdMap double_threshold(const RealRaster& nms, double low, double high);

/// Keeps strong pixels and weak pixels 8-connected to a strong pixel.
EdgeImage hysteresis(const ThresholdMap& map);

/// Full Canny chain. Thresholds are ratios of the maximum gradient magnitude
/// (taken before suppression).
EdgeImage canny(const GrayImage& img, const CannyParams& params = {});

struct EdgePipelineParams {
  BcetTargets bcet;
  KMeansParams kmeans;
  CannyParams canny;
};

/// BCET, K-means segmentation, centroid remap, then Canny.
EdgeImage edge_pipeline(const GrayImage& img, const EdgePipelineParams& params = {});

/// Bilinear resampling with pixel-center alignment.
GrayImage resize_bilinear(const GrayImage& img, int width, int height);

}  // namespace mek
