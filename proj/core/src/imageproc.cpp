#include "mek/imageproc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mek/error.hpp"

namespace mek {
namespace {

constexpr double kPi = 3.14159265358979323846;

void check_targets(const BcetTargets& t) {
  if (!(t.min >= 0.0 && t.min < t.mean && t.mean < t.max && t.max <= 255.0))
    throw Error(ErrorCode::InvalidTargets, "targets must satisfy 0 <= min < mean < max <= 255");
}

RealRaster make_raster(int width, int height) {
  return RealRaster{width, height, std::vector<double>(static_cast<std::size_t>(width) * height, 0.0)};
}

struct Histogram1D {
  std::vector<double> values;  // ascending, distinct
  std::vector<std::size_t> counts;
};

Histogram1D distinct_values(const GrayImage& img) {
  std::vector<double> sorted = img.data();
  std::sort(sorted.begin(), sorted.end());
  Histogram1D h;
  for (double v : sorted) {
    if (h.values.empty() || h.values.back() != v) {
      h.values.push_back(v);
      h.counts.push_back(1);
    } else {
      ++h.counts.back();
    }
  }
  return h;
}

// Nearest centroid, ties to the lower index.
int nearest(double v, const std::vector<double>& centroids) {
  int best = 0;
  double best_d = std::abs(v - centroids[0]);
  for (int j = 1; j < static_cast<int>(centroids.size()); ++j) {
    const double d = std::abs(v - centroids[j]);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

}  // namespace

namespace {

// Output mean is strictly decreasing in gamma, so bisect on log(gamma).
void fit_power_curve(const GrayImage& img, const BcetTargets& targets, BcetCoefficients& co) {
  const Histogram1D hist = distinct_values(img);
  co.shape = BcetCoefficients::Shape::Power;
  co.lo = hist.values.front();
  co.hi = hist.values.back();
  co.out_lo = targets.min;
  co.out_hi = targets.max;
  const double n = static_cast<double>(img.size());
  const double goal = (targets.mean - targets.min) / (targets.max - targets.min);
  auto mean_at = [&](double g) {
    double acc = 0.0;
    for (std::size_t i = 0; i < hist.values.size(); ++i)
      acc += static_cast<double>(hist.counts[i]) * std::pow((hist.values[i] - co.lo) / (co.hi - co.lo), g);
    return acc / n;
  };
  double lo = -30.0, hi = 30.0;
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean_at(std::exp(mid)) > goal ? lo : hi) = mid;
  }
  co.gamma = std::exp(0.5 * (lo + hi));
}

}  // namespace

BcetCoefficients bcet_fit(const GrayImage& img, const BcetTargets& targets) {
  check_targets(targets);
  if (img.empty()) throw Error(ErrorCode::DegenerateImage, "empty image");
  const double l = img.min();
  const double h = img.max();
  if (l == h) throw Error(ErrorCode::DegenerateImage, "image has a single intensity");
  const double n = static_cast<double>(img.size());
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double v : img.data()) {
    sum += v;
    sum_sq += v * v;
  }
  const double e = sum / n;
  const double s = sum_sq / n;
  const double L = targets.min;
  const double H = targets.max;
  const double E = targets.mean;

  const double num = h * h * (E - L) - s * (H - L) + l * l * (H - E);
  const double den = 2.0 * (h * (E - L) - e * (H - L) + l * (H - E));
  const double scale = std::abs(h * (E - L)) + std::abs(e * (H - L)) + std::abs(l * (H - E));
  BcetCoefficients co;
  if (std::abs(den) <= 1e-12 * std::max(1.0, scale)) {
    co.linear = true;
    co.shape = BcetCoefficients::Shape::Linear;
    co.slope = (H - L) / (h - l);
    co.offset = L - co.slope * l;
    return co;
  }
  co.b = num / den;
  co.a = (H - L) / ((h - l) * (h + l - 2.0 * co.b));
  co.c = L - co.a * (l - co.b) * (l - co.b);
  if (co.b > l && co.b < h) fit_power_curve(img, targets, co);
  return co;
}

GrayImage bcet(const GrayImage& img, const BcetTargets& targets) {
  const BcetCoefficients co = bcet_fit(img, targets);
  const double l = img.min();
  const double h = img.max();

  GrayImage out(img.width(), img.height());
  const auto& src = img.data();
  auto& dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double x = src[i];
    double y;
    if (x == l) {
      y = targets.min;
    } else if (x == h) {
      y = targets.max;
    } else {
      y = co.apply(x);
    }
    dst[i] = std::clamp(y, 0.0, 255.0);
  }
  return out;
}

std::vector<double> kmeans_seed_centroids(const GrayImage& img, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "k must be at least 2");
  const Histogram1D hist = distinct_values(img);
  if (static_cast<int>(hist.values.size()) < k)
    throw Error(ErrorCode::TooFewDistinctValues,
                std::to_string(hist.values.size()) + " distinct intensities for k=" + std::to_string(k));
  std::mt19937_64 rng(seed);
  std::vector<double> centroids;
  centroids.push_back(hist.values[rng() % hist.values.size()]);
  while (static_cast<int>(centroids.size()) < k) {
    double best_v = hist.values.front();
    double best_d = -1.0;
    for (double v : hist.values) {
      double d = std::numeric_limits<double>::infinity();
      for (double c : centroids) d = std::min(d, std::abs(v - c));
      if (d > best_d) {
        best_d = d;
        best_v = v;
      }
    }
    centroids.push_back(best_v);
  }
  return centroids;
}

SegmentationResult kmeans_segment(const GrayImage& img, const KMeansParams& params) {
  if (params.max_iter < 1) throw Error(ErrorCode::InvalidArgument, "max_iter must be positive");
  if (!(params.tol >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tol must be non-negative");
  std::vector<double> centroids = kmeans_seed_centroids(img, params.k, params.seed);
  const Histogram1D hist = distinct_values(img);
  const std::size_t nv = hist.values.size();
  const int k = params.k;

  SegmentationResult res;
  res.width = img.width();
  res.height = img.height();

  std::vector<int> assign(nv);
  auto assign_step = [&] {
    double inertia = 0.0;
    for (std::size_t i = 0; i < nv; ++i) {
      assign[i] = nearest(hist.values[i], centroids);
      const double d = hist.values[i] - centroids[assign[i]];
      inertia += static_cast<double>(hist.counts[i]) * d * d;
    }
    return inertia;
  };

  for (int iter = 0; iter < params.max_iter; ++iter) {
    res.inertia_trace.push_back(assign_step());
    std::vector<double> sum(k, 0.0);
    std::vector<double> weight(k, 0.0);
    for (std::size_t i = 0; i < nv; ++i) {
      sum[assign[i]] += static_cast<double>(hist.counts[i]) * hist.values[i];
      weight[assign[i]] += static_cast<double>(hist.counts[i]);
    }
    double movement = 0.0;
    for (int j = 0; j < k; ++j) {
      if (weight[j] == 0.0) continue;  // empty cluster keeps its centroid
      const double next = sum[j] / weight[j];
      movement = std::max(movement, std::abs(next - centroids[j]));
      centroids[j] = next;
    }
    ++res.iterations;
    if (movement < params.tol) break;
  }
  res.inertia = assign_step();
  res.inertia_trace.push_back(res.inertia);

  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return centroids[a] < centroids[b]; });
  std::vector<int> rank(k);
  for (int r = 0; r < k; ++r) {
    rank[order[r]] = r;
    res.centroids.push_back(centroids[order[r]]);
  }

  res.labels.resize(img.size());
  const auto& px = img.data();
  for (std::size_t p = 0; p < px.size(); ++p) {
    const auto it = std::lower_bound(hist.values.begin(), hist.values.end(), px[p]);
    res.labels[p] = rank[assign[static_cast<std::size_t>(it - hist.values.begin())]];
  }
  return res;
}

GrayImage remap_to_centroids(const SegmentationResult& seg) {
  GrayImage out(seg.width, seg.height);
  auto& dst = out.data();
  for (std::size_t p = 0; p < dst.size(); ++p) {
    dst[p] = static_cast<double>(quantize(seg.centroids.at(static_cast<std::size_t>(seg.labels[p]))));
  }
  return out;
}

void CannyParams::validate() const {
  if (!(gaussian_sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "gaussian sigma must be positive");
  if (!(low_threshold_ratio > 0.0 && low_threshold_ratio < 1.0) ||
      !(high_threshold_ratio > 0.0 && high_threshold_ratio < 1.0))
    throw Error(ErrorCode::InvalidArgument, "threshold ratios must lie in (0, 1)");
  if (!(low_threshold_ratio < high_threshold_ratio))
    throw Error(ErrorCode::InvalidArgument, "low threshold ratio must be below the high ratio");
}

std::array<double, 25> gaussian_kernel_5x5(double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be positive");
  std::array<double, 25> k{};
  double total = 0.0;
  for (int dy = -2; dy <= 2; ++dy) {
    for (int dx = -2; dx <= 2; ++dx) {
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      k[(dy + 2) * 5 + (dx + 2)] = v;
      total += v;
    }
  }
  for (double& v : k) v /= total;
  return k;
}

GrayImage gaussian_blur_5x5(const GrayImage& img, double sigma) {
  const auto kernel = gaussian_kernel_5x5(sigma);
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double acc = 0.0;
      for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) acc += kernel[(dy + 2) * 5 + (dx + 2)] * img.clamped(x + dx, y + dy);
      out.at(x, y) = std::clamp(acc, 0.0, 255.0);
    }
  }
  return out;
}

Gradients sobel_gradients(const GrayImage& img) {
  if (img.width() < 3 || img.height() < 3) throw Error(ErrorCode::ImageTooSmall, "Sobel needs at least 3x3");
  const int w = img.width();
  const int h = img.height();
  Gradients g{make_raster(w, h), make_raster(w, h), make_raster(w, h), make_raster(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double tl = img.clamped(x - 1, y - 1), tc = img.clamped(x, y - 1), tr = img.clamped(x + 1, y - 1);
      const double ml = img.clamped(x - 1, y), mr = img.clamped(x + 1, y);
      const double bl = img.clamped(x - 1, y + 1), bc = img.clamped(x, y + 1), br = img.clamped(x + 1, y + 1);
      const double gx = (tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl);
      const double gy = (bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr);
      g.gx.at(x, y) = gx;
      g.gy.at(x, y) = gy;
      g.magnitude.at(x, y) = std::sqrt(gx * gx + gy * gy);
      g.direction.at(x, y) = std::atan2(gy, gx);
    }
  }
  return g;
}

RealRaster non_max_suppression(const Gradients& grad) {
  const int w = grad.magnitude.width;
  const int h = grad.magnitude.height;
  RealRaster out = make_raster(w, h);
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const double m = grad.magnitude.at(x, y);
      if (m <= 0.0) continue;
      double deg = grad.direction.at(x, y) * 180.0 / kPi;
      if (deg < 0.0) deg += 180.0;
      if (deg >= 180.0) deg -= 180.0;
      int dx, dy;
      if (deg < 22.5 || deg >= 157.5) {
        dx = 1, dy = 0;
      } else if (deg < 67.5) {
        dx = 1, dy = 1;
      } else if (deg < 112.5) {
        dx = 0, dy = 1;
      } else {
        dx = -1, dy = 1;
      }
      const double ahead = grad.magnitude.at(x + dx, y + dy);
      const double behind = grad.magnitude.at(x - dx, y - dy);
      // Plateaus of equal magnitude keep only the pixel furthest along the gradient.
      if (m > ahead && m >= behind) out.at(x, y) = m;
    }
  }
  return out;
}

ThresholdMap double_threshold(const RealRaster& nms, double low, double high) {
  if (!(low <= high)) throw Error(ErrorCode::InvalidArgument, "low threshold exceeds high threshold");
  ThresholdMap map{nms.width, nms.height, std::vector<EdgeClass>(nms.data.size(), EdgeClass::None)};
  for (std::size_t i = 0; i < nms.data.size(); ++i) {
    const double m = nms.data[i];
    if (m <= 0.0) continue;
    if (m >= high) {
      map.data[i] = EdgeClass::Strong;
    } else if (m >= low) {
      map.data[i] = EdgeClass::Weak;
    }
  }
  return map;
}

EdgeImage hysteresis(const ThresholdMap& map) {
  const int w = map.width;
  const int h = map.height;
  EdgeImage out{w, h, std::vector<std::uint8_t>(map.data.size(), 0)};
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < map.data.size(); ++i) {
    if (map.data[i] == EdgeClass::Strong) {
      out.data[i] = 255;
      stack.push_back(i);
    }
  }
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    const int x = static_cast<int>(i % static_cast<std::size_t>(w));
    const int y = static_cast<int>(i / static_cast<std::size_t>(w));
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
        if (out.data[j] == 0 && map.data[j] == EdgeClass::Weak) {
          out.data[j] = 255;
          stack.push_back(j);
        }
      }
    }
  }
  return out;
}

EdgeImage canny(const GrayImage& img, const CannyParams& params) {
  params.validate();
  if (img.width() < 5 || img.height() < 5) throw Error(ErrorCode::ImageTooSmall, "Canny needs at least 5x5");
  const GrayImage smooth = gaussian_blur_5x5(img, params.gaussian_sigma);
  const Gradients grad = sobel_gradients(smooth);
  const double max_mag = *std::max_element(grad.magnitude.data.begin(), grad.magnitude.data.end());
  if (max_mag <= 0.0)
    return EdgeImage{img.width(), img.height(), std::vector<std::uint8_t>(img.size(), 0)};
  const RealRaster nms = non_max_suppression(grad);
  return hysteresis(double_threshold(nms, params.low_threshold_ratio * max_mag,
                                     params.high_threshold_ratio * max_mag));
}

EdgeImage edge_pipeline(const GrayImage& img, const EdgePipelineParams& params) {
  params.canny.validate();
  const GrayImage enhanced = bcet(img, params.bcet);
  const SegmentationResult seg = kmeans_segment(enhanced, params.kmeans);
  return canny(remap_to_centroids(seg), params.canny);
}

GrayImage resize_bilinear(const GrayImage& img, int width, int height) {
  if (width < 1 || height < 1 || img.empty())
    throw Error(ErrorCode::InvalidArgument, "resize needs a non-empty source and positive target size");
  if (width == img.width() && height == img.height()) return img;
  GrayImage out(width, height);
  const double sx = static_cast<double>(img.width()) / width;
  const double sy = static_cast<double>(img.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height() - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width() - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double tx = fx - x0;
      const double top = img.at(x0, y0) * (1.0 - tx) + img.at(x1, y0) * tx;
      const double bottom = img.at(x0, y1) * (1.0 - tx) + img.at(x1, y1) * tx;
      out.at(x, y) = std::clamp(top * (1.0 - ty) + bottom * ty, 0.0, 255.0);
    }
  }
  return out;
}

}  // namespace mek
