#include "mek/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "mek/error.hpp"

namespace mek {
namespace {

void write_u8(const cv::Mat& mat, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), mat);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

}  // namespace

GrayImage read_image(const std::filesystem::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw Error(ErrorCode::IoError, "cannot decode image " + path.string());
  if (mat.depth() != CV_8U) throw Error(ErrorCode::IoError, "only 8-bit images are supported: " + path.string());
  const int channels = mat.channels();
  if (channels != 1 && channels != 3 && channels != 4)
    throw Error(ErrorCode::IoError, "unsupported channel count in " + path.string());

  GrayImage img(mat.cols, mat.rows);
  for (int y = 0; y < mat.rows; ++y) {
    const std::uint8_t* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < mat.cols; ++x) {
      const std::uint8_t* px = row + static_cast<std::ptrdiff_t>(x) * channels;
      if (channels == 1) {
        img.at(x, y) = px[0];
      } else {
        // OpenCV stores colour as BGR(A).
        img.at(x, y) = 0.299 * px[2] + 0.587 * px[1] + 0.114 * px[0];
      }
    }
  }
  return img;
}

void write_png(const GrayImage& img, const std::filesystem::path& path) {
  cv::Mat mat(img.height(), img.width(), CV_8UC1);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) mat.at<std::uint8_t>(y, x) = quantize(img.at(x, y));
  write_u8(mat, path);
}

void write_png(const EdgeImage& img, const std::filesystem::path& path) {
  cv::Mat mat(img.height, img.width, CV_8UC1);
  std::copy(img.data.begin(), img.data.end(), mat.data);
  write_u8(mat, path);
}

bool is_image_file(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace mek
