#include "smad/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>

#include "smad/error.hpp"
#include "smad/util.hpp"

namespace smad {

namespace {

cv::Mat to_mat(const Raster& raster) {
  const int type = raster.channels == 1 ? CV_8UC1 : CV_8UC3;
  cv::Mat mat(raster.height, raster.width, type);
  std::copy(raster.data.begin(), raster.data.end(), mat.data);
  if (raster.channels == 3) {
    for (int y = 0; y < mat.rows; ++y) {
      auto* row = mat.ptr<cv::Vec3b>(y);
      for (int x = 0; x < mat.cols; ++x) std::swap(row[x][0], row[x][2]);
    }
  }
  return mat;
}

}  // namespace

Raster decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw DataError("empty image payload");
  const cv::Mat buffer(1, static_cast<int>(bytes.size()), CV_8UC1,
                       const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat decoded;
  try {
    decoded = cv::imdecode(buffer, cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception& e) {
    throw DataError(std::string("image decode failed: ") + e.what());
  }
  if (decoded.empty()) throw DataError("payload is not a decodable image");
  if (decoded.depth() != CV_8U) {
    cv::Mat converted;
    const double scale = decoded.depth() == CV_16U ? 1.0 / 257.0 : 1.0;
    decoded.convertTo(converted, CV_8U, scale);
    decoded = converted;
  }

  Raster raster;
  raster.width = decoded.cols;
  raster.height = decoded.rows;
  const int channels = decoded.channels();
  raster.channels = channels == 1 || channels == 2 ? 1 : 3;
  raster.data.resize(static_cast<std::size_t>(raster.width) * raster.height * raster.channels);
  for (int y = 0; y < decoded.rows; ++y) {
    const std::uint8_t* row = decoded.ptr<std::uint8_t>(y);
    for (int x = 0; x < decoded.cols; ++x) {
      const std::uint8_t* px = row + static_cast<std::size_t>(x) * channels;
      std::uint8_t* out = &raster.data[(static_cast<std::size_t>(y) * raster.width + x) * raster.channels];
      if (raster.channels == 1) {
        out[0] = px[0];
      } else {
        // BGR(A) -> RGB, alpha dropped
        out[0] = px[2];
        out[1] = px[1];
        out[2] = px[0];
      }
    }
  }
  return raster;
}

Raster load_image(const std::filesystem::path& path) {
  try {
    return decode_image(read_file_bytes(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

GrayImage to_gray(const Raster& raster) {
  GrayImage gray(raster.width, raster.height);
  if (raster.channels == 1) {
    gray.pixels = raster.data;
    return gray;
  }
  for (std::size_t i = 0; i < gray.pixels.size(); ++i) {
    const unsigned r = raster.data[i * 3];
    const unsigned g = raster.data[i * 3 + 1];
    const unsigned b = raster.data[i * 3 + 2];
    gray.pixels[i] = static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
  }
  return gray;
}

Raster to_raster(const GrayImage& image) {
  return Raster{image.width, image.height, 1, image.pixels};
}

std::vector<std::uint8_t> encode_png(const Raster& raster) {
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", to_mat(raster), out)) throw Error("PNG encoding failed");
  return out;
}

std::vector<std::uint8_t> encode_png(const GrayImage& image) { return encode_png(to_raster(image)); }

void save_png(const std::filesystem::path& path, const Raster& raster) {
  write_file_bytes(path, encode_png(raster));
}

void save_png(const std::filesystem::path& path, const GrayImage& image) {
  save_png(path, to_raster(image));
}

GrayImage jpeg_roundtrip(const GrayImage& image, int quality) {
  if (quality < 1 || quality > 100) throw UsageError("JPEG quality must be in [1,100]");
  const cv::Mat mat(image.height, image.width, CV_8UC1, const_cast<std::uint8_t*>(image.pixels.data()));
  std::vector<std::uint8_t> encoded;
  const std::vector<int> params{cv::IMWRITE_JPEG_QUALITY, quality, cv::IMWRITE_JPEG_OPTIMIZE, 0,
                                cv::IMWRITE_JPEG_PROGRESSIVE, 0};
  if (!cv::imencode(".jpg", mat, encoded, params)) throw Error("JPEG encoding failed");
  const cv::Mat decoded = cv::imdecode(encoded, cv::IMREAD_GRAYSCALE);
  if (decoded.empty() || decoded.cols != image.width || decoded.rows != image.height) {
    throw Error("JPEG decoding failed");
  }
  GrayImage out(image.width, image.height);
  for (int y = 0; y < decoded.rows; ++y) {
    std::copy_n(decoded.ptr<std::uint8_t>(y), decoded.cols, &out.at(0, y));
  }
  return out;
}

GrayImage resize_bilinear(const GrayImage& image, int width, int height) {
  if (width <= 0 || height <= 0) throw UsageError("resize target must be positive");
  if (image.width == width && image.height == height) return image;
  GrayImage out(width, height);
  const double sx = static_cast<double>(image.width) / width;
  const double sy = static_cast<double>(image.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      const double top = image.at(x0, y0) + wx * (image.at(x1, y0) - image.at(x0, y0));
      const double bottom = image.at(x0, y1) + wx * (image.at(x1, y1) - image.at(x0, y1));
      const double value = top + wy * (bottom - top);
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::floor(value + 0.5), 0.0, 255.0));
    }
  }
  return out;
}

}  // namespace smad
