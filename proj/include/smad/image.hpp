#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace smad {

/// Decoded image of any size; interleaved 8-bit samples, RGB order when
/// channels == 3.
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;

  std::uint8_t at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

/// Single-channel 8-bit image, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return pixels.size(); }
  bool empty() const { return pixels.empty(); }

  bool operator==(const GrayImage&) const = default;
};

/// Decodes PNG/JPEG (anything the codec supports). Throws DataError when
/// the bytes are not an image.
Raster decode_image(std::span<const std::uint8_t> bytes);
Raster load_image(const std::filesystem::path& path);

/// ITU-R BT.601 luma, rounded half-up, computed in integer arithmetic.
GrayImage to_gray(const Raster& raster);

Raster to_raster(const GrayImage& image);

std::vector<std::uint8_t> encode_png(const Raster& raster);
std::vector<std::uint8_t> encode_png(const GrayImage& image);
void save_png(const std::filesystem::path& path, const GrayImage& image);
void save_png(const std::filesystem::path& path, const Raster& raster);

/// Baseline JPEG round trip of a grayscale image (single component, so no
/// chroma subsampling is involved).
GrayImage jpeg_roundtrip(const GrayImage& image, int quality);

/// Bilinear resize with pixel-centre alignment; results rounded half-up.
GrayImage resize_bilinear(const GrayImage& image, int width, int height);

}  // namespace smad
