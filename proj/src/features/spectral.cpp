#include <cmath>

#include "smad/error.hpp"
#include "smad/features/extractors.hpp"
#include "smad/features/transforms.hpp"

namespace smad::features {

namespace {

std::vector<double> as_real(const GrayImage& face) {
  return std::vector<double>(face.pixels.begin(), face.pixels.end());
}

}  // namespace

Extraction extract_dft(const GrayImage& face) {
  const ComplexGrid spectrum = dft2(as_real(face), face.width, face.height);
  std::vector<double> magnitude(spectrum.values.size());
  for (std::size_t i = 0; i < magnitude.size(); ++i) {
    magnitude[i] = std::log1p(std::abs(spectrum.values[i]));
  }
  auto shifted = fftshift(magnitude, face.width, face.height);
  Extraction out;
  out.vector = {"DFT", shifted};
  out.map = make_map(face.width, face.height, 1, std::move(shifted), "DFT");
  return out;
}

Extraction extract_dct2(const GrayImage& face, int block) {
  if (block < 0) throw UsageError("DCT block size must be >= 0");
  const auto pixels = as_real(face);
  auto coeffs = block == 0 ? dct2(pixels, face.width, face.height)
                           : dct2_blockwise(pixels, face.width, face.height, block);
  for (auto& c : coeffs) c = std::log1p(std::abs(c));
  Extraction out;
  out.vector = {"DCT2", coeffs};
  out.map = make_map(face.width, face.height, 1, std::move(coeffs), "DCT2");
  return out;
}

}  // namespace smad::features
