#pragma once

#include <complex>
#include <span>
#include <vector>

namespace smad::features {

/// Row-major complex grid.
struct ComplexGrid {
  int width = 0;
  int height = 0;
  std::vector<std::complex<double>> values;

  const std::complex<double>& at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
};

/// Unnormalised forward 2-D DFT, computed separably with exact twiddle
/// tables (any size, no power-of-two requirement).
ComplexGrid dft2(std::span<const double> values, int width, int height);

/// Moves the zero-frequency cell to (width/2, height/2).
std::vector<double> fftshift(std::span<const double> values, int width, int height);

/// Orthonormal type-II 2-D DCT and its inverse (type III).
std::vector<double> dct2(std::span<const double> values, int width, int height);
std::vector<double> idct2(std::span<const double> values, int width, int height);

/// Orthonormal type-II DCT applied independently to block x block tiles;
/// edge tiles are truncated to the remaining size.
std::vector<double> dct2_blockwise(std::span<const double> values, int width, int height, int block);

}  // namespace smad::features
