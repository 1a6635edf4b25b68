#include "smad/features/transforms.hpp"

#include <cmath>
#include <numbers>

#include "smad/error.hpp"

namespace smad::features {

namespace {

void check_shape(std::size_t size, int width, int height) {
  if (width <= 0 || height <= 0 || size != static_cast<std::size_t>(width) * height) {
    throw UsageError("transform input does not match its declared shape");
  }
}

/// Row-major n x n matrix with entry (k, i) = orthonormal DCT-II basis value.
std::vector<double> dct_matrix(int n) {
  std::vector<double> table(4 * static_cast<std::size_t>(n));
  for (int m = 0; m < 4 * n; ++m) table[m] = std::cos(std::numbers::pi * m / (2.0 * n));
  std::vector<double> matrix(static_cast<std::size_t>(n) * n);
  const double a0 = std::sqrt(1.0 / n);
  const double ak = std::sqrt(2.0 / n);
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      const long m = (static_cast<long>(2 * i + 1) * k) % (4L * n);
      matrix[static_cast<std::size_t>(k) * n + i] = (k == 0 ? a0 : ak) * table[m];
    }
  }
  return matrix;
}

/// out = M * v along rows (transpose = false) or M^T * v.
void transform_lines(std::vector<double>& data, int width, int height, bool along_rows,
                     const std::vector<double>& matrix, bool transpose) {
  const int n = along_rows ? width : height;
  const int lines = along_rows ? height : width;
  std::vector<double> in(n), out(n);
  for (int line = 0; line < lines; ++line) {
    for (int i = 0; i < n; ++i) {
      in[i] = along_rows ? data[static_cast<std::size_t>(line) * width + i]
                         : data[static_cast<std::size_t>(i) * width + line];
    }
    for (int k = 0; k < n; ++k) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += (transpose ? matrix[static_cast<std::size_t>(i) * n + k]
                          : matrix[static_cast<std::size_t>(k) * n + i]) * in[i];
      }
      out[k] = acc;
    }
    for (int k = 0; k < n; ++k) {
      if (along_rows) {
        data[static_cast<std::size_t>(line) * width + k] = out[k];
      } else {
        data[static_cast<std::size_t>(k) * width + line] = out[k];
      }
    }
  }
}

std::vector<double> separable_dct(std::span<const double> values, int width, int height, bool inverse) {
  check_shape(values.size(), width, height);
  std::vector<double> data(values.begin(), values.end());
  transform_lines(data, width, height, true, dct_matrix(width), inverse);
  transform_lines(data, width, height, false, dct_matrix(height), inverse);
  return data;
}

std::vector<std::complex<double>> twiddles(int n) {
  std::vector<std::complex<double>> table(n);
  for (int m = 0; m < n; ++m) {
    const double angle = -2.0 * std::numbers::pi * m / n;
    table[m] = {std::cos(angle), std::sin(angle)};
  }
  return table;
}

}  // namespace

ComplexGrid dft2(std::span<const double> values, int width, int height) {
  check_shape(values.size(), width, height);
  ComplexGrid grid{width, height, std::vector<std::complex<double>>(values.size())};

  const auto row_w = twiddles(width);
  for (int y = 0; y < height; ++y) {
    const double* row = values.data() + static_cast<std::size_t>(y) * width;
    for (int k = 0; k < width; ++k) {
      std::complex<double> acc = 0.0;
      long index = 0;
      for (int x = 0; x < width; ++x) {
        acc += row[x] * row_w[index];
        index += k;
        if (index >= width) index -= width;
      }
      grid.values[static_cast<std::size_t>(y) * width + k] = acc;
    }
  }

  const auto col_w = twiddles(height);
  std::vector<std::complex<double>> column(height);
  for (int x = 0; x < width; ++x) {
    for (int y = 0; y < height; ++y) column[y] = grid.values[static_cast<std::size_t>(y) * width + x];
    for (int k = 0; k < height; ++k) {
      std::complex<double> acc = 0.0;
      long index = 0;
      for (int y = 0; y < height; ++y) {
        acc += column[y] * col_w[index];
        index += k;
        if (index >= height) index -= height;
      }
      grid.values[static_cast<std::size_t>(k) * width + x] = acc;
    }
  }
  return grid;
}

std::vector<double> fftshift(std::span<const double> values, int width, int height) {
  check_shape(values.size(), width, height);
  std::vector<double> out(values.size());
  const int sx = width / 2;
  const int sy = height / 2;
  for (int y = 0; y < height; ++y) {
    const int ty = (y + sy) % height;
    for (int x = 0; x < width; ++x) {
      const int tx = (x + sx) % width;
      out[static_cast<std::size_t>(ty) * width + tx] = values[static_cast<std::size_t>(y) * width + x];
    }
  }
  return out;
}

std::vector<double> dct2(std::span<const double> values, int width, int height) {
  return separable_dct(values, width, height, false);
}

std::vector<double> idct2(std::span<const double> values, int width, int height) {
  return separable_dct(values, width, height, true);
}

std::vector<double> dct2_blockwise(std::span<const double> values, int width, int height, int block) {
  check_shape(values.size(), width, height);
  if (block <= 0) throw UsageError("DCT block size must be positive");
  std::vector<double> out(values.size());
  for (int by = 0; by < height; by += block) {
    const int bh = std::min(block, height - by);
    for (int bx = 0; bx < width; bx += block) {
      const int bw = std::min(block, width - bx);
      std::vector<double> tile(static_cast<std::size_t>(bw) * bh);
      for (int y = 0; y < bh; ++y) {
        for (int x = 0; x < bw; ++x) {
          tile[static_cast<std::size_t>(y) * bw + x] = values[static_cast<std::size_t>(by + y) * width + bx + x];
        }
      }
      const auto coeffs = dct2(tile, bw, bh);
      for (int y = 0; y < bh; ++y) {
        for (int x = 0; x < bw; ++x) {
          out[static_cast<std::size_t>(by + y) * width + bx + x] = coeffs[static_cast<std::size_t>(y) * bw + x];
        }
      }
    }
  }
  return out;
}

}  // namespace smad::features
