#include <algorithm>
#include <cmath>
#include <numbers>

#include "smad/error.hpp"
#include "smad/features/extractors.hpp"

namespace smad::features {

namespace {

constexpr double kNormEpsilon = 1e-6;

void draw_stroke(std::vector<double>& canvas, int width, int height, double cx, double cy,
                 double angle, double half_length, double intensity) {
  const double dx = std::cos(angle);
  const double dy = std::sin(angle);
  const int steps = std::max(2, static_cast<int>(std::ceil(4 * half_length)));
  for (int s = -steps; s <= steps; ++s) {
    const double t = half_length * s / steps;
    const int x = static_cast<int>(std::lround(cx + t * dx));
    const int y = static_cast<int>(std::lround(cy + t * dy));
    if (x < 0 || y < 0 || x >= width || y >= height) continue;
    double& px = canvas[static_cast<std::size_t>(y) * width + x];
    px = std::max(px, intensity);
  }
}

}  // namespace

HogResult extract_hog_detailed(const GrayImage& face, const HogParams& params) {
  if (params.cells_x < 1 || params.cells_y < 1 || params.bins < 1 || params.block < 1) {
    throw UsageError("HOG parameters must be positive");
  }
  if (face.width < params.cells_x || face.height < params.cells_y) {
    throw UsageError("image smaller than the HOG cell grid");
  }
  const int w = face.width;
  const int h = face.height;
  const int bins = params.bins;
  const double bin_width = 180.0 / bins;

  std::vector<double> cells(params.dim(), 0.0);
  auto cell_at = [&](int cx, int cy) { return &cells[(static_cast<std::size_t>(cy) * params.cells_x + cx) * bins]; };

  for (int y = 0; y < h; ++y) {
    const int cy = y * params.cells_y / h;
    for (int x = 0; x < w; ++x) {
      const double gx = static_cast<double>(face.at(std::min(x + 1, w - 1), y)) - face.at(std::max(x - 1, 0), y);
      const double gy = static_cast<double>(face.at(x, std::min(y + 1, h - 1))) - face.at(x, std::max(y - 1, 0));
      const double magnitude = std::hypot(gx, gy);
      if (magnitude == 0.0) continue;
      double angle = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
      if (angle < 0.0) angle += 180.0;
      if (angle >= 180.0) angle -= 180.0;
      const double position = angle / bin_width;
      const int lower = static_cast<int>(std::floor(position));
      const double frac = position - lower;
      double* hist = cell_at(x * params.cells_x / w, cy);
      hist[lower % bins] += magnitude * (1.0 - frac);
      hist[(lower + 1) % bins] += magnitude * frac;
    }
  }

  std::vector<double> descriptor(cells.size(), 0.0);
  const int half = params.block / 2;
  for (int cy = 0; cy < params.cells_y; ++cy) {
    for (int cx = 0; cx < params.cells_x; ++cx) {
      double energy = 0.0;
      for (int ny = std::max(0, cy - half); ny <= std::min(params.cells_y - 1, cy + half); ++ny) {
        for (int nx = std::max(0, cx - half); nx <= std::min(params.cells_x - 1, cx + half); ++nx) {
          const double* hist = cell_at(nx, ny);
          for (int b = 0; b < bins; ++b) energy += hist[b] * hist[b];
        }
      }
      const double norm = std::sqrt(energy + kNormEpsilon * kNormEpsilon);
      const std::size_t base = (static_cast<std::size_t>(cy) * params.cells_x + cx) * bins;
      for (int b = 0; b < bins; ++b) descriptor[base + b] = cells[base + b] / norm;
    }
  }

  // glyphs: one stroke per bin, drawn along the edge (gradient + 90 degrees)
  std::vector<double> canvas(face.size(), 0.0);
  const double peak = *std::max_element(descriptor.begin(), descriptor.end());
  if (peak > 0.0) {
    for (int cy = 0; cy < params.cells_y; ++cy) {
      const double y0 = static_cast<double>(cy) * h / params.cells_y;
      const double y1 = static_cast<double>(cy + 1) * h / params.cells_y;
      for (int cx = 0; cx < params.cells_x; ++cx) {
        const double x0 = static_cast<double>(cx) * w / params.cells_x;
        const double x1 = static_cast<double>(cx + 1) * w / params.cells_x;
        const double half_length = 0.45 * std::min(x1 - x0, y1 - y0);
        const std::size_t base = (static_cast<std::size_t>(cy) * params.cells_x + cx) * bins;
        for (int b = 0; b < bins; ++b) {
          const double weight = descriptor[base + b] / peak;
          if (weight <= 0.0) continue;
          const double edge = (b * bin_width + 90.0) * std::numbers::pi / 180.0;
          draw_stroke(canvas, w, h, 0.5 * (x0 + x1) - 0.5, 0.5 * (y0 + y1) - 0.5, edge, half_length, weight);
        }
      }
    }
  }

  HogResult out;
  out.cell_histograms = std::move(cells);
  out.extraction.vector = {"HOG", std::move(descriptor)};
  out.extraction.map = make_map(w, h, 1, std::move(canvas), "HOG");
  return out;
}

Extraction extract_hog(const GrayImage& face, const HogParams& params) {
  return extract_hog_detailed(face, params).extraction;
}

}  // namespace smad::features
