#include <array>
#include <bit>
#include <cmath>
#include <numbers>

#include "smad/error.hpp"
#include "smad/features/extractors.hpp"

namespace smad::features {

namespace {

struct Offset {
  double dx;
  double dy;
};

double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

std::array<Offset, kLbpPoints> neighbour_offsets(int radius) {
  std::array<Offset, kLbpPoints> offsets{};
  for (int i = 0; i < kLbpPoints; ++i) {
    const double angle = 2.0 * std::numbers::pi * i / kLbpPoints;
    offsets[i] = {snap(radius * std::cos(angle)), snap(-radius * std::sin(angle))};
  }
  return offsets;
}

// Lerp form keeps the sample exactly equal to the input on flat patches.
double sample(const GrayImage& face, double fx, double fy) {
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = static_cast<int>(std::floor(fy));
  const double wx = fx - x0;
  const double wy = fy - y0;
  const int x1 = wx > 0.0 ? x0 + 1 : x0;
  const int y1 = wy > 0.0 ? y0 + 1 : y0;
  const double top = face.at(x0, y0) + wx * (face.at(x1, y0) - face.at(x0, y0));
  const double bottom = face.at(x0, y1) + wx * (face.at(x1, y1) - face.at(x0, y1));
  return top + wy * (bottom - top);
}

std::uint8_t pattern_with(const GrayImage& face, int x, int y, const std::array<Offset, kLbpPoints>& offsets) {
  const double centre = face.at(x, y);
  std::uint8_t code = 0;
  for (int i = 0; i < kLbpPoints; ++i) {
    if (sample(face, x + offsets[i].dx, y + offsets[i].dy) >= centre) code |= static_cast<std::uint8_t>(1u << i);
  }
  return code;
}

const std::array<int, 256>& label_table() {
  static const std::array<int, 256> table = [] {
    std::array<int, 256> t{};
    int next = 0;
    for (int code = 0; code < 256; ++code) {
      t[code] = circular_transitions(static_cast<std::uint8_t>(code)) <= 2 ? next++ : kLbpNonUniform;
    }
    return t;
  }();
  return table;
}

FeatureVector normalised(std::vector<double> counts, std::string method) {
  double total = 0.0;
  for (double c : counts) total += c;
  if (total <= 0.0) throw DataError("LBP histogram over an empty region");
  for (auto& c : counts) c /= total;
  return {std::move(method), std::move(counts)};
}

}  // namespace

void LbpParams::validate() const {
  if (points != kLbpPoints) throw UsageError("uniform LBP supports P = 8 only");
  if (radius < 1 || radius > 8) throw UsageError("LBP radius must be in [1,8]");
  if (!uniform) throw UsageError("only the uniform LBP mapping is implemented");
}

int circular_transitions(std::uint8_t pattern) {
  const auto rotated = static_cast<std::uint8_t>((pattern >> 1) | (pattern << 7));
  return std::popcount(static_cast<unsigned>(pattern ^ rotated));
}

int uniform_label(std::uint8_t pattern) { return label_table()[pattern]; }

std::uint8_t lbp_pattern(const GrayImage& face, int x, int y, int radius) {
  if (x < radius || y < radius || x >= face.width - radius || y >= face.height - radius) {
    throw UsageError("LBP sample point too close to the border");
  }
  return pattern_with(face, x, y, neighbour_offsets(radius));
}

FeatureMap extract_ulbp_map(const GrayImage& face, const LbpParams& params) {
  params.validate();
  const int r = params.radius;
  const int w = std::max(0, face.width - 2 * r);
  const int h = std::max(0, face.height - 2 * r);
  const auto offsets = neighbour_offsets(r);
  std::vector<double> labels(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      labels[static_cast<std::size_t>(y) * w + x] = uniform_label(pattern_with(face, x + r, y + r, offsets));
    }
  }
  return make_map(w, h, 1, std::move(labels), "LBP8" + std::to_string(r));
}

std::vector<double> ulbp_counts(const FeatureMap& map) {
  if (map.values.empty()) throw DataError("LBP map has an empty interior region");
  std::vector<double> counts(kLbpBins, 0.0);
  for (double v : map.values) {
    const int label = static_cast<int>(v);
    if (label < 0 || label >= kLbpBins || label != v) throw UsageError("map is not a uniform LBP code map");
    counts[label] += 1.0;
  }
  return counts;
}

FeatureVector ulbp_histogram(const FeatureMap& map) {
  return normalised(ulbp_counts(map), map.method);
}

FeatureVector ulbp_fusion(const GrayImage& face) {
  FeatureVector fused{"FUSION_LBP", {}};
  fused.values.reserve(8 * kLbpBins);
  for (int r = 1; r <= 8; ++r) {
    const auto hist = ulbp_histogram(extract_ulbp_map(face, {kLbpPoints, r, true}));
    fused.values.insert(fused.values.end(), hist.values.begin(), hist.values.end());
  }
  return fused;
}

FeatureVector ulbp_patch_concat(const GrayImage& face, Axis axis) {
  constexpr int kStrips = 8;
  const FeatureMap map = extract_ulbp_map(face, {kLbpPoints, 1, true});
  std::vector<std::vector<double>> counts(kStrips, std::vector<double>(kLbpBins, 0.0));
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const int strip = axis == Axis::vertical ? (kStrips * (y + 1)) / face.height
                                               : (kStrips * (x + 1)) / face.width;
      counts[strip][static_cast<int>(map.at(x, y))] += 1.0;
    }
  }
  FeatureVector out{axis == Axis::vertical ? "VLBP" : "HLBP", {}};
  out.values.reserve(kStrips * kLbpBins);
  for (auto& strip : counts) {
    const auto hist = normalised(std::move(strip), out.method);
    out.values.insert(out.values.end(), hist.values.begin(), hist.values.end());
  }
  return out;
}

}  // namespace smad::features
