#include "smad/features/types.hpp"

#include <algorithm>
#include <cmath>

#include "smad/error.hpp"
#include "smad/util.hpp"

namespace smad::features {

namespace {

constexpr std::array<std::string_view, 14> kNames{
    "RGB", "ELA", "SRM", "DCT2", "DFT", "LBP81", "FUSION_LBP",
    "HOG", "SVD", "VLBP", "HLBP", "BSIF_IM", "BSIF_H", "BSIF_NH"};

std::string canonical(std::string_view name) {
  std::string out;
  for (char c : name) {
    if (c == '-' || c == ' ') c = '_';
    out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  return out;
}

}  // namespace

std::string_view to_string(Method method) { return kNames[static_cast<std::size_t>(method)]; }

std::optional<Method> parse_method(std::string_view name) {
  const std::string key = canonical(trim(name));
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == key) return static_cast<Method>(i);
  }
  return std::nullopt;
}

std::vector<Method> parse_method_list(std::string_view names) {
  std::vector<Method> methods;
  for (const auto& part : split(names, ',')) {
    if (trim(part).empty()) continue;
    const auto method = parse_method(part);
    if (!method) throw UsageError("unknown feature method '" + trim(part) + "'");
    methods.push_back(*method);
  }
  if (methods.empty()) throw UsageError("no feature methods given");
  return methods;
}

FeatureMap make_map(int width, int height, int channels, std::vector<double> values,
                    std::string method) {
  if (values.size() != static_cast<std::size_t>(width) * height * channels) {
    throw Error("feature map size mismatch");
  }
  FeatureMap map{width, height, channels, std::move(values), std::move(method), 0.0, 0.0};
  if (!map.values.empty()) {
    const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
    map.display_min = *lo;
    map.display_max = *hi;
  }
  if (!std::all_of(map.values.begin(), map.values.end(), [](double v) { return std::isfinite(v); })) {
    throw Error("feature map '" + map.method + "' contains non-finite values");
  }
  return map;
}

FeatureMap resize_map(const FeatureMap& map, int width, int height) {
  if (map.width == width && map.height == height) return map;
  std::vector<double> out(static_cast<std::size_t>(width) * height * map.channels);
  const double sx = static_cast<double>(map.width) / width;
  const double sy = static_cast<double>(map.height) / height;
  for (int c = 0; c < map.channels; ++c) {
    for (int y = 0; y < height; ++y) {
      const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, map.height - 1.0);
      const int y0 = static_cast<int>(fy);
      const int y1 = std::min(y0 + 1, map.height - 1);
      for (int x = 0; x < width; ++x) {
        const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, map.width - 1.0);
        const int x0 = static_cast<int>(fx);
        const int x1 = std::min(x0 + 1, map.width - 1);
        const double top = map.at(x0, y0, c) + (fx - x0) * (map.at(x1, y0, c) - map.at(x0, y0, c));
        const double bottom = map.at(x0, y1, c) + (fx - x0) * (map.at(x1, y1, c) - map.at(x0, y1, c));
        out[(static_cast<std::size_t>(c) * height + y) * width + x] = top + (fy - y0) * (bottom - top);
      }
    }
  }
  return make_map(width, height, map.channels, std::move(out), map.method);
}

FeatureVector fuse_vectors(std::span<const FeatureVector> parts) {
  if (parts.empty()) throw UsageError("cannot fuse an empty list of feature vectors");
  FeatureVector fused;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) fused.method += '+';
    fused.method += parts[i].method;
    fused.values.insert(fused.values.end(), parts[i].values.begin(), parts[i].values.end());
  }
  return fused;
}

}  // namespace smad::features
