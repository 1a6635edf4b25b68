#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace smad::features {

/// The fourteen descriptor columns of the evaluation table.
enum class Method {
  RGB,
  ELA,
  SRM,
  DCT2,
  DFT,
  LBP81,
  FUSION_LBP,
  HOG,
  SVD,
  VLBP,
  HLBP,
  BSIF_IM,
  BSIF_H,
  BSIF_NH,
};

inline constexpr std::array<Method, 14> kAllMethods{
    Method::RGB,  Method::ELA,  Method::SRM,  Method::DCT2,    Method::DFT,    Method::LBP81,
    Method::FUSION_LBP, Method::HOG, Method::SVD, Method::VLBP, Method::HLBP,  Method::BSIF_IM,
    Method::BSIF_H, Method::BSIF_NH};

std::string_view to_string(Method method);
/// Case-insensitive; '-' and '_' are interchangeable ("bsif-nh", "BSIF_NH").
std::optional<Method> parse_method(std::string_view name);
/// Comma-separated list; throws UsageError naming the first unknown entry.
std::vector<Method> parse_method_list(std::string_view names);

/// 2-D visualisable output of an extractor. Values are planar: channel,
/// then row-major pixels.
struct FeatureMap {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> values;
  std::string method;
  double display_min = 0.0;
  double display_max = 0.0;

  double at(int x, int y, int c = 0) const {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

/// Builds a map and records its min/max as the display range. Throws on
/// non-finite values.
FeatureMap make_map(int width, int height, int channels, std::vector<double> values,
                    std::string method);

/// Bilinear resize of every channel; display range recomputed.
FeatureMap resize_map(const FeatureMap& map, int width, int height);

struct FeatureVector {
  std::string method;
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  bool operator==(const FeatureVector&) const = default;
};

/// Concatenation in the given order; the method tag joins the part tags
/// with '+'. Throws UsageError on an empty list.
FeatureVector fuse_vectors(std::span<const FeatureVector> parts);

}  // namespace smad::features
