#pragma once

// Raster output: feature-map previews, contact sheets and result plots.

#include <string>
#include <utility>
#include <vector>

#include "smad/features/types.hpp"
#include "smad/image.hpp"
#include "smad/metrics.hpp"

namespace smad::render {

/// Per-map min-max stretch to 8 bits. One channel gives a grayscale raster
/// with the map's size; three channels are shown as RGB. A flat map renders
/// black.
Raster render_map(const features::FeatureMap& map);

/// Sidecar describing the true value range behind a rendered map.
std::string map_range_json(const features::FeatureMap& map);

inline constexpr int kTileWidth = 180;
inline constexpr int kTileHeight = 240;
inline constexpr int kLabelHeight = 24;

/// Tiles are scaled (nearest) to 180x240 and laid out row-major with a
/// caption strip below each, `columns` per row.
Raster contact_sheet(const std::vector<std::pair<std::string, Raster>>& tiles, int columns = 5);

struct DetSeries {
  std::string label;
  metrics::DetCurve curve;
  double eer = 0.0;
};

inline constexpr int kPlotWidth = 720;
inline constexpr int kPlotHeight = 540;

/// APCER against BPCER on normal-deviate axes; legend entries read
/// "label (EER%)".
Raster plot_det(const std::vector<DetSeries>& series, const std::string& title);

struct BarGroup {
  std::string dataset;
  std::vector<std::pair<std::string, double>> bars;
  double average = 0.0;
};

/// Grouped EER bars per dataset with the dataset averages joined by a
/// dotted line.
Raster plot_bars(const std::vector<BarGroup>& groups, const std::string& title);

}  // namespace smad::render
