#include "smad/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <opencv2/imgproc.hpp>

#include "json.hpp"
#include "smad/error.hpp"

namespace smad::render {
namespace {

// Canvas colours are given in RGB order; the Mat is copied into a Raster as is.
const cv::Scalar kWhite(255, 255, 255);
const cv::Scalar kBlack(0, 0, 0);
const cv::Scalar kGrid(220, 220, 220);

const std::vector<cv::Scalar>& palette() {
  static const std::vector<cv::Scalar> colours = {
      {31, 119, 180},  {255, 127, 14}, {44, 160, 44},  {214, 39, 40},   {148, 103, 189},
      {140, 86, 75},   {227, 119, 194}, {127, 127, 127}, {188, 189, 34}, {23, 190, 207},
      {0, 0, 128},     {128, 0, 0},    {0, 128, 0},    {255, 215, 0},
  };
  return colours;
}

Raster from_mat(const cv::Mat& mat) {
  Raster out;
  out.width = mat.cols;
  out.height = mat.rows;
  out.channels = mat.channels();
  out.data.assign(mat.data, mat.data + mat.total() * mat.elemSize());
  return out;
}

cv::Mat to_rgb_mat(const Raster& raster) {
  cv::Mat mat(raster.height, raster.width, CV_8UC3);
  for (int y = 0; y < raster.height; ++y) {
    for (int x = 0; x < raster.width; ++x) {
      auto& px = mat.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c) px[c] = raster.at(x, y, raster.channels == 3 ? c : 0);
    }
  }
  return mat;
}

void text(cv::Mat& canvas, const std::string& s, cv::Point at, double scale = 0.4,
          const cv::Scalar& colour = kBlack) {
  cv::putText(canvas, s, at, cv::FONT_HERSHEY_SIMPLEX, scale, colour, 1, cv::LINE_AA);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

Raster render_map(const features::FeatureMap& map) {
  if (map.width <= 0 || map.height <= 0) throw DataError("render: empty feature map");
  if (map.channels != 1 && map.channels != 3) {
    throw DataError("render: unsupported channel count " + std::to_string(map.channels));
  }
  double lo = map.values.empty() ? 0.0 : *std::min_element(map.values.begin(), map.values.end());
  double hi = map.values.empty() ? 0.0 : *std::max_element(map.values.begin(), map.values.end());
  double span = hi - lo;
  Raster out;
  out.width = map.width;
  out.height = map.height;
  out.channels = map.channels;
  out.data.resize(static_cast<std::size_t>(map.width) * map.height * map.channels);
  for (int c = 0; c < map.channels; ++c) {
    for (int y = 0; y < map.height; ++y) {
      for (int x = 0; x < map.width; ++x) {
        double v = span > 0.0 ? (map.at(x, y, c) - lo) / span * 255.0 : 0.0;
        out.data[(static_cast<std::size_t>(y) * map.width + x) * map.channels + c] =
            static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

std::string map_range_json(const features::FeatureMap& map) {
  double lo = map.values.empty() ? 0.0 : *std::min_element(map.values.begin(), map.values.end());
  double hi = map.values.empty() ? 0.0 : *std::max_element(map.values.begin(), map.values.end());
  nlohmann::ordered_json j;
  j["method"] = map.method;
  j["width"] = map.width;
  j["height"] = map.height;
  j["channels"] = map.channels;
  j["display_range"] = {lo, hi};
  return j.dump(2) + "\n";
}

Raster contact_sheet(const std::vector<std::pair<std::string, Raster>>& tiles, int columns) {
  if (tiles.empty()) throw UsageError("contact sheet: no tiles");
  columns = std::max(1, std::min<int>(columns, static_cast<int>(tiles.size())));
  int rows = (static_cast<int>(tiles.size()) + columns - 1) / columns;
  int cell_h = kTileHeight + kLabelHeight;
  cv::Mat canvas(rows * cell_h, columns * kTileWidth, CV_8UC3, kWhite);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    int cx = static_cast<int>(i) % columns * kTileWidth;
    int cy = static_cast<int>(i) / columns * cell_h;
    cv::Mat tile;
    cv::resize(to_rgb_mat(tiles[i].second), tile, cv::Size(kTileWidth, kTileHeight), 0, 0, cv::INTER_NEAREST);
    tile.copyTo(canvas(cv::Rect(cx, cy, kTileWidth, kTileHeight)));
    text(canvas, tiles[i].first, {cx + 4, cy + kTileHeight + 17}, 0.45);
  }
  return from_mat(canvas);
}

Raster plot_det(const std::vector<DetSeries>& series, const std::string& title) {
  cv::Mat canvas(kPlotHeight, kPlotWidth, CV_8UC3, kWhite);
  const int left = 70, right = kPlotWidth - 200, top = 40, bottom = kPlotHeight - 60;
  const std::vector<double> ticks = {0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.4};
  const double lo = metrics::probit(ticks.front());
  const double hi = metrics::probit(ticks.back());
  auto px = [&](double rate) {
    double z = std::clamp(metrics::probit(std::clamp(rate, 1e-6, 1.0 - 1e-6)), lo, hi);
    return left + (z - lo) / (hi - lo) * (right - left);
  };
  auto py = [&](double rate) {
    double z = std::clamp(metrics::probit(std::clamp(rate, 1e-6, 1.0 - 1e-6)), lo, hi);
    return bottom - (z - lo) / (hi - lo) * (bottom - top);
  };
  for (double t : ticks) {
    int x = static_cast<int>(std::lround(px(t)));
    int y = static_cast<int>(std::lround(py(t)));
    cv::line(canvas, {x, top}, {x, bottom}, kGrid);
    cv::line(canvas, {left, y}, {right, y}, kGrid);
    std::string label = t < 0.01 ? fixed(t * 100.0, 1) : fixed(t * 100.0, 0);
    text(canvas, label, {x - 10, bottom + 18});
    text(canvas, label, {left - 35, y + 4});
  }
  cv::rectangle(canvas, {left, top}, {right, bottom}, kBlack);
  text(canvas, "APCER (%)", {(left + right) / 2 - 35, bottom + 42}, 0.5);
  text(canvas, "BPCER (%)", {8, top - 12}, 0.5);
  text(canvas, title, {left, 24}, 0.55);

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& colour = palette()[s % palette().size()];
    std::vector<cv::Point> pts;
    for (const auto& p : series[s].curve.points) {
      pts.emplace_back(static_cast<int>(std::lround(px(p.apcer))), static_cast<int>(std::lround(py(p.bpcer))));
    }
    if (pts.size() >= 2) cv::polylines(canvas, pts, false, colour, 2, cv::LINE_AA);
    int ly = top + 10 + static_cast<int>(s) * 20;
    cv::line(canvas, {right + 12, ly}, {right + 32, ly}, colour, 2);
    text(canvas, series[s].label + " (" + fixed(series[s].eer * 100.0, 2) + ")", {right + 38, ly + 4});
  }
  return from_mat(canvas);
}

Raster plot_bars(const std::vector<BarGroup>& groups, const std::string& title) {
  cv::Mat canvas(kPlotHeight, kPlotWidth, CV_8UC3, kWhite);
  const int left = 60, right = kPlotWidth - 170, top = 40, bottom = kPlotHeight - 60;
  double ymax = 0.0;
  for (const auto& g : groups) {
    for (const auto& b : g.bars) ymax = std::max(ymax, b.second);
    ymax = std::max(ymax, g.average);
  }
  ymax = ymax > 0.0 ? std::ceil(ymax * 10.0) / 10.0 : 0.1;
  auto py = [&](double v) { return static_cast<int>(std::lround(bottom - v / ymax * (bottom - top))); };
  for (int i = 0; i <= 5; ++i) {
    double v = ymax * i / 5.0;
    cv::line(canvas, {left, py(v)}, {right, py(v)}, kGrid);
    text(canvas, fixed(v, 2), {left - 40, py(v) + 4});
  }
  cv::rectangle(canvas, {left, top}, {right, bottom}, kBlack);
  text(canvas, "EER", {8, top - 12}, 0.5);
  text(canvas, title, {left, 24}, 0.55);

  std::vector<std::string> legend;
  for (const auto& g : groups) {
    for (const auto& b : g.bars) {
      if (std::find(legend.begin(), legend.end(), b.first) == legend.end()) legend.push_back(b.first);
    }
  }
  std::vector<cv::Point> dots;
  if (!groups.empty()) {
    double group_w = static_cast<double>(right - left) / groups.size();
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      const auto& g = groups[gi];
      double gx = left + gi * group_w;
      double bar_w = g.bars.empty() ? 0.0 : group_w * 0.8 / g.bars.size();
      for (std::size_t bi = 0; bi < g.bars.size(); ++bi) {
        auto idx = std::find(legend.begin(), legend.end(), g.bars[bi].first) - legend.begin();
        int x0 = static_cast<int>(std::lround(gx + group_w * 0.1 + bi * bar_w));
        int x1 = static_cast<int>(std::lround(gx + group_w * 0.1 + (bi + 1) * bar_w)) - 1;
        cv::rectangle(canvas, {x0, py(g.bars[bi].second)}, {std::max(x0, x1), bottom},
                      palette()[idx % palette().size()], cv::FILLED);
      }
      int cx = static_cast<int>(std::lround(gx + group_w / 2));
      dots.emplace_back(cx, py(g.average));
      int baseline = 0;
      auto size = cv::getTextSize(g.dataset, cv::FONT_HERSHEY_SIMPLEX, 0.45, 1, &baseline);
      text(canvas, g.dataset, {cx - size.width / 2, bottom + 20}, 0.45);
    }
  }
  for (std::size_t i = 0; i + 1 < dots.size(); ++i) {
    cv::LineIterator it(canvas, dots[i], dots[i + 1]);
    for (int k = 0; k < it.count; ++k, ++it) {
      if (k % 8 < 4) canvas.at<cv::Vec3b>(it.pos()) = cv::Vec3b(0, 0, 0);
    }
  }
  for (const auto& d : dots) cv::circle(canvas, d, 4, kBlack, cv::FILLED, cv::LINE_AA);
  for (std::size_t i = 0; i < legend.size(); ++i) {
    int ly = top + 10 + static_cast<int>(i) * 18;
    cv::rectangle(canvas, {right + 12, ly - 6}, {right + 26, ly + 6}, palette()[i % palette().size()], cv::FILLED);
    text(canvas, legend[i], {right + 32, ly + 4});
  }
  int ly = top + 10 + static_cast<int>(legend.size()) * 18;
  cv::circle(canvas, {right + 19, ly}, 4, kBlack, cv::FILLED);
  text(canvas, "Average", {right + 32, ly + 4});
  return from_mat(canvas);
}

}  // namespace smad::render
