#pragma once

// Synthetic test data: seeded textures, a small morph corpus written to
// disk with its manifest, and Gaussian classifier fixtures.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "smad/dataset.hpp"
#include "smad/features/types.hpp"
#include "smad/image.hpp"
#include "smad/util.hpp"

namespace smad::testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    path_ = fs::temp_directory_path() / ("smad_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

/// Smooth value-noise field (three octaves) plus fine sensor noise.
inline std::vector<double> noise_field(std::uint64_t seed, int w, int h, double sensor_sigma) {
  Rng rng(seed);
  std::vector<double> field(static_cast<std::size_t>(w) * h, 0.0);
  double amplitude = 60.0;
  for (int cell : {48, 16, 6}) {
    const int gw = w / cell + 2, gh = h / cell + 2;
    std::vector<double> grid(static_cast<std::size_t>(gw) * gh);
    for (auto& g : grid) g = rng.uniform() * 2.0 - 1.0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double fx = static_cast<double>(x) / cell, fy = static_cast<double>(y) / cell;
        int ix = static_cast<int>(fx), iy = static_cast<int>(fy);
        double tx = fx - ix, ty = fy - iy;
        tx = tx * tx * (3 - 2 * tx);
        ty = ty * ty * (3 - 2 * ty);
        auto g = [&](int gx, int gy) { return grid[static_cast<std::size_t>(gy) * gw + gx]; };
        double top = g(ix, iy) * (1 - tx) + g(ix + 1, iy) * tx;
        double bot = g(ix, iy + 1) * (1 - tx) + g(ix + 1, iy + 1) * tx;
        field[static_cast<std::size_t>(y) * w + x] += amplitude * (top * (1 - ty) + bot * ty);
      }
    }
    amplitude *= 0.5;
  }
  for (auto& v : field) v += 128.0 + sensor_sigma * rng.normal();
  return field;
}

inline GrayImage to_image(const std::vector<double>& field, int w, int h) {
  GrayImage img(w, h);
  for (std::size_t i = 0; i < field.size(); ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(field[i]), 0L, 255L));
  }
  return img;
}

inline GrayImage texture(std::uint64_t seed, int w = dataset::kFaceWidth, int h = dataset::kFaceHeight,
                         double sensor_sigma = 4.0) {
  return to_image(noise_field(seed, w, h, sensor_sigma), w, h);
}

inline GrayImage constant_image(std::uint8_t value, int w = dataset::kFaceWidth, int h = dataset::kFaceHeight) {
  return GrayImage(w, h, value);
}

inline GrayImage box_blur(const GrayImage& img) {
  GrayImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      int sum = 0, n = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          int xx = std::clamp(x + dx, 0, img.width - 1), yy = std::clamp(y + dy, 0, img.height - 1);
          sum += img.at(xx, yy);
          ++n;
        }
      }
      out.at(x, y) = static_cast<std::uint8_t>((sum + n / 2) / n);
    }
  }
  return out;
}

/// A morph is the average of two independent textures (which halves the
/// sensor noise) followed by a tool-specific post-process.
inline GrayImage morph_image(std::uint64_t seed, const std::string& tool) {
  auto a = noise_field(combine_seeds(seed, 1), dataset::kFaceWidth, dataset::kFaceHeight, 4.0);
  auto b = noise_field(combine_seeds(seed, 2), dataset::kFaceWidth, dataset::kFaceHeight, 4.0);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = 0.5 * (a[i] + b[i]);
  auto img = to_image(a, dataset::kFaceWidth, dataset::kFaceHeight);
  if (tool == "beta") img = box_blur(img);
  if (tool == "gamma") img = jpeg_roundtrip(img, 60);
  return img;
}

struct Corpus {
  fs::path manifest_path;
  dataset::DatasetManifest manifest;
};

/// Writes `per_class` bona fide images and `per_class` morphs for each tool
/// under `dir`, plus manifest.csv.
inline Corpus make_corpus(const fs::path& dir, int per_class = 40,
                          const std::vector<std::string>& tools = {"alpha", "beta", "gamma"},
                          std::uint64_t seed = 7) {
  fs::create_directories(dir / "images");
  Corpus corpus;
  auto add = [&](const std::string& id, Label label, const std::string& tool, const GrayImage& img) {
    auto path = dir / "images" / (id + ".png");
    save_png(path, img);
    dataset::SampleRecord r;
    r.id = id;
    r.path = path;
    r.label = label;
    r.tool = tool;
    r.source_db = "FRLL";
    corpus.manifest.records.push_back(r);
  };
  for (int i = 0; i < per_class; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "bf_%03d", i);
    add(id, Label::bonafide, dataset::kNoTool, texture(combine_seeds(seed, 1000 + i)));
  }
  for (std::size_t t = 0; t < tools.size(); ++t) {
    for (int i = 0; i < per_class; ++i) {
      char id[48];
      std::snprintf(id, sizeof id, "%s_%03d", tools[t].c_str(), i);
      add(id, Label::morph, tools[t], morph_image(combine_seeds(seed, 5000 + 1000 * t + i), tools[t]));
    }
  }
  corpus.manifest_path = dir / "manifest.csv";
  dataset::write_manifest(corpus.manifest_path, corpus.manifest);
  corpus.manifest = dataset::load_manifest(corpus.manifest_path);
  return corpus;
}

/// Two classes in `dim` dimensions whose means differ by `separation`
/// standard deviations along the first axis.
inline void gaussian_fixture(std::uint64_t seed, int per_class, int dim, double separation,
                             std::vector<features::FeatureVector>& X, std::vector<Label>& y) {
  Rng rng(seed);
  for (int i = 0; i < 2 * per_class; ++i) {
    Label label = i % 2 ? Label::morph : Label::bonafide;
    features::FeatureVector v;
    v.method = "GAUSS";
    for (int d = 0; d < dim; ++d) {
      double mu = (d == 0 && label == Label::morph) ? separation : 0.0;
      v.values.push_back(mu + rng.normal());
    }
    X.push_back(std::move(v));
    y.push_back(label);
  }
}

}  // namespace smad::testing
