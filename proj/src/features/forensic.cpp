#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "json.hpp"
#include "smad/error.hpp"
#include "smad/features/extractors.hpp"
#include "smad/util.hpp"

namespace smad::features {

namespace {

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

Kernel scaled(std::string name, int size, std::vector<double> weights, double scale) {
  for (auto& w : weights) w *= scale;
  return {std::move(name), size, std::move(weights)};
}

}  // namespace

Extraction extract_ela(const GrayImage& face, int quality) {
  if (quality < 1 || quality > 100) {
    throw UsageError("ELA quality must be in [1,100], got " + std::to_string(quality));
  }
  GrayImage recompressed;
  try {
    recompressed = jpeg_roundtrip(face, quality);
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(std::string("ELA extractor: ") + e.what());
  }
  std::vector<double> residual(face.size());
  double peak = 0.0;
  for (std::size_t i = 0; i < residual.size(); ++i) {
    residual[i] = std::abs(static_cast<int>(face.pixels[i]) - static_cast<int>(recompressed.pixels[i]));
    peak = std::max(peak, residual[i]);
  }
  const double gain = 255.0 / std::max(peak, 1.0);
  std::vector<double> amplified(residual.size());
  std::transform(residual.begin(), residual.end(), amplified.begin(), [&](double r) { return r * gain; });

  Extraction out;
  out.vector = {"ELA", std::move(residual)};
  out.map = make_map(face.width, face.height, 1, std::move(amplified), "ELA");
  return out;
}

SrmKernelBank SrmKernelBank::standard() {
  SrmKernelBank bank;
  bank.kernels.push_back(scaled("second_order_3x3", 3, {0, 0, 0, 1, -2, 1, 0, 0, 0}, 1.0 / 2.0));
  bank.kernels.push_back(scaled("square_5x5", 5,
                                {-1, 2, -2, 2, -1,  //
                                 2, -6, 8, -6, 2,   //
                                 -2, 8, -12, 8, -2,  //
                                 2, -6, 8, -6, 2,   //
                                 -1, 2, -2, 2, -1},
                                1.0 / 12.0));
  bank.kernels.push_back(scaled("second_order_5x5", 5,
                                {0, 0, 0, 0, 0,    //
                                 0, -1, 2, -1, 0,  //
                                 0, 2, -4, 2, 0,   //
                                 0, -1, 2, -1, 0,  //
                                 0, 0, 0, 0, 0},
                                1.0 / 4.0));
  return bank;
}

void SrmKernelBank::validate() const {
  if (kernels.empty()) throw DataError("SRM bank has no kernels");
  for (const auto& k : kernels) {
    if (k.size < 1 || k.size % 2 == 0) throw DataError("SRM kernel '" + k.name + "' must have odd size");
    if (k.weights.size() != static_cast<std::size_t>(k.size) * k.size) {
      throw DataError("SRM kernel '" + k.name + "' has wrong weight count");
    }
    double sum = 0.0, mag = 0.0;
    for (double w : k.weights) {
      sum += w;
      mag += std::abs(w);
    }
    if (std::abs(sum) > 1e-9 * std::max(1.0, mag)) {
      throw DataError("SRM kernel '" + k.name + "' is not zero-sum");
    }
  }
}

SrmKernelBank SrmKernelBank::from_json(const std::string& text) {
  SrmKernelBank bank;
  try {
    const auto doc = nlohmann::json::parse(text);
    for (const auto& k : doc.at("kernels")) {
      Kernel kernel;
      kernel.name = k.value("name", "kernel" + std::to_string(bank.kernels.size()));
      kernel.size = k.at("size").get<int>();
      kernel.weights = k.at("weights").get<std::vector<double>>();
      const double scale = k.value("scale", 1.0);
      for (auto& w : kernel.weights) w *= scale;
      bank.kernels.push_back(std::move(kernel));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("SRM kernel file: ") + e.what());
  }
  bank.validate();
  return bank;
}

SrmKernelBank SrmKernelBank::load(const std::filesystem::path& path) {
  try {
    return from_json(read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string SrmKernelBank::to_json() const {
  nlohmann::json doc;
  doc["kernels"] = nlohmann::json::array();
  for (const auto& k : kernels) {
    doc["kernels"].push_back({{"name", k.name}, {"size", k.size}, {"weights", k.weights}});
  }
  return doc.dump(2);
}

Extraction extract_srm(const GrayImage& face, const SrmKernelBank& bank) {
  bank.validate();
  const int w = face.width;
  const int h = face.height;
  const std::size_t plane = face.size();
  std::vector<double> values(plane * bank.kernels.size());
  for (std::size_t c = 0; c < bank.kernels.size(); ++c) {
    const Kernel& k = bank.kernels[c];
    const int r = k.size / 2;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double centre = face.at(x, y);
        double acc = 0.0;
        for (int dy = -r; dy <= r; ++dy) {
          const int sy = reflect101(y + dy, h);
          for (int dx = -r; dx <= r; ++dx) {
            const double weight = k.weights[static_cast<std::size_t>(dy + r) * k.size + dx + r];
            if (weight == 0.0) continue;
            acc += weight * (face.at(reflect101(x + dx, w), sy) - centre);
          }
        }
        values[c * plane + static_cast<std::size_t>(y) * w + x] = acc;
      }
    }
  }
  Extraction out;
  out.vector = {"SRM", values};
  out.map = make_map(w, h, static_cast<int>(bank.kernels.size()), std::move(values), "SRM");
  return out;
}

}  // namespace smad::features
