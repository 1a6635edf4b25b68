#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <regex>

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

/// Multi-octave value noise; its spectrum falls off roughly as 1/f, the
/// regime natural-image statistics live in.
std::vector<double> synthetic_texture(int side, Rng& rng) {
  std::vector<double> image(static_cast<std::size_t>(side) * side, 0.0);
  double amplitude = 1.0;
  for (int cells = 2; cells <= side / 2; cells *= 2, amplitude *= 0.5) {
    std::vector<double> grid(static_cast<std::size_t>(cells + 1) * (cells + 1));
    for (auto& g : grid) g = rng.normal();
    const double step = static_cast<double>(cells) / side;
    for (int y = 0; y < side; ++y) {
      const double gy = y * step;
      const int y0 = static_cast<int>(gy);
      const double wy = gy - y0;
      for (int x = 0; x < side; ++x) {
        const double gx = x * step;
        const int x0 = static_cast<int>(gx);
        const double wx = gx - x0;
        auto at = [&](int cx, int cy) { return grid[static_cast<std::size_t>(cy) * (cells + 1) + cx]; };
        const double top = at(x0, y0) + wx * (at(x0 + 1, y0) - at(x0, y0));
        const double bottom = at(x0, y0 + 1) + wx * (at(x0 + 1, y0 + 1) - at(x0, y0 + 1));
        image[static_cast<std::size_t>(y) * side + x] += amplitude * (top + wy * (bottom - top));
      }
    }
  }
  // a little sensor-like white noise on top
  for (auto& v : image) v += 0.01 * rng.normal();
  return image;
}

}  // namespace

void BsifFilterBank::validate() const {
  if (size < 1 || size % 2 == 0) throw DataError("BSIF bank '" + source_id + "': size must be odd");
  if (bits < 1 || bits > 16) throw DataError("BSIF bank '" + source_id + "': bits must be in [1,16]");
  if (filters.size() != static_cast<std::size_t>(bits)) {
    throw DataError("BSIF bank '" + source_id + "': expected " + std::to_string(bits) + " filters, found " +
                    std::to_string(filters.size()));
  }
  for (std::size_t i = 0; i < filters.size(); ++i) {
    if (filters[i].size() != static_cast<std::size_t>(size) * size) {
      throw DataError("BSIF bank '" + source_id + "': filter " + std::to_string(i) + " is not " +
                      std::to_string(size) + "x" + std::to_string(size));
    }
    double sum = 0.0;
    for (double w : filters[i]) sum += w;
    if (std::abs(sum / filters[i].size()) > 1e-6) {
      throw DataError("BSIF bank '" + source_id + "': filter " + std::to_string(i) + " is not zero-mean");
    }
  }
}

BsifFilterBank BsifFilterBank::from_json(const std::string& text, std::string source_id) {
  BsifFilterBank bank;
  bank.source_id = std::move(source_id);
  try {
    const auto doc = nlohmann::json::parse(text);
    bank.size = doc.at("size").get<int>();
    bank.bits = doc.at("bits").get<int>();
    for (const auto& f : doc.at("filters")) {
      std::vector<double> weights;
      for (const auto& entry : f) {
        if (entry.is_array()) {
          for (const auto& v : entry) weights.push_back(v.get<double>());
        } else {
          weights.push_back(entry.get<double>());
        }
      }
      bank.filters.push_back(std::move(weights));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("BSIF bank '" + bank.source_id + "': " + e.what());
  }
  bank.validate();
  return bank;
}

BsifFilterBank BsifFilterBank::load(const std::filesystem::path& path) {
  return from_json(read_text_file(path), path.stem().string());
}

std::string BsifFilterBank::to_json() const {
  nlohmann::ordered_json doc;
  doc["size"] = size;
  doc["bits"] = bits;
  doc["filters"] = filters;
  return doc.dump();
}

std::filesystem::path bsif_bank_path(int size, int bits) {
  return data_dir() / "bsif" /
         ("bsif_" + std::to_string(size) + "x" + std::to_string(size) + "_" + std::to_string(bits) + "bit.json");
}

std::vector<std::filesystem::path> shipped_bsif_banks() {
  struct Entry {
    int size, bits;
    std::filesystem::path path;
  };
  std::vector<Entry> entries;
  const std::regex pattern(R"(bsif_(\d+)x\d+_(\d+)bit\.json)");
  const auto dir = data_dir() / "bsif";
  if (!std::filesystem::is_directory(dir)) return {};
  for (const auto& item : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = item.path().filename().string();
    if (std::regex_match(name, m, pattern)) {
      entries.push_back({std::stoi(m[1]), std::stoi(m[2]), item.path()});
    }
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return std::tie(a.size, a.bits) < std::tie(b.size, b.bits); });
  std::vector<std::filesystem::path> paths;
  for (auto& e : entries) paths.push_back(e.path);
  return paths;
}

BsifFilterBank load_bsif_bank(int size, int bits) { return BsifFilterBank::load(bsif_bank_path(size, bits)); }

BsifFilterBank default_classification_bank() { return load_bsif_bank(3, 5); }

BsifFilterBank default_reporting_bank() { return load_bsif_bank(5, 9); }

BsifFilterBank generate_bsif_bank(int size, int bits, std::uint64_t seed) {
  const int dim = size * size;
  if (size < 3 || size % 2 == 0) throw UsageError("BSIF filter size must be odd and >= 3");
  if (bits < 1 || bits > dim - 1) throw UsageError("BSIF bits must be in [1, size*size-1]");

  Rng rng(combine_seeds(seed, static_cast<std::uint64_t>(size) * 131 + bits));
  constexpr int kSide = 256;
  constexpr int kImages = 13;
  constexpr int kPatchesPerImage = 4000;

  Eigen::MatrixXd covariance = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd patch(dim);
  long samples = 0;
  for (int image_index = 0; image_index < kImages; ++image_index) {
    const auto image = synthetic_texture(kSide, rng);
    for (int p = 0; p < kPatchesPerImage; ++p) {
      const int x0 = static_cast<int>(rng.below(kSide - size));
      const int y0 = static_cast<int>(rng.below(kSide - size));
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          patch(y * size + x) = image[static_cast<std::size_t>(y0 + y) * kSide + x0 + x];
        }
      }
      patch.array() -= patch.mean();
      covariance.noalias() += patch * patch.transpose();
      ++samples;
    }
  }
  covariance /= static_cast<double>(samples);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(covariance);
  if (solver.info() != Eigen::Success) throw Error("BSIF bank generation: eigen decomposition failed");

  BsifFilterBank bank;
  bank.size = size;
  bank.bits = bits;
  bank.source_id = "bsif_" + std::to_string(size) + "x" + std::to_string(size) + "_" + std::to_string(bits) + "bit";
  // eigenvalues ascend; take the leading components, whiten by 1/sqrt(lambda)
  for (int i = 0; i < bits; ++i) {
    const Eigen::Index col = dim - 1 - i;
    const double lambda = solver.eigenvalues()(col);
    Eigen::VectorXd filter = solver.eigenvectors().col(col) / std::sqrt(std::max(lambda, 1e-12));
    filter.array() -= filter.mean();
    Eigen::Index largest = 0;
    filter.cwiseAbs().maxCoeff(&largest);
    if (filter(largest) < 0) filter = -filter;
    bank.filters.emplace_back(filter.data(), filter.data() + dim);
  }
  bank.validate();
  return bank;
}

std::vector<double> bsif_response(const GrayImage& face, const std::vector<double>& filter, int size) {
  const int w = face.width;
  const int h = face.height;
  const int r = size / 2;
  std::vector<double> out(face.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double centre = face.at(x, y);
      double response = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        const int sy = reflect101(y + dy, h);
        const double* row = &filter[static_cast<std::size_t>(dy + r) * size];
        for (int dx = -r; dx <= r; ++dx) {
          response += row[dx + r] * (face.at(reflect101(x + dx, w), sy) - centre);
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = response;
    }
  }
  return out;
}

BsifResult extract_bsif(const GrayImage& face, const BsifFilterBank& bank) {
  bank.validate();
  const int w = face.width;
  const int h = face.height;
  std::vector<double> codes(face.size(), 0.0);
  for (int b = 0; b < bank.bits; ++b) {
    const double bit_value = static_cast<double>(1u << b);
    const auto response = bsif_response(face, bank.filters[b], bank.size);
    for (std::size_t i = 0; i < response.size(); ++i) {
      if (response[i] > 0.0) codes[i] += bit_value;
    }
  }

  const std::size_t bins = std::size_t{1} << bank.bits;
  std::vector<double> histogram(bins, 0.0);
  for (double c : codes) histogram[static_cast<std::size_t>(c)] += 1.0;
  std::vector<double> norm = histogram;
  const double total = static_cast<double>(codes.size());
  if (total <= 0.0) throw DataError("BSIF on an empty image");
  for (auto& v : norm) v /= total;

  BsifResult out;
  out.codes = {"BSIF_IM", codes};
  out.code_map = make_map(w, h, 1, std::move(codes), "BSIF_IM");
  out.histogram = {"BSIF_H", std::move(histogram)};
  out.normalised = {"BSIF_NH", std::move(norm)};
  return out;
}

}  // namespace smad::features
