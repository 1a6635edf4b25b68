#include "smad/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "smad/error.hpp"

namespace smad::dataset {

namespace {

const std::vector<std::string> kHeader{"id", "path", "label", "tool", "source_db",
                                       "eye_lx", "eye_ly", "eye_rx", "eye_ry"};

std::string line_error(std::size_t line, const std::string& message) {
  return "manifest line " + std::to_string(line) + ": " + message;
}

bool valid_tool_tag(const std::string& tool) {
  if (tool.empty()) return false;
  return std::all_of(tool.begin(), tool.end(), [](unsigned char c) {
    return std::islower(c) || std::isdigit(c) || c == '_' || c == '-';
  });
}

double bilinear(const GrayImage& img, double fx, double fy) {
  fx = std::clamp(fx, 0.0, img.width - 1.0);
  fy = std::clamp(fy, 0.0, img.height - 1.0);
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double wx = fx - x0;
  const double wy = fy - y0;
  const double top = img.at(x0, y0) + wx * (img.at(x1, y0) - img.at(x0, y0));
  const double bottom = img.at(x0, y1) + wx * (img.at(x1, y1) - img.at(x0, y1));
  return top + wy * (bottom - top);
}

std::uint8_t round_pixel(double value) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(value + 0.5), 0.0, 255.0));
}

/// Maps canonical-frame coordinates to source coordinates.
struct Similarity {
  std::complex<double> scale_rotation;
  std::complex<double> offset;

  Point apply(double x, double y) const {
    const std::complex<double> p = scale_rotation * std::complex<double>(x, y) + offset;
    return {p.real(), p.imag()};
  }
};

Similarity eyes_to_source(const EyePair& eyes) {
  const std::complex<double> src_l(eyes.left.x, eyes.left.y);
  const std::complex<double> src_r(eyes.right.x, eyes.right.y);
  const std::complex<double> dst_l(kLeftEyeX, kEyeY);
  const std::complex<double> dst_r(kRightEyeX, kEyeY);
  const std::complex<double> a = (src_r - src_l) / (dst_r - dst_l);
  return {a, src_l - a * dst_l};
}

void check_landmarks(const Raster& image, const EyePair& eyes) {
  auto inside = [&](const Point& p) {
    return p.x >= 0 && p.y >= 0 && p.x <= image.width - 1 && p.y <= image.height - 1;
  };
  if (!inside(eyes.left) || !inside(eyes.right)) {
    throw DataError("eye landmarks lie outside the image");
  }
  if (eyes.left.x == eyes.right.x && eyes.left.y == eyes.right.y) {
    throw DataError("eye landmarks coincide");
  }
}

void check_image(const Raster& image) {
  if (image.width <= 0 || image.height <= 0 || image.data.empty()) {
    throw DataError("empty image");
  }
}

GrayImage warp(const GrayImage& gray, const Similarity& transform, int width, int height) {
  GrayImage out(width, height);
  const double sx = static_cast<double>(kFaceWidth) / width;
  const double sy = static_cast<double>(kFaceHeight) / height;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      // pixel centre of the output grid expressed in canonical coordinates
      const double cx = (x + 0.5) * sx - 0.5;
      const double cy = (y + 0.5) * sy - 0.5;
      const Point src = transform.apply(cx, cy);
      out.at(x, y) = round_pixel(bilinear(gray, src.x, src.y));
    }
  }
  return out;
}

GrayImage centre_crop(const GrayImage& gray) {
  int crop_w = gray.width;
  int crop_h = gray.height;
  if (static_cast<long>(gray.width) * 4 > static_cast<long>(gray.height) * 3) {
    crop_w = std::max(1, static_cast<int>(std::lround(gray.height * 0.75)));
  } else {
    crop_h = std::max(1, static_cast<int>(std::lround(gray.width * 4.0 / 3.0)));
  }
  const int x0 = (gray.width - crop_w) / 2;
  const int y0 = (gray.height - crop_h) / 2;
  GrayImage out(crop_w, crop_h);
  for (int y = 0; y < crop_h; ++y) {
    std::copy_n(gray.pixels.begin() + static_cast<std::ptrdiff_t>(y0 + y) * gray.width + x0, crop_w, &out.at(0, y));
  }
  return out;
}

std::string stratum_key(const SampleRecord& r) {
  return std::string(to_string(r.label)) + "/" + r.tool;
}

}  // namespace

const std::vector<std::string>& known_tools() {
  static const std::vector<std::string> tools{"amsl",     "facemorpher", "opencv",
                                              "stylegan2", "webmorph",    "facefusion"};
  return tools;
}

const std::vector<std::string>& known_source_dbs() {
  static const std::vector<std::string> dbs{"AMSL", "FRLL", "FERET", "FRGC"};
  return dbs;
}

const SampleRecord* DatasetManifest::find(const std::string& id) const {
  for (const auto& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

std::size_t DatasetManifest::count(Label label) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [&](const auto& r) { return r.label == label; }));
}

std::size_t DatasetManifest::count(Label label, const std::string& tool) const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [&](const auto& r) {
    return r.label == label && r.tool == tool;
  }));
}

std::vector<std::string> DatasetManifest::morph_tools() const {
  std::set<std::string> present;
  for (const auto& r : records) {
    if (r.label == Label::morph) present.insert(r.tool);
  }
  std::vector<std::string> ordered;
  for (const auto& t : known_tools()) {
    if (present.erase(t)) ordered.push_back(t);
  }
  ordered.insert(ordered.end(), present.begin(), present.end());
  return ordered;
}

DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                               const LoadOptions& options) {
  DatasetManifest manifest;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t columns = 0;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty()) continue;
    if (text.front() == '#') {
      const std::string body = trim(std::string_view(text).substr(1));
      if (body.rfind("version:", 0) == 0) manifest.version = trim(std::string_view(body).substr(8));
      continue;
    }
    auto fields = split(text, ',');
    for (auto& f : fields) f = trim(f);

    if (!header_seen) {
      header_seen = true;
      if (fields.size() < 5 || fields.size() > kHeader.size() ||
          !std::equal(fields.begin(), fields.end(), kHeader.begin())) {
        throw DataError(line_error(line_no, "expected header 'id,path,label,tool,source_db[,eye_lx,eye_ly,eye_rx,eye_ry]'"));
      }
      columns = fields.size();
      if (columns != 5 && columns != kHeader.size()) {
        throw DataError(line_error(line_no, "landmark columns must be given as a group of four"));
      }
      continue;
    }

    if (fields.size() != columns) {
      throw DataError(line_error(line_no, "expected " + std::to_string(columns) + " fields, got " +
                                              std::to_string(fields.size())));
    }

    SampleRecord record;
    record.id = fields[0];
    if (record.id.empty()) throw DataError(line_error(line_no, "empty id"));
    if (fields[1].empty()) throw DataError(line_error(line_no, "empty path"));
    record.path = fields[1];
    if (record.path.is_relative()) record.path = base_dir / record.path;
    try {
      record.label = parse_label(fields[2]);
    } catch (const DataError& e) {
      throw DataError(line_error(line_no, e.what()));
    }
    record.tool = to_lower(fields[3]);
    if (record.tool.empty()) record.tool = kNoTool;
    if (!valid_tool_tag(record.tool)) {
      throw DataError(line_error(line_no, "invalid tool tag '" + fields[3] + "'"));
    }
    if (record.label == Label::bonafide && record.tool != kNoTool) {
      throw DataError(line_error(line_no, "bona fide record must have tool 'none', got '" + record.tool + "'"));
    }
    if (record.label == Label::morph && record.tool == kNoTool) {
      throw DataError(line_error(line_no, "morph record needs a morphing tool tag"));
    }
    record.source_db = fields[4];
    const auto& dbs = known_source_dbs();
    const auto db = std::find_if(dbs.begin(), dbs.end(),
                                 [&](const std::string& d) { return to_lower(d) == to_lower(fields[4]); });
    if (db == dbs.end()) {
      throw DataError(line_error(line_no, "unknown source_db '" + fields[4] + "'"));
    }
    record.source_db = *db;

    if (columns == kHeader.size()) {
      const bool any = std::any_of(fields.begin() + 5, fields.end(), [](auto& f) { return !f.empty(); });
      const bool all = std::all_of(fields.begin() + 5, fields.end(), [](auto& f) { return !f.empty(); });
      if (any && !all) throw DataError(line_error(line_no, "partial eye landmarks"));
      if (all) {
        try {
          record.landmarks = EyePair{{parse_double(fields[5]), parse_double(fields[6])},
                                     {parse_double(fields[7]), parse_double(fields[8])}};
        } catch (const DataError& e) {
          throw DataError(line_error(line_no, e.what()));
        }
      }
    }

    if (!ids.insert(record.id).second) {
      throw DataError(line_error(line_no, "duplicate id '" + record.id + "'"));
    }
    if (!std::filesystem::exists(record.path)) {
      if (options.missing_files == MissingFilePolicy::fail) {
        throw DataError(line_error(line_no, "missing image file " + record.path.string()));
      }
      if (options.log) *options.log << "warning: " << line_error(line_no, "missing image file " + record.path.string() + ", skipped") << "\n";
      continue;
    }
    manifest.records.push_back(std::move(record));
  }

  if (manifest.records.empty()) throw DataError("manifest: no records");
  if (options.log) {
    *options.log << "manifest: " << manifest.records.size() << " records ("
                 << manifest.count(Label::bonafide) << " bona fide, " << manifest.count(Label::morph)
                 << " morph)\n";
  }
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  return parse_manifest(in, path.parent_path(), options);
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ostringstream out;
  out << "#version: " << manifest.version << "\n";
  out << "id,path,label,tool,source_db,eye_lx,eye_ly,eye_rx,eye_ry\n";
  for (const auto& r : manifest.records) {
    out << r.id << ',' << r.path.string() << ',' << to_string(r.label) << ',' << r.tool << ','
        << r.source_db;
    if (r.landmarks) {
      out << ',' << format_double(r.landmarks->left.x) << ',' << format_double(r.landmarks->left.y)
          << ',' << format_double(r.landmarks->right.x) << ','
          << format_double(r.landmarks->right.y) << "\n";
    } else {
      out << ",,,,\n";
    }
  }
  write_text_file(path, out.str());
}

AlignedFace preprocess_face(const Raster& image, const std::optional<EyePair>& landmarks,
                            std::string provenance) {
  check_image(image);
  const GrayImage gray = to_gray(image);
  AlignedFace face;
  face.provenance = std::move(provenance);
  if (landmarks) {
    check_landmarks(image, *landmarks);
    face.pixels = warp(gray, eyes_to_source(*landmarks), kFaceWidth, kFaceHeight);
  } else {
    face.pixels = resize_bilinear(centre_crop(gray), kFaceWidth, kFaceHeight);
  }
  return face;
}

GrayImage crop_face_source(const Raster& image, const std::optional<EyePair>& landmarks) {
  check_image(image);
  const GrayImage gray = to_gray(image);
  if (!landmarks) return centre_crop(gray);
  check_landmarks(image, *landmarks);
  const Similarity transform = eyes_to_source(*landmarks);
  const double factor = std::max(1.0, std::abs(transform.scale_rotation));
  const int width = static_cast<int>(std::lround(kFaceWidth * factor));
  const int height = static_cast<int>(std::lround(kFaceHeight * factor));
  return warp(gray, transform, width, height);
}

AlignedFace load_face(const SampleRecord& record) {
  try {
    return preprocess_face(load_image(record.path), record.landmarks, record.id);
  } catch (const DataError& e) {
    throw DataError("sample '" + record.id + "': " + e.what());
  }
}

SplitPair split_train_test(const std::vector<SampleRecord>& records, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw UsageError("split ratio must lie in (0,1)");
  std::map<std::string, std::vector<std::string>> strata;
  for (const auto& r : records) strata[stratum_key(r)].push_back(r.id);

  SplitPair split;
  split.seed = seed;
  split.ratio = ratio;
  for (auto& [key, ids] : strata) {
    if (ids.size() < 2) {
      throw DataError("stratum '" + key + "' has " + std::to_string(ids.size()) +
                      " sample(s); cannot split");
    }
    std::sort(ids.begin(), ids.end());
    Rng rng(combine_seeds(seed, hash_string(key)));
    rng.shuffle(ids);
    const auto n = static_cast<long>(ids.size());
    const long n_train = std::clamp<long>(std::lround(ratio * static_cast<double>(n)), 1, n - 1);
    split.train.insert(split.train.end(), ids.begin(), ids.begin() + n_train);
    split.test.insert(split.test.end(), ids.begin() + n_train, ids.end());
  }
  return split;
}

SplitPair split_train_test(const DatasetManifest& manifest, double ratio, std::uint64_t seed) {
  return split_train_test(manifest.records, ratio, seed);
}

}  // namespace smad::dataset
