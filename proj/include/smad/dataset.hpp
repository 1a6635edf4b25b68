#pragma once

// Manifest ingestion, face normalisation and stratified splitting.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "smad/image.hpp"
#include "smad/util.hpp"

namespace smad::dataset {

inline constexpr int kFaceWidth = 180;
inline constexpr int kFaceHeight = 240;

/// Eye positions in the canonical frame.
inline constexpr double kLeftEyeX = 58.0;
inline constexpr double kRightEyeX = 122.0;
inline constexpr double kEyeY = 96.0;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct EyePair {
  Point left;
  Point right;
};

inline constexpr const char* kNoTool = "none";

struct SampleRecord {
  std::string id;
  std::filesystem::path path;
  Label label = Label::bonafide;
  std::string tool = kNoTool;
  std::string source_db;
  std::optional<EyePair> landmarks;
};

struct DatasetManifest {
  std::string version = "1";
  std::vector<SampleRecord> records;

  const SampleRecord* find(const std::string& id) const;
  std::size_t count(Label label) const;
  std::size_t count(Label label, const std::string& tool) const;
  /// Distinct morph tool tags, in canonical order (known tools first).
  std::vector<std::string> morph_tools() const;
};

enum class MissingFilePolicy { fail, warn };

struct LoadOptions {
  MissingFilePolicy missing_files = MissingFilePolicy::fail;
  /// Destination for warnings and the record-count report; nullptr silences.
  std::ostream* log = nullptr;
};

/// Reads the CSV manifest
///   id,path,label,tool,source_db[,eye_lx,eye_ly,eye_rx,eye_ry]
/// Relative image paths resolve against the manifest's directory. Lines
/// starting with '#' are comments; "#version: X" sets the format version.
DatasetManifest load_manifest(const std::filesystem::path& path, const LoadOptions& options = {});
DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                               const LoadOptions& options = {});
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Known morph tool tags. The vocabulary is open: any lowercase tag other
/// than "none" is accepted for morphs.
const std::vector<std::string>& known_tools();
const std::vector<std::string>& known_source_dbs();

/// Canonical 180x240 grayscale face.
struct AlignedFace {
  GrayImage pixels;
  std::string provenance;
};

/// Normalises a decoded image to the canonical frame. With landmarks, a
/// similarity transform puts the eyes at (58,96) and (122,96); without, the
/// image is centre-cropped to 3:4 and resized. Sampling is bilinear.
AlignedFace preprocess_face(const Raster& image, const std::optional<EyePair>& landmarks,
                            std::string provenance = {});

/// Same geometry as preprocess_face but at the source resolution, for
/// extractors configured to run before the resize.
GrayImage crop_face_source(const Raster& image, const std::optional<EyePair>& landmarks);

AlignedFace load_face(const SampleRecord& record);

struct SplitPair {
  std::vector<std::string> train;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
  double ratio = 0.7;
};

/// Stratified by (label, tool). Each stratum is shuffled with a seed derived
/// from `seed` and the stratum key; round(ratio * n) members go to train,
/// clamped so both sides keep at least one.
SplitPair split_train_test(const std::vector<SampleRecord>& records, double ratio, std::uint64_t seed);
SplitPair split_train_test(const DatasetManifest& manifest, double ratio, std::uint64_t seed);

}  // namespace smad::dataset
