#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "smad/dataset.hpp"
#include "smad/features/extractors.hpp"

namespace smad::features {

struct ExtractConfig {
  int ela_quality = kDefaultElaQuality;
  int svd_rank = kDefaultSvdRank;
  int dct_block = 0;
  HogParams hog;
  /// Null selects the default classification bank (3x3, 5 bits).
  std::shared_ptr<const BsifFilterBank> bsif;
  /// Null selects SrmKernelBank::standard().
  std::shared_ptr<const SrmKernelBank> srm;
  /// Run extractors on the pre-resize raster and downscale afterwards.
  bool before_resize = false;

  /// Stable text identifying every parameter that affects `method`.
  std::string fingerprint(Method method) const;
  void validate() const;
};

struct MethodOutput {
  std::optional<FeatureMap> map;
  FeatureVector vector;
};

/// "<k>x<k>_<bits>" names a shipped bank; anything else is a file path,
/// resolved against `base` when relative. Throws UsageError when missing.
std::shared_ptr<const BsifFilterBank> resolve_bsif_bank(const std::string& spec,
                                                       const std::filesystem::path& base = {});

/// Dispatch over the fourteen methods. LBP81 is the R=1 histogram,
/// FUSION_LBP the R=1..8 concatenation, VLBP/HLBP the strip
/// concatenations, RGB the grayscale intensity. LBP variants carry the R=1
/// code map.
MethodOutput extract(const GrayImage& face, Method method, const ExtractConfig& config = {});
MethodOutput extract(const dataset::AlignedFace& face, Method method, const ExtractConfig& config = {});

/// Runs `method` on a source-resolution raster. Pixel-grid outputs (maps
/// and flatten vectors) are resized to the canonical 180x240 frame so that
/// dimensions stay fixed; histogram/spectrum vectors are kept as computed.
MethodOutput extract_from_source(const GrayImage& source, Method method, const ExtractConfig& config = {});

/// Vector dimension for a method under `config` on the canonical face.
std::size_t vector_dim(Method method, const ExtractConfig& config = {});

// Feature vector files: CSV rows `id,method,v0,...,vN` with a header line.
struct FeatureRow {
  std::string id;
  FeatureVector vector;
};

void write_vectors_csv(const std::filesystem::path& path, const std::vector<FeatureRow>& rows);
std::vector<FeatureRow> read_vectors_csv(const std::filesystem::path& path);

}  // namespace smad::features
