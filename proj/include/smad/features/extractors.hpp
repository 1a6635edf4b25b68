#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "smad/image.hpp"
#include "smad/features/types.hpp"

namespace smad::features {

struct Extraction {
  FeatureMap map;
  FeatureVector vector;
};

// Every extractor accepts a grayscale raster of any size; the pipeline feeds
// them the canonical 180x240 face.

/// Pixels scaled to [0,1]; vector is the row-major flatten.
Extraction extract_intensity(const GrayImage& face);

/// log(1 + |F|) of the 2-D DFT with the zero frequency shifted to the centre.
Extraction extract_dft(const GrayImage& face);

/// log(1 + |C|) of the orthonormal type-II DCT. block == 0 transforms the
/// whole image; otherwise block x block tiles.
Extraction extract_dct2(const GrayImage& face, int block = 0);

inline constexpr int kDefaultElaQuality = 70;

/// Error level analysis: |face - jpeg(face, quality)|. The vector holds the
/// raw residual; the map is amplified by 255 / max(residual, 1).
Extraction extract_ela(const GrayImage& face, int quality = kDefaultElaQuality);

struct Kernel {
  std::string name;
  int size = 0;  // odd
  std::vector<double> weights;  // row-major size x size
};

/// Fixed high-pass residual kernels, one output channel each.
struct SrmKernelBank {
  std::vector<Kernel> kernels;

  /// Second-order 3x3 (1/2), 5x5 SQUARE (1/12), 5x5 second-order (1/4).
  static SrmKernelBank standard();
  static SrmKernelBank load(const std::filesystem::path& path);
  static SrmKernelBank from_json(const std::string& text);
  std::string to_json() const;
  /// Throws DataError unless every kernel is odd-sized and sums to zero.
  void validate() const;
};

/// Correlates the face with each kernel using reflect-101 borders.
/// Responses are taken relative to the centre pixel so zero-sum kernels
/// give exactly zero on flat regions.
Extraction extract_srm(const GrayImage& face, const SrmKernelBank& bank = SrmKernelBank::standard());

inline constexpr int kDefaultSvdRank = 20;

/// Map: |A - A_k| for the rank-k truncation. Vector: log(1 + sigma_i) for
/// all min(width, height) singular values, descending.
Extraction extract_svd(const GrayImage& face, int rank = kDefaultSvdRank);

/// Singular values of the pixel matrix, descending.
std::vector<double> singular_values(const GrayImage& face);

// --- uniform LBP -----------------------------------------------------------

inline constexpr int kLbpPoints = 8;
inline constexpr int kLbpBins = 59;
inline constexpr int kLbpNonUniform = 58;

struct LbpParams {
  int points = kLbpPoints;
  int radius = 1;
  bool uniform = true;

  void validate() const;
};

/// Number of 0/1 transitions in the circular 8-bit pattern.
int circular_transitions(std::uint8_t pattern);
/// Uniform label 0..57 (uniform patterns in increasing code order) or 58.
int uniform_label(std::uint8_t pattern);
/// Raw 8-bit pattern at one pixel; bit i is set when neighbour i (angle
/// 2*pi*i/8, bilinear sampled) >= centre.
std::uint8_t lbp_pattern(const GrayImage& face, int x, int y, int radius);

/// Code map of the interior (border of width R dropped): size
/// (W - 2R) x (H - 2R), values are uniform labels.
FeatureMap extract_ulbp_map(const GrayImage& face, const LbpParams& params = {});

/// 59-bin histogram normalised to sum 1.
FeatureVector ulbp_histogram(const FeatureMap& map);
/// Raw counts; sums to the interior pixel count.
std::vector<double> ulbp_counts(const FeatureMap& map);

/// Histograms for R = 1..8 concatenated (472 values).
FeatureVector ulbp_fusion(const GrayImage& face);

enum class Axis { vertical, horizontal };

/// Eight strips along the axis (vertical: stacked top to bottom,
/// horizontal: left to right), one normalised uLBP(8,1) histogram each.
/// Interior pixels are assigned to strip floor(8 * coord / extent) using
/// their original image coordinate.
FeatureVector ulbp_patch_concat(const GrayImage& face, Axis axis);

// --- BSIF ------------------------------------------------------------------

struct BsifFilterBank {
  int size = 0;
  int bits = 0;
  std::vector<std::vector<double>> filters;  // bits kernels, row-major size x size
  std::string source_id;

  /// Throws DataError on shape mismatch or a filter whose mean exceeds 1e-6.
  void validate() const;
  static BsifFilterBank load(const std::filesystem::path& path);
  static BsifFilterBank from_json(const std::string& text, std::string source_id);
  std::string to_json() const;
};

std::filesystem::path bsif_bank_path(int size, int bits);
/// All bank files found under data_dir()/bsif, sorted by (size, bits).
std::vector<std::filesystem::path> shipped_bsif_banks();
BsifFilterBank load_bsif_bank(int size, int bits);
/// 3x3, 5 bits.
BsifFilterBank default_classification_bank();
/// 5x5, 9 bits.
BsifFilterBank default_reporting_bank();

/// Learns a zero-mean whitened filter bank from patches of a seeded
/// synthetic 1/f texture (PCA on mean-removed patches, leading components).
BsifFilterBank generate_bsif_bank(int size, int bits, std::uint64_t seed);

struct BsifResult {
  FeatureMap code_map;          // BSIF_IM visual
  FeatureVector codes;          // BSIF_IM: flattened code image
  FeatureVector histogram;      // BSIF_H: raw 2^bits counts
  FeatureVector normalised;     // BSIF_NH
};

/// One filter's response at every pixel, taken relative to the centre
/// pixel so that zero-mean filters give exactly zero on flat regions.
std::vector<double> bsif_response(const GrayImage& face, const std::vector<double>& filter, int size);

/// bit_i = 1 iff (filter_i * face) > 0; code = sum bit_i 2^i. Reflect-101
/// borders, so every pixel receives a code.
BsifResult extract_bsif(const GrayImage& face, const BsifFilterBank& bank);

// --- HOG -------------------------------------------------------------------

struct HogParams {
  int cells_x = 10;
  int cells_y = 12;
  int bins = 9;
  int block = 3;  // normalisation neighbourhood in cells

  std::size_t dim() const { return static_cast<std::size_t>(cells_x) * cells_y * bins; }
};

struct HogResult {
  /// cells_y x cells_x x bins orientation histograms before normalisation.
  std::vector<double> cell_histograms;
  Extraction extraction;
};

/// Centred-difference gradients, unsigned orientation bins centred at
/// k * 180/bins degrees with linear vote splitting, each cell normalised by
/// the L2 norm of its block x block cell neighbourhood. Map: glyph
/// rendering with strokes along the edge direction.
HogResult extract_hog_detailed(const GrayImage& face, const HogParams& params = {});
Extraction extract_hog(const GrayImage& face, const HogParams& params = {});

}  // namespace smad::features
