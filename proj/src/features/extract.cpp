#include "smad/features/extract.hpp"

#include <cstdio>
#include <mutex>

#include "smad/error.hpp"
#include "smad/util.hpp"

namespace smad::features {

namespace {

bool is_pixel_grid(Method method) {
  switch (method) {
    case Method::RGB:
    case Method::ELA:
    case Method::SRM:
    case Method::DCT2:
    case Method::DFT:
    case Method::BSIF_IM:
      return true;
    default:
      return false;
  }
}

const BsifFilterBank& bank_for(const ExtractConfig& config) {
  if (config.bsif) return *config.bsif;
  static const BsifFilterBank bank = default_classification_bank();
  return bank;
}

const SrmKernelBank& srm_for(const ExtractConfig& config) {
  if (config.srm) return *config.srm;
  static const SrmKernelBank bank = SrmKernelBank::standard();
  return bank;
}

MethodOutput from(Extraction extraction, Method method) {
  extraction.map.method = std::string(to_string(method));
  extraction.vector.method = std::string(to_string(method));
  return {std::move(extraction.map), std::move(extraction.vector)};
}

}  // namespace

void ExtractConfig::validate() const {
  if (ela_quality < 1 || ela_quality > 100) throw UsageError("ela_quality must be in [1,100]");
  if (svd_rank < 1 || svd_rank > dataset::kFaceWidth) throw UsageError("svd_rank must be in [1,180]");
  if (dct_block < 0) throw UsageError("dct_block must be >= 0");
  if (bsif) bsif->validate();
  if (srm) srm->validate();
}

std::string ExtractConfig::fingerprint(Method method) const {
  std::string text(to_string(method));
  switch (method) {
    case Method::ELA:
      text += ";q=" + std::to_string(ela_quality);
      break;
    case Method::SVD:
      text += ";k=" + std::to_string(svd_rank);
      break;
    case Method::DCT2:
      text += ";block=" + std::to_string(dct_block);
      break;
    case Method::HOG:
      text += ";cells=" + std::to_string(hog.cells_x) + "x" + std::to_string(hog.cells_y) +
              ";bins=" + std::to_string(hog.bins) + ";block=" + std::to_string(hog.block);
      break;
    case Method::SRM:
      text += ";bank=" + sha256_hex(srm_for(*this).to_json()).substr(0, 16);
      break;
    case Method::BSIF_IM:
    case Method::BSIF_H:
    case Method::BSIF_NH: {
      const auto& bank = bank_for(*this);
      text += ";bank=" + bank.source_id + "@" + sha256_hex(bank.to_json()).substr(0, 16);
      break;
    }
    default:
      break;
  }
  if (before_resize) text += ";source-resolution";
  return text;
}

MethodOutput extract(const GrayImage& face, Method method, const ExtractConfig& config) {
  switch (method) {
    case Method::RGB:
      return from(extract_intensity(face), method);
    case Method::ELA:
      return from(extract_ela(face, config.ela_quality), method);
    case Method::SRM:
      return from(extract_srm(face, srm_for(config)), method);
    case Method::DCT2:
      return from(extract_dct2(face, config.dct_block), method);
    case Method::DFT:
      return from(extract_dft(face), method);
    case Method::HOG:
      return from(extract_hog(face, config.hog), method);
    case Method::SVD:
      return from(extract_svd(face, config.svd_rank), method);
    case Method::LBP81:
    case Method::FUSION_LBP:
    case Method::VLBP:
    case Method::HLBP: {
      MethodOutput out;
      FeatureMap map = extract_ulbp_map(face, {kLbpPoints, 1, true});
      if (method == Method::LBP81) {
        out.vector = ulbp_histogram(map);
      } else if (method == Method::FUSION_LBP) {
        out.vector = ulbp_fusion(face);
      } else {
        out.vector = ulbp_patch_concat(face, method == Method::VLBP ? Axis::vertical : Axis::horizontal);
      }
      out.vector.method = std::string(to_string(method));
      map.method = out.vector.method;
      out.map = std::move(map);
      return out;
    }
    case Method::BSIF_IM:
    case Method::BSIF_H:
    case Method::BSIF_NH: {
      BsifResult bsif = extract_bsif(face, bank_for(config));
      MethodOutput out;
      out.vector = method == Method::BSIF_IM  ? std::move(bsif.codes)
                   : method == Method::BSIF_H ? std::move(bsif.histogram)
                                              : std::move(bsif.normalised);
      bsif.code_map.method = std::string(to_string(method));
      out.map = std::move(bsif.code_map);
      return out;
    }
  }
  throw UsageError("unknown feature method");
}

MethodOutput extract(const dataset::AlignedFace& face, Method method, const ExtractConfig& config) {
  if (face.pixels.width != dataset::kFaceWidth || face.pixels.height != dataset::kFaceHeight) {
    throw UsageError("aligned face must be 180x240");
  }
  return extract(face.pixels, method, config);
}

MethodOutput extract_from_source(const GrayImage& source, Method method, const ExtractConfig& config) {
  MethodOutput out = extract(source, method, config);
  constexpr int kW = dataset::kFaceWidth;
  constexpr int kH = dataset::kFaceHeight;
  if (is_pixel_grid(method)) {
    const int channels = static_cast<int>(out.vector.dim() / source.size());
    const FeatureMap grid = make_map(source.width, source.height, channels, out.vector.values, out.vector.method);
    out.vector.values = resize_map(grid, kW, kH).values;
  } else if (method == Method::SVD) {
    out.vector.values.resize(std::min(kW, kH), 0.0);
  }
  if (out.map) out.map = resize_map(*out.map, kW, kH);
  return out;
}

std::size_t vector_dim(Method method, const ExtractConfig& config) {
  constexpr std::size_t kPixels = static_cast<std::size_t>(dataset::kFaceWidth) * dataset::kFaceHeight;
  switch (method) {
    case Method::RGB:
    case Method::ELA:
    case Method::DCT2:
    case Method::DFT:
    case Method::BSIF_IM:
      return kPixels;
    case Method::SRM:
      return kPixels * srm_for(config).kernels.size();
    case Method::LBP81:
      return kLbpBins;
    case Method::FUSION_LBP:
    case Method::VLBP:
    case Method::HLBP:
      return 8 * kLbpBins;
    case Method::HOG:
      return config.hog.dim();
    case Method::SVD:
      return std::min(dataset::kFaceWidth, dataset::kFaceHeight);
    case Method::BSIF_H:
    case Method::BSIF_NH:
      return std::size_t{1} << bank_for(config).bits;
  }
  throw UsageError("unknown feature method");
}

std::shared_ptr<const BsifFilterBank> resolve_bsif_bank(const std::string& spec, const std::filesystem::path& base) {
  int size = 0, size2 = 0, bits = 0;
  char tail = 0;
  if (std::sscanf(spec.c_str(), "%dx%d_%d%c", &size, &size2, &bits, &tail) == 3 && size == size2) {
    const auto path = bsif_bank_path(size, bits);
    if (!std::filesystem::exists(path)) throw UsageError("no shipped BSIF bank '" + spec + "'");
    return std::make_shared<BsifFilterBank>(BsifFilterBank::load(path));
  }
  std::filesystem::path path(spec);
  if (path.is_relative() && !base.empty()) path = base / path;
  if (!std::filesystem::exists(path)) throw UsageError("BSIF bank '" + spec + "' not found");
  return std::make_shared<BsifFilterBank>(BsifFilterBank::load(path));
}

}  // namespace smad::features
