#include "smad/features/extractors.hpp"

namespace smad::features {

Extraction extract_intensity(const GrayImage& face) {
  std::vector<double> values(face.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = face.pixels[i] / 255.0;
  Extraction out;
  out.vector = {"RGB", values};
  out.map = make_map(face.width, face.height, 1, std::move(values), "RGB");
  return out;
}

}  // namespace smad::features
