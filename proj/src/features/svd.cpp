#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "smad/error.hpp"
#include "smad/features/extractors.hpp"

namespace smad::features {

namespace {

Eigen::MatrixXd to_matrix(const GrayImage& face) {
  Eigen::MatrixXd a(face.height, face.width);
  for (int y = 0; y < face.height; ++y) {
    for (int x = 0; x < face.width; ++x) a(y, x) = face.at(x, y);
  }
  return a;
}

}  // namespace

std::vector<double> singular_values(const GrayImage& face) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(to_matrix(face));
  if (svd.info() != Eigen::Success) throw Error("SVD extractor: decomposition did not converge");
  const auto& s = svd.singularValues();
  return std::vector<double>(s.data(), s.data() + s.size());
}

Extraction extract_svd(const GrayImage& face, int rank) {
  const int full = std::min(face.width, face.height);
  if (rank < 1 || rank > full) {
    throw UsageError("SVD rank must be in [1," + std::to_string(full) + "], got " + std::to_string(rank));
  }
  const Eigen::MatrixXd a = to_matrix(face);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw Error("SVD extractor: decomposition did not converge");

  const auto& s = svd.singularValues();
  const Eigen::MatrixXd approx = svd.matrixU().leftCols(rank) * s.head(rank).asDiagonal() *
                                 svd.matrixV().leftCols(rank).transpose();
  std::vector<double> residual(face.size());
  for (int y = 0; y < face.height; ++y) {
    for (int x = 0; x < face.width; ++x) {
      residual[static_cast<std::size_t>(y) * face.width + x] = std::abs(a(y, x) - approx(y, x));
    }
  }

  std::vector<double> spectrum(static_cast<std::size_t>(s.size()));
  for (Eigen::Index i = 0; i < s.size(); ++i) spectrum[i] = std::log1p(std::max(0.0, s(i)));

  Extraction out;
  out.vector = {"SVD", std::move(spectrum)};
  out.map = make_map(face.width, face.height, 1, std::move(residual), "SVD");
  return out;
}

}  // namespace smad::features
