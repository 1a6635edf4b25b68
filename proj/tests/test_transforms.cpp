#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "smad/features/extractors.hpp"
#include "smad/features/transforms.hpp"

using namespace smad;
using namespace smad::features;

namespace {

std::vector<double> random_grid(std::uint64_t seed, int w, int h) {
  Rng rng(seed);
  std::vector<double> v(static_cast<std::size_t>(w) * h);
  for (auto& x : v) x = rng.uniform() * 255.0;
  return v;
}

std::vector<double> as_doubles(const GrayImage& img) { return {img.pixels.begin(), img.pixels.end()}; }

}  // namespace

TEST_CASE("dft2 matches the direct double sum") {
  for (auto [w, h] : {std::pair{12, 10}, std::pair{7, 9}, std::pair{16, 16}}) {
    auto x = random_grid(w * 100 + h, w, h);
    auto fast = dft2(x, w, h);
    auto slow = oracle::dft2(x, w, h);
    double scale = 0;
    for (auto& c : slow) scale = std::max(scale, std::abs(c));
    for (std::size_t i = 0; i < slow.size(); ++i) CHECK(std::abs(fast.values[i] - slow[i]) <= 1e-10 * scale);
  }
}

TEST_CASE("fftshift moves DC to the centre") {
  std::vector<double> v(6 * 4, 0.0);
  v[0] = 1.0;
  auto s = fftshift(v, 6, 4);
  CHECK(s[2 * 6 + 3] == 1.0);
  std::vector<double> odd(5 * 3);
  for (std::size_t i = 0; i < odd.size(); ++i) odd[i] = static_cast<double>(i);
  auto so = fftshift(odd, 5, 3);
  CHECK(so[1 * 5 + 2] == 0.0);
}

TEST_CASE("constant face concentrates the DFT in the centre cell") {
  auto face = testing::constant_image(128);
  auto e = extract_dft(face);
  REQUIRE(e.map.width == 180);
  REQUIRE(e.map.height == 240);
  const double centre = e.map.at(90, 120);
  CHECK(centre == doctest::Approx(std::log1p(128.0 * 180 * 240)).epsilon(1e-12));
  double off = 0;
  for (int y = 0; y < 240; ++y) {
    for (int x = 0; x < 180; ++x) {
      if (x != 90 || y != 120) off = std::max(off, e.map.at(x, y));
    }
  }
  // relative to the DC magnitude the leakage is at roundoff level
  CHECK(std::expm1(off) <= 1e-12 * 128.0 * 180 * 240);
}

TEST_CASE("impulse gives a flat unit spectrum") {
  GrayImage face(180, 240, 0);
  face.at(37, 101) = 1;
  auto e = extract_dft(face);
  for (double v : e.map.values) CHECK(v == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("horizontal cosine gives two symmetric peaks on the horizontal axis") {
  const int n = 16;
  for (int f : {1, 3, 5}) {
    std::vector<double> x(n * n);
    for (int y = 0; y < n; ++y) {
      for (int xx = 0; xx < n; ++xx) x[y * n + xx] = std::cos(2 * std::numbers::pi * f * xx / n);
    }
    auto fast = dft2(x, n, n);
    auto slow = oracle::dft2(x, n, n);
    std::vector<double> mag(n * n);
    for (int i = 0; i < n * n; ++i) {
      mag[i] = std::abs(fast.values[i]);
      CHECK(std::abs(fast.values[i] - slow[i]) < 1e-9);
    }
    auto shifted = fftshift(mag, n, n);
    for (int v = 0; v < n; ++v) {
      for (int u = 0; u < n; ++u) {
        bool peak = v == n / 2 && (u == n / 2 + f || u == n / 2 - f);
        if (peak) {
          CHECK(shifted[v * n + u] == doctest::Approx(n * n / 2.0).epsilon(1e-12));
        } else {
          CHECK(shifted[v * n + u] < 1e-9);
        }
      }
    }
  }
}

TEST_CASE("dct2 matches the direct formula") {
  for (auto [w, h] : {std::pair{8, 8}, std::pair{12, 9}, std::pair{5, 11}}) {
    auto x = random_grid(w * 7 + h, w, h);
    auto fast = dct2(x, w, h);
    auto slow = oracle::dct2(x, w, h);
    for (std::size_t i = 0; i < slow.size(); ++i) CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-10).scale(255));
  }
}

TEST_CASE("constant image has only the (0,0) DCT coefficient") {
  auto c = dct2(as_doubles(testing::constant_image(77)), 180, 240);
  CHECK(c[0] == doctest::Approx(77.0 * std::sqrt(180.0 * 240.0)).epsilon(1e-12));
  for (std::size_t i = 1; i < c.size(); ++i) CHECK(std::abs(c[i]) <= 1e-12 * c[0]);
}

TEST_CASE("linear horizontal ramp: energy in row 0, decaying with column") {
  const int n = 8;
  std::vector<double> x(n * n);
  for (int y = 0; y < n; ++y) {
    for (int xx = 0; xx < n; ++xx) x[y * n + xx] = 10.0 * xx;
  }
  auto c = dct2(x, n, n);
  auto ref = oracle::dct2(x, n, n);
  double row0 = 0, rest = 0;
  for (int v = 0; v < n; ++v) {
    for (int u = 0; u < n; ++u) {
      CHECK(c[v * n + u] == doctest::Approx(ref[v * n + u]).epsilon(1e-10).scale(100));
      (v == 0 ? row0 : rest) += c[v * n + u] * c[v * n + u];
    }
  }
  CHECK(rest < 1e-18 * row0);
  // odd-index AC coefficients carry the ramp and shrink with frequency; even ones vanish
  for (int u = 3; u < n; u += 2) CHECK(std::abs(c[u]) < std::abs(c[u - 2]));
  for (int u = 2; u < n; u += 2) CHECK(std::abs(c[u]) < 1e-9);
}

TEST_CASE("dct round trip and Parseval on a face-sized grid") {
  auto x = random_grid(99, 180, 240);
  auto c = dct2(x, 180, 240);
  auto back = idct2(c, 180, 240);
  double se = 0, ex = 0, ec = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    se += (back[i] - x[i]) * (back[i] - x[i]);
    ex += x[i] * x[i];
    ec += c[i] * c[i];
  }
  CHECK(std::sqrt(se / x.size()) <= 1e-9);
  CHECK(std::abs(ec - ex) <= 1e-6 * ex);

  auto f = dft2(x, 180, 240);
  double ef = 0;
  for (const auto& v : f.values) ef += std::norm(v);
  CHECK(std::abs(ef / x.size() - ex) <= 1e-6 * ex);
}

TEST_CASE("blockwise dct equals dct of each tile") {
  auto x = random_grid(5, 20, 12);
  auto b = dct2_blockwise(x, 20, 12, 8);
  for (int ty = 0; ty < 12; ty += 8) {
    for (int tx = 0; tx < 20; tx += 8) {
      int w = std::min(8, 20 - tx), h = std::min(8, 12 - ty);
      std::vector<double> tile;
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) tile.push_back(x[(ty + y) * 20 + tx + xx]);
      }
      auto ref = oracle::dct2(tile, w, h);
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
          CHECK(b[(ty + y) * 20 + tx + xx] == doctest::Approx(ref[y * w + xx]).epsilon(1e-10).scale(255));
        }
      }
    }
  }
}

TEST_CASE("DCT2 extractor") {
  auto face = testing::texture(3);
  auto e = extract_dct2(face);
  CHECK(e.vector.dim() == 43200);
  CHECK(e.map.width == 180);
  auto c = dct2(as_doubles(face), 180, 240);
  CHECK(e.vector.values[17] == doctest::Approx(std::log1p(std::abs(c[17]))).epsilon(1e-14));
  CHECK(extract_dct2(face, 8).vector.dim() == 43200);
}

TEST_CASE("SVD identities") {
  SUBCASE("rank one image") {
    GrayImage img(180, 240);
    for (int y = 0; y < 240; ++y) {
      for (int x = 0; x < 180; ++x) img.at(x, y) = static_cast<std::uint8_t>((1 + y % 15) * (1 + x % 17));
    }
    auto s = singular_values(img);
    REQUIRE(s.size() == 180);
    for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i] <= 1e-8 * s[0]);
    for (int k : {1, 5, 20}) {
      auto e = extract_svd(img, k);
      for (double v : e.map.values) CHECK(v <= 1e-8 * s[0]);
    }
  }
  SUBCASE("energy equals squared Frobenius norm") {
    auto img = testing::texture(12);
    auto s = singular_values(img);
    double fro = 0, energy = 0;
    for (auto p : img.pixels) fro += static_cast<double>(p) * p;
    for (double v : s) energy += v * v;
    CHECK(std::abs(energy - fro) <= 1e-6 * fro);
    for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i] <= s[i - 1]);
  }
  SUBCASE("full rank reconstruction has zero residual") {
    auto e = extract_svd(testing::texture(13), 180);
    for (double v : e.map.values) CHECK(std::abs(v) <= 1e-8);
  }
  SUBCASE("vector is log1p of the spectrum, dim 180") {
    auto img = testing::texture(14);
    auto e = extract_svd(img);
    auto s = singular_values(img);
    REQUIRE(e.vector.dim() == 180);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(e.vector.values[i] == doctest::Approx(std::log1p(s[i])));
  }
  SUBCASE("rank bounds") {
    CHECK_THROWS(extract_svd(testing::texture(1), 0));
    CHECK_THROWS(extract_svd(testing::texture(1), 181));
  }
}
