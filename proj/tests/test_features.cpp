#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <bit>
#include <cmath>
#include <numeric>
#include <set>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "smad/error.hpp"
#include "smad/features/extract.hpp"
#include "smad/render.hpp"

using namespace smad;
using namespace smad::features;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

GrayImage noise_image(std::uint64_t seed, int w, int h) {
  Rng rng(seed);
  GrayImage img(w, h);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

double chi_square(const double* a, const double* b, int n) {
  double d = 0;
  for (int i = 0; i < n; ++i) {
    if (a[i] + b[i] > 0) d += (a[i] - b[i]) * (a[i] - b[i]) / (a[i] + b[i]);
  }
  return d;
}

}  // namespace

TEST_CASE("method names") {
  CHECK(kAllMethods.size() == 14);
  CHECK(parse_method("bsif-nh") == Method::BSIF_NH);
  CHECK(parse_method("fusion_lbp") == Method::FUSION_LBP);
  CHECK_FALSE(parse_method("SIFT").has_value());
  CHECK_THROWS_AS(parse_method_list("ELA,SIFT"), UsageError);
  for (auto m : kAllMethods) CHECK(parse_method(to_string(m)) == m);
}

TEST_CASE("intensity") {
  auto zero = extract_intensity(testing::constant_image(0));
  for (double v : zero.map.values) CHECK(v == 0.0);
  auto full = extract_intensity(testing::constant_image(255));
  for (double v : full.map.values) CHECK(v == 1.0);
  auto mid = extract_intensity(testing::constant_image(128));
  CHECK(mid.map.values[0] == doctest::Approx(0.50196).epsilon(1e-5));
  CHECK(mid.vector.dim() == 43200);
}

TEST_CASE("ELA") {
  CHECK_THROWS_AS(extract_ela(testing::texture(1), 0), UsageError);
  CHECK_THROWS_AS(extract_ela(testing::texture(1), 101), UsageError);
  auto flat = extract_ela(testing::constant_image(128));
  CHECK(*std::max_element(flat.vector.values.begin(), flat.vector.values.end()) <= 2.0);

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto clean = jpeg_roundtrip(testing::texture(seed), 70);
    auto tampered = clean;
    auto foreign = noise_image(seed + 100, 8, 8);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) tampered.at(83 + x, 117 + y) = foreign.at(x, y);
    }
    double a = sum(extract_ela(clean).vector.values) / 43200;
    double b = sum(extract_ela(tampered).vector.values) / 43200;
    CHECK(a < b);
  }
  auto e = extract_ela(testing::texture(4));
  double peak = *std::max_element(e.vector.values.begin(), e.vector.values.end());
  CHECK(*std::max_element(e.map.values.begin(), e.map.values.end()) == doctest::Approx(255.0));
  CHECK(e.map.values[5] == doctest::Approx(e.vector.values[5] * 255.0 / std::max(peak, 1.0)));
}

TEST_CASE("SRM") {
  auto zero = extract_srm(testing::constant_image(200));
  CHECK(zero.map.channels == 3);
  for (double v : zero.vector.values) CHECK(v == 0.0);
  CHECK(zero.vector.dim() == 3 * 43200);

  GrayImage step(10, 10, 20);
  for (int y = 0; y < 10; ++y) {
    for (int x = 5; x < 10; ++x) step.at(x, y) = 220;
  }
  auto srm = extract_srm(step);
  auto bank = SrmKernelBank::standard();
  // The two 5x5 kernels annihilate images that are constant along y, so the
  // edge response comes from the 3x3 kernel; the combined magnitude is what
  // must sit on the edge band.
  std::vector<double> column_peak(10, 0.0);
  for (int c = 0; c < 3; ++c) {
    auto ref = oracle::correlate(step, bank.kernels[c].weights, bank.kernels[c].size);
    for (int y = 0; y < 10; ++y) {
      for (int x = 0; x < 10; ++x) {
        CHECK(srm.map.at(x, y, c) == doctest::Approx(ref[y * 10 + x]).epsilon(1e-12).scale(1.0));
        column_peak[x] = std::max(column_peak[x], std::abs(ref[y * 10 + x]));
      }
    }
  }
  auto peak_x = std::max_element(column_peak.begin(), column_peak.end()) - column_peak.begin();
  CHECK(column_peak[peak_x] > 0);
  CHECK((peak_x == 4 || peak_x == 5));
  for (int x = 0; x < 10; ++x) {
    if (x < 3 || x > 6) CHECK(column_peak[x] <= 1e-9);
  }
  auto text = bank.to_json();
  auto back = SrmKernelBank::from_json(text);
  CHECK(back.to_json() == text);
  auto shipped = SrmKernelBank::load(data_dir() / "srm_kernels.json");
  REQUIRE(shipped.kernels.size() == 3);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < bank.kernels[c].weights.size(); ++i) {
      CHECK(shipped.kernels[c].weights[i] == doctest::Approx(bank.kernels[c].weights[i]).epsilon(1e-15));
    }
  }
  CHECK_THROWS_AS(SrmKernelBank::from_json(R"({"kernels":[{"name":"bad","size":3,"weights":[0,0,0,0,1,0,0,0,0]}]})"),
                  DataError);
}

TEST_CASE("uLBP alphabet") {
  int uniform = 0;
  std::set<int> labels;
  for (int code = 0; code < 256; ++code) {
    CHECK(circular_transitions(static_cast<std::uint8_t>(code)) == oracle::transitions(code));
    if (oracle::transitions(code) <= 2) {
      ++uniform;
      labels.insert(uniform_label(static_cast<std::uint8_t>(code)));
    } else {
      CHECK(uniform_label(static_cast<std::uint8_t>(code)) == kLbpNonUniform);
    }
  }
  CHECK(uniform == 58);
  CHECK(labels.size() == 58);
  CHECK(*labels.rbegin() == 57);
  CHECK(kLbpBins == 59);
}

TEST_CASE("uLBP patterns agree with direct sampling") {
  auto img = noise_image(31, 40, 30);
  for (int r = 1; r <= 3; ++r) {
    for (int y = r; y < 30 - r; ++y) {
      for (int x = r; x < 40 - r; ++x) CHECK(lbp_pattern(img, x, y, r) == oracle::lbp(img, x, y, r));
    }
  }
  auto face = testing::texture(2);
  for (int r : {1, 4, 8}) {
    auto map = extract_ulbp_map(face, {8, r, true});
    CHECK(map.width == 180 - 2 * r);
    CHECK(map.height == 240 - 2 * r);
    for (int y = 0; y < map.height; y += 7) {
      for (int x = 0; x < map.width; x += 5) {
        CHECK(map.at(x, y) == uniform_label(static_cast<std::uint8_t>(oracle::lbp(face, x + r, y + r, r))));
      }
    }
    CHECK(sum(ulbp_counts(map)) == map.width * map.height);
  }
}

TEST_CASE("uLBP on simple images") {
  SUBCASE("constant image yields the all-ones pattern everywhere") {
    auto map = extract_ulbp_map(testing::constant_image(90));
    for (double v : map.values) CHECK(v == uniform_label(0xFF));
    auto h = ulbp_histogram(map);
    CHECK(h.values[uniform_label(0xFF)] == 1.0);
    CHECK(sum(h.values) == 1.0);
  }
  SUBCASE("single bright pixel: its neighbours produce uniform codes") {
    GrayImage img(9, 9, 10);
    img.at(4, 4) = 250;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        auto code = lbp_pattern(img, 4 + dx, 4 + dy, 1);
        CHECK(code == oracle::lbp(img, 4 + dx, 4 + dy, 1));
        CHECK(circular_transitions(code) <= 2);
      }
    }
    CHECK(lbp_pattern(img, 4, 4, 1) == 0);
  }
  SUBCASE("checkerboard mass sits on the all-ones and all-zeros patterns") {
    GrayImage img(8, 8);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) img.at(x, y) = (x + y) % 2 ? 255 : 0;
    }
    auto map = extract_ulbp_map(img);
    auto counts = ulbp_counts(map);
    std::vector<double> expected(kLbpBins, 0.0);
    for (int y = 1; y < 7; ++y) {
      for (int x = 1; x < 7; ++x) expected[uniform_label(static_cast<std::uint8_t>(oracle::lbp(img, x, y, 1)))] += 1;
    }
    CHECK(counts == expected);
    CHECK(counts[uniform_label(0xFF)] + counts[uniform_label(0x00)] == 36);
  }
  SUBCASE("every normalised histogram sums to one") {
    for (std::uint64_t s = 0; s < 5; ++s) {
      auto h = ulbp_histogram(extract_ulbp_map(testing::texture(s)));
      CHECK(h.dim() == 59);
      CHECK(std::abs(sum(h.values) - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("uLBP fusion and strip concatenation") {
  auto face = testing::texture(8);
  auto fused = ulbp_fusion(face);
  REQUIRE(fused.dim() == 472);
  for (int r = 1; r <= 8; ++r) {
    auto h = ulbp_histogram(extract_ulbp_map(face, {8, r, true}));
    for (int i = 0; i < 59; ++i) CHECK(fused.values[(r - 1) * 59 + i] == h.values[i]);
  }
  auto flat = ulbp_fusion(testing::constant_image(3));
  for (int r = 0; r < 8; ++r) CHECK(flat.values[r * 59 + uniform_label(0xFF)] == 1.0);
  CHECK(sum(flat.values) == 8.0);

  for (auto axis : {Axis::vertical, Axis::horizontal}) {
    auto v = ulbp_patch_concat(face, axis);
    CHECK(v.dim() == 472);
    for (int s = 0; s < 8; ++s) CHECK(std::abs(sum({v.values.begin() + s * 59, v.values.begin() + (s + 1) * 59}) - 1.0) <= 1e-9);
    auto c = ulbp_patch_concat(testing::constant_image(9), axis);
    for (int s = 0; s < 8; ++s) CHECK(c.values[s * 59 + uniform_label(0xFF)] == 1.0);
  }

  GrayImage half(180, 240, 30);
  auto noise = noise_image(4, 180, 240);
  for (int y = 120; y < 240; ++y) {
    for (int x = 0; x < 180; ++x) half.at(x, y) = noise.at(x, y);
  }
  auto v = ulbp_patch_concat(half, Axis::vertical);
  for (int top = 0; top < 4; ++top) {
    for (int bottom = 4; bottom < 8; ++bottom) {
      CHECK(chi_square(&v.values[top * 59], &v.values[bottom * 59], 59) > 0.0);
    }
  }
  // oracle for the last strip: rows with floor(8 * y / 240) == 7
  std::vector<double> counts(59, 0.0);
  for (int y = 210; y < 239; ++y) {
    for (int x = 1; x < 179; ++x) counts[uniform_label(static_cast<std::uint8_t>(oracle::lbp(half, x, y, 1)))] += 1;
  }
  double total = sum(counts);
  for (int i = 0; i < 59; ++i) CHECK(v.values[7 * 59 + i] == doctest::Approx(counts[i] / total).epsilon(1e-12));
}

TEST_CASE("BSIF") {
  auto bank = default_classification_bank();
  CHECK(bank.size == 3);
  CHECK(bank.bits == 5);
  auto flat = extract_bsif(testing::constant_image(140), bank);
  for (double v : flat.codes.values) CHECK(v == 0.0);
  CHECK(flat.histogram.dim() == 32);
  CHECK(flat.histogram.values[0] == 43200.0);
  CHECK(flat.normalised.values[0] == 1.0);

  auto reporting = default_reporting_bank();
  auto face = testing::texture(5);
  auto r = extract_bsif(face, reporting);
  CHECK(r.histogram.dim() == 512);
  CHECK(std::abs(sum(r.normalised.values) - 1.0) <= 1e-9);
  CHECK(sum(r.histogram.values) == 43200.0);

  // code bits agree with the sign of a direct correlation
  int checked = 0;
  std::vector<std::vector<double>> responses;
  for (const auto& f : reporting.filters) responses.push_back(oracle::correlate(face, f, reporting.size));
  for (std::size_t p = 0; p < face.size(); p += 37) {
    int code = 0;
    bool clear = true;
    for (int b = 0; b < reporting.bits; ++b) {
      if (std::abs(responses[b][p]) < 1e-6) clear = false;
      if (responses[b][p] > 0) code |= 1 << b;
    }
    if (!clear) continue;
    CHECK(r.codes.values[p] == code);
    ++checked;
  }
  CHECK(checked > 1000);

  auto bad = bank;
  bad.filters[0][0] += 1.0;
  CHECK_THROWS_AS(bad.validate(), DataError);
  auto wrong = bank;
  wrong.filters.pop_back();
  CHECK_THROWS_AS(wrong.validate(), DataError);
}

TEST_CASE("all shipped BSIF banks load with zero-mean filters") {
  auto banks = shipped_bsif_banks();
  CHECK(banks.size() == 60);
  for (const auto& path : banks) {
    auto b = BsifFilterBank::load(path);
    CHECK_NOTHROW(b.validate());
    CHECK(static_cast<int>(b.filters.size()) == b.bits);
    auto zero = extract_bsif(testing::constant_image(77, 24, 24), b);
    CHECK(zero.histogram.values[0] == 576.0);
  }
}

TEST_CASE("HOG") {
  auto flat = extract_hog(testing::constant_image(50));
  CHECK(flat.vector.dim() == 1080);
  for (double v : flat.vector.values) CHECK(v == 0.0);
  for (double v : flat.map.values) CHECK(v == 0.0);

  GrayImage step(180, 240, 40);
  for (int y = 0; y < 240; ++y) {
    for (int x = 90; x < 180; ++x) step.at(x, y) = 200;
  }
  auto h = extract_hog_detailed(step);
  HogParams p;
  for (int cy = 0; cy < p.cells_y; ++cy) {
    for (int cx : {4, 5}) {
      const double* bins = &h.cell_histograms[(cy * p.cells_x + cx) * p.bins];
      CHECK(std::max_element(bins, bins + p.bins) - bins == 0);
      CHECK(bins[0] > 0);
    }
    const double* far = &h.cell_histograms[(cy * p.cells_x + 0) * p.bins];
    CHECK(sum({far, far + p.bins}) == 0.0);
  }
  CHECK(h.extraction.map.width == 180);
  CHECK(h.extraction.map.height == 240);
}

TEST_CASE("dispatch dimensions are fixed per method") {
  ExtractConfig cfg;
  std::map<Method, std::size_t> expected = {{Method::RGB, 43200}, {Method::FUSION_LBP, 472}, {Method::LBP81, 59},
                                            {Method::VLBP, 472},  {Method::HLBP, 472},       {Method::HOG, 1080},
                                            {Method::SVD, 180},   {Method::BSIF_NH, 32},     {Method::BSIF_H, 32},
                                            {Method::BSIF_IM, 43200}, {Method::SRM, 129600}, {Method::DFT, 43200},
                                            {Method::DCT2, 43200}, {Method::ELA, 43200}};
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto face = testing::texture(seed * 13 + 1);
    for (auto m : kAllMethods) {
      auto out = extract(face, m, cfg);
      CHECK(out.vector.dim() == expected.at(m));
      CHECK(out.vector.dim() == vector_dim(m, cfg));
      for (double v : out.vector.values) REQUIRE(std::isfinite(v));
      REQUIRE(out.map.has_value());
      auto png = render::render_map(*out.map);
      CHECK(png.width == out.map->width);
      CHECK(png.height == out.map->height);
    }
  }
  auto nh = extract(testing::texture(3), Method::BSIF_NH, cfg);
  CHECK(std::abs(sum(nh.vector.values) - 1.0) <= 1e-9);
}

TEST_CASE("extractors are pure") {
  auto face = testing::texture(44);
  for (auto m : kAllMethods) {
    auto a = extract(face, m);
    auto b = extract(face, m);
    CHECK(a.vector == b.vector);
    CHECK(a.map->values == b.map->values);
  }
}

TEST_CASE("source-resolution extraction keeps the canonical dimensions") {
  ExtractConfig cfg;
  cfg.before_resize = true;
  auto source = testing::texture(9, 360, 480);
  for (auto m : kAllMethods) {
    auto out = extract_from_source(source, m, cfg);
    CHECK(out.vector.dim() == vector_dim(m, cfg));
    if (out.map) {
      CHECK(out.map->width == 180);
      CHECK(out.map->height == 240);
    }
  }
}

TEST_CASE("fusion") {
  auto face = testing::texture(6);
  auto a = extract(face, Method::LBP81).vector;
  auto b = extract(face, Method::FUSION_LBP).vector;
  std::vector<FeatureVector> ab{a, b}, ba{b, a};
  auto f = fuse_vectors(ab);
  CHECK(f.dim() == 531);
  CHECK(f.method == "LBP81+FUSION_LBP");
  std::vector<FeatureVector> one{a};
  CHECK(fuse_vectors(one).values == a.values);
  auto x = fuse_vectors(ab).values, y = fuse_vectors(ba).values;
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  CHECK(x == y);
  CHECK_THROWS_AS(fuse_vectors(std::vector<FeatureVector>{}), UsageError);
}

TEST_CASE("config fingerprints and validation") {
  ExtractConfig a, b;
  b.ela_quality = 90;
  CHECK(a.fingerprint(Method::ELA) != b.fingerprint(Method::ELA));
  CHECK(a.fingerprint(Method::HOG) == b.fingerprint(Method::HOG));
  b.bsif = std::make_shared<BsifFilterBank>(default_reporting_bank());
  CHECK(a.fingerprint(Method::BSIF_H) != b.fingerprint(Method::BSIF_H));
  ExtractConfig bad;
  bad.svd_rank = 0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  CHECK(resolve_bsif_bank("5x5_9")->bits == 9);
  CHECK_THROWS_AS(resolve_bsif_bank("4x4_9"), UsageError);
}

TEST_CASE("feature vector csv round trip") {
  testing::TempDir dir("vectors");
  std::vector<FeatureRow> rows{{"a", {"HOG", {0.1, 1.0 / 3.0, -2.5e-7}}}, {"b", {"HOG", {0, 1, 2}}}};
  write_vectors_csv(dir.path() / "v.csv", rows);
  auto back = read_vectors_csv(dir.path() / "v.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == "a");
  CHECK(back[0].vector == rows[0].vector);
}
