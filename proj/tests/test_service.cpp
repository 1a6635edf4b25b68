#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <thread>

#include "fixtures.hpp"
#include "httplib.h"
#include "json.hpp"
#include "smad/error.hpp"
#include "smad/service.hpp"

using namespace smad;
using namespace smad::service;
using features::Method;
using nlohmann::json;

namespace {

forest::ForestModel toy_model(const std::vector<Method>& parts) {
  std::vector<features::FeatureVector> X;
  std::vector<Label> y;
  for (int i = 0; i < 12; ++i) {
    auto face = i % 2 ? testing::morph_image(100 + i, "beta") : testing::texture(200 + i);
    std::vector<features::FeatureVector> v;
    for (auto m : parts) v.push_back(features::extract(face, m).vector);
    X.push_back(v.size() == 1 ? v.front() : features::fuse_vectors(v));
    y.push_back(i % 2 ? Label::morph : Label::bonafide);
  }
  forest::ForestParams p;
  p.n_trees = 10;
  auto model = forest::train_forest(X, y, p);
  model.method = X.front().method;
  return model;
}

std::string png_bytes(const GrayImage& img) {
  auto bytes = encode_png(img);
  return std::string(bytes.begin(), bytes.end());
}

struct Running {
  AnalysisService service;
  HttpServer server;
  int port;
  std::thread thread;

  explicit Running(std::vector<forest::ForestModel> models)
      : service(std::move(models), {}), server(service), port(server.bind("127.0.0.1", 0)),
        thread([this] { server.listen(); }) {
    server.wait_until_ready();
  }
  ~Running() {
    server.stop();
    thread.join();
  }
};

}  // namespace

TEST_CASE("service over HTTP") {
  Running run({toy_model({Method::ELA}), toy_model({Method::SVD, Method::DCT2})});
  httplib::Client client("127.0.0.1", run.port);

  auto health = client.Get("/v1/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  auto h = json::parse(health->body);
  CHECK(h["status"] == "ok");
  CHECK(h["models"] == 2);

  auto methods = client.Get("/v1/methods");
  REQUIRE(methods);
  auto m = json::parse(methods->body);
  CHECK(m["methods"].size() == 14);
  for (const auto& item : m["methods"]) {
    CHECK(item["scored"] == (item["method"] == "ELA"));
    CHECK(item["dim"].get<std::size_t>() > 0);
  }
  REQUIRE(m["fused"].size() == 1);
  CHECK(m["fused"][0]["method"] == "SVD+DCT2");

  const auto face = png_bytes(testing::texture(31));
  httplib::MultipartFormDataItems form{{"image", face, "face.png", "image/png"}, {"methods", "ELA,SVD,DCT2,HOG", "", ""}};
  auto res = client.Post("/v1/analyze", form);
  REQUIRE(res);
  REQUIRE(res->status == 200);
  auto body = json::parse(res->body);
  REQUIRE(body["scores"].size() == 2);
  for (const auto& s : body["scores"]) {
    CHECK(s["score"].get<double>() >= 0.0);
    CHECK(s["score"].get<double>() <= 1.0);
    CHECK(s.contains("bpcer10_threshold"));
  }
  REQUIRE(body["maps"].size() == 4);
  for (const auto& map : body["maps"]) {
    auto png = client.Get(map["url"].get<std::string>());
    REQUIRE(png);
    CHECK(png->status == 200);
    CHECK(png->get_header_value("Content-Type") == "image/png");
    auto decoded = decode_image(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(png->body.data()), png->body.size()));
    CHECK(decoded.width == map["width"].get<int>());
    CHECK(decoded.height == map["height"].get<int>());
  }

  // same upload, same token and scores
  auto again = client.Post("/v1/analyze", form);
  REQUIRE(again);
  CHECK(json::parse(again->body) == body);

  httplib::MultipartFormDataItems junk{{"image", "definitely not an image", "x.png", "image/png"}};
  auto bad = client.Post("/v1/analyze", junk);
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(json::parse(bad->body).contains("error"));

  httplib::MultipartFormDataItems bad_method{{"image", face, "face.png", "image/png"}, {"methods", "XYZ", "", ""}};
  auto bm = client.Post("/v1/analyze", bad_method);
  REQUIRE(bm);
  CHECK(bm->status == 400);

  httplib::MultipartFormDataItems bad_eyes{{"image", face, "face.png", "image/png"}, {"eyes", "1,2,999,2", "", ""}};
  auto be = client.Post("/v1/analyze", bad_eyes);
  REQUIRE(be);
  CHECK(be->status == 400);

  auto missing = client.Get("/v1/maps/0123456789abcdef/ELA.png");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  SUBCASE("a taken port is reported") {
    AnalysisService other({}, {});
    HttpServer second(other);
    CHECK_THROWS_AS(second.bind("127.0.0.1", run.port), DataError);
  }
}

TEST_CASE("service construction and map store") {
  auto model = toy_model({Method::ELA});
  features::ExtractConfig bits8;
  bits8.bsif = features::resolve_bsif_bank("5x5_8");
  auto bsif = toy_model({Method::BSIF_H});
  CHECK_NOTHROW(AnalysisService({bsif}, {}));
  CHECK_THROWS_AS(AnalysisService({bsif}, bits8), DataError);
  CHECK_THROWS_AS(AnalysisService({model, model}, {}), DataError);

  AnalysisService service({model}, {}, 1);
  auto a = encode_png(testing::texture(1));
  auto b = encode_png(testing::texture(2));
  auto ra = json::parse(service.analyze(a, "ELA").body);
  auto rb = json::parse(service.analyze(b, "ELA").body);
  // capacity one: the first analysis has been evicted
  CHECK(service.map_png(ra["id"], "ELA").status == 404);
  CHECK(service.map_png(rb["id"], "ELA").status == 200);
  CHECK(service.map_png(rb["id"], "SRM").status == 404);
  CHECK(service.analyze({}, "").status == 400);
}

TEST_CASE("constant image renders flat maps") {
  AnalysisService service({}, {});
  auto flat = encode_png(testing::constant_image(128));
  auto r = json::parse(service.analyze(flat, "SRM").body);
  REQUIRE(r["maps"].size() == 1);
  auto png = service.map_png(r["id"], "SRM");
  auto img = decode_image(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(png.body.data()), png.body.size()));
  for (auto v : img.data) CHECK(v == 0);
}

TEST_CASE("responses carry every field the API schema requires") {
  auto schema = json::parse(read_text_file(SMAD_API_SCHEMA))["components"]["schemas"];
  auto has_required = [&](const json& object, const std::string& name) {
    for (const auto& field : schema[name]["required"]) CHECK_MESSAGE(object.contains(field.get<std::string>()), name, ".", field);
  };
  AnalysisService service({toy_model({Method::ELA})}, {});
  has_required(json::parse(service.health().body), "Health");
  auto methods = json::parse(service.methods().body);
  has_required(methods, "MethodList");
  auto ids = schema["MethodId"]["enum"];
  CHECK(ids.size() == methods["methods"].size());
  for (const auto& m : methods["methods"]) CHECK(std::find(ids.begin(), ids.end(), m["method"]) != ids.end());

  auto r = json::parse(service.analyze(encode_png(testing::texture(8)), "ELA,HOG").body);
  has_required(r, "Analysis");
  REQUIRE(r["scores"].size() == 1);
  has_required(r["scores"][0], "Score");
  REQUIRE_FALSE(r["maps"].empty());
  for (const auto& m : r["maps"]) has_required(m, "MapLink");
  has_required(json::parse(service.map_png("00", "ELA").body), "Error");
}
