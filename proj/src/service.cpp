#include "smad/service.hpp"

#include <algorithm>

#include "httplib.h"
#include "json.hpp"
#include "smad/dataset.hpp"
#include "smad/error.hpp"
#include "smad/render.hpp"

namespace smad::service {
namespace {

using json = nlohmann::ordered_json;
using features::Method;

Response json_response(int status, const json& body) {
  return {status, "application/json", body.dump(2) + "\n"};
}

Response error_response(int status, const std::string& message) {
  return json_response(status, {{"error", message}});
}

std::vector<Method> parse_parts(const std::string& name) {
  std::vector<Method> parts;
  for (const auto& piece : split(name, '+')) {
    auto m = features::parse_method(piece);
    if (!m) throw DataError("model for unknown method '" + name + "'");
    parts.push_back(*m);
  }
  return parts;
}

std::optional<dataset::EyePair> parse_eyes(const std::string& text) {
  if (trim(text).empty()) return std::nullopt;
  auto parts = split(text, ',');
  if (parts.size() != 4) throw UsageError("eyes must be 'lx,ly,rx,ry'");
  dataset::EyePair eyes;
  eyes.left = {parse_double(trim(parts[0])), parse_double(trim(parts[1]))};
  eyes.right = {parse_double(trim(parts[2])), parse_double(trim(parts[3]))};
  return eyes;
}

}  // namespace

AnalysisService::AnalysisService(std::vector<forest::ForestModel> models, features::ExtractConfig config,
                                 std::size_t map_capacity)
    : config_(std::move(config)), capacity_(std::max<std::size_t>(map_capacity, 1)) {
  config_.validate();
  for (auto& m : models) {
    LoadedModel entry;
    entry.name = m.method;
    entry.parts = parse_parts(m.method);
    std::size_t dim = 0;
    for (auto part : entry.parts) dim += features::vector_dim(part, config_);
    if (dim != m.feature_dim) {
      throw DataError("model '" + m.method + "' expects dimension " + std::to_string(m.feature_dim) +
                      " but the configured extractor produces " + std::to_string(dim));
    }
    for (const auto& other : models_) {
      if (other.name == entry.name) throw DataError("two models for '" + entry.name + "'");
    }
    entry.model = std::move(m);
    models_.push_back(std::move(entry));
  }
}

AnalysisService AnalysisService::from_files(const std::vector<std::filesystem::path>& model_paths,
                                            features::ExtractConfig config) {
  std::vector<forest::ForestModel> models;
  for (const auto& p : model_paths) models.push_back(forest::load_model(p));
  return AnalysisService(std::move(models), std::move(config));
}

Response AnalysisService::health() const {
  return json_response(200, {{"status", "ok"}, {"version", kVersion}, {"api", kApiVersion}, {"models", models_.size()}});
}

Response AnalysisService::methods() const {
  json list = json::array();
  for (auto m : features::kAllMethods) {
    std::string name(features::to_string(m));
    bool scored = std::any_of(models_.begin(), models_.end(), [&](const LoadedModel& lm) { return lm.name == name; });
    list.push_back({{"method", name},
                    {"dim", features::vector_dim(m, config_)},
                    {"config", config_.fingerprint(m)},
                    {"scored", scored}});
  }
  json fused = json::array();
  for (const auto& lm : models_) {
    if (lm.parts.size() > 1) fused.push_back({{"method", lm.name}, {"dim", lm.model.feature_dim}});
  }
  return json_response(200, {{"methods", list}, {"fused", fused}});
}

void AnalysisService::store(const std::string& token, Analysis analysis) {
  std::lock_guard lock(mutex_);
  if (maps_.count(token)) {
    order_.remove(token);
  }
  maps_[token] = std::move(analysis);
  order_.push_back(token);
  while (order_.size() > capacity_) {
    maps_.erase(order_.front());
    order_.pop_front();
  }
}

Response AnalysisService::analyze(std::span<const std::uint8_t> image_bytes, const std::string& method_filter,
                                  const std::string& eyes_text) {
  if (image_bytes.empty()) return error_response(400, "missing image");
  if (image_bytes.size() > kMaxUploadBytes) return error_response(413, "image exceeds upload limit");
  std::vector<Method> requested;
  std::optional<dataset::EyePair> eyes;
  try {
    requested = trim(method_filter).empty() ? std::vector<Method>(features::kAllMethods.begin(), features::kAllMethods.end())
                                            : features::parse_method_list(method_filter);
    eyes = parse_eyes(eyes_text);
  } catch (const Error& e) {
    return error_response(400, e.what());
  }
  Raster raster;
  try {
    raster = decode_image(image_bytes);
  } catch (const DataError& e) {
    return error_response(400, std::string("not an image: ") + e.what());
  }
  dataset::AlignedFace face;
  try {
    face = dataset::preprocess_face(raster, eyes, "upload");
  } catch (const DataError& e) {
    return error_response(400, e.what());
  }
  const std::string token = sha256_hex(image_bytes).substr(0, 16) +
                            sha256_hex(eyes_text + "|" + method_filter).substr(0, 8);

  // A model scores only when all of its parts were requested.
  const std::vector<Method>& needed = requested;
  std::vector<const LoadedModel*> scoring;
  for (const auto& lm : models_) {
    bool wanted = std::all_of(lm.parts.begin(), lm.parts.end(), [&](Method m) {
      return std::find(requested.begin(), requested.end(), m) != requested.end();
    });
    if (wanted) scoring.push_back(&lm);
  }

  std::vector<std::optional<features::MethodOutput>> outputs(needed.size());
  std::vector<std::string> errors(needed.size());
  parallel_for(needed.size(), [&](std::size_t i) {
    try {
      outputs[i] = features::extract(face, needed[i], config_);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  auto output_for = [&](Method m) -> const features::MethodOutput* {
    auto it = std::find(needed.begin(), needed.end(), m);
    auto& o = outputs[it - needed.begin()];
    return o ? &*o : nullptr;
  };

  json scores = json::array();
  for (const auto* lm : scoring) {
    std::vector<features::FeatureVector> parts;
    for (auto p : lm->parts) {
      if (const auto* o = output_for(p)) parts.push_back(o->vector);
    }
    if (parts.size() != lm->parts.size()) continue;
    auto vec = parts.size() == 1 ? parts.front() : features::fuse_vectors(parts);
    double score = forest::predict_score(lm->model, vec);
    forest::OperatingPoints op = lm->model.operating_points.value_or(forest::OperatingPoints{});
    scores.push_back({{"method", lm->name},
                      {"score", score},
                      {"eer_threshold", op.eer_threshold},
                      {"bpcer10_threshold", op.bpcer10_threshold},
                      {"bpcer20_threshold", op.bpcer20_threshold}});
  }

  json maps = json::array();
  json failures = json::array();
  Analysis analysis;
  for (std::size_t i = 0; i < needed.size(); ++i) {
    std::string name(features::to_string(needed[i]));
    if (!outputs[i]) {
      failures.push_back({{"method", name}, {"error", errors[i]}});
      continue;
    }
    if (!outputs[i]->map) continue;
    const auto& map = *outputs[i]->map;
    auto lo = *std::min_element(map.values.begin(), map.values.end());
    auto hi = *std::max_element(map.values.begin(), map.values.end());
    analysis.pngs[name] = encode_png(render::render_map(map));
    maps.push_back({{"method", name},
                    {"url", std::string("/") + kApiVersion + "/maps/" + token + "/" + name + ".png"},
                    {"display_range", {lo, hi}},
                    {"width", map.width},
                    {"height", map.height}});
  }
  store(token, std::move(analysis));
  json body = {{"id", token}, {"scores", scores}, {"maps", maps}};
  if (!failures.empty()) body["failures"] = failures;
  return json_response(200, body);
}

Response AnalysisService::map_png(const std::string& token, const std::string& method) const {
  auto m = features::parse_method(method);
  if (!m) return error_response(404, "unknown method '" + method + "'");
  std::lock_guard lock(mutex_);
  auto it = maps_.find(token);
  if (it == maps_.end()) return error_response(404, "unknown or expired analysis '" + token + "'");
  auto png = it->second.pngs.find(std::string(features::to_string(*m)));
  if (png == it->second.pngs.end()) return error_response(404, "no map for '" + method + "'");
  return {200, "image/png", std::string(png->second.begin(), png->second.end())};
}

HttpServer::HttpServer(AnalysisService& service, std::optional<std::filesystem::path> static_dir)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto send = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  // The library default adds SO_REUSEPORT, which would let a second server
  // share a busy port silently.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  server_->set_payload_max_length(kMaxUploadBytes + (1u << 20));
  server_->Get("/v1/health", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, service_.health());
  });
  server_->Get("/v1/methods", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, service_.methods());
  });
  server_->Post("/v1/analyze", [this, send](const httplib::Request& req, httplib::Response& res) {
    if (!req.is_multipart_form_data() || !req.has_file("image")) {
      send(res, error_response(400, "expected multipart/form-data with an 'image' part"));
      return;
    }
    const auto image = req.get_file_value("image");
    std::string filter = req.has_file("methods") ? req.get_file_value("methods").content : req.get_param_value("methods");
    std::string eyes = req.has_file("eyes") ? req.get_file_value("eyes").content : req.get_param_value("eyes");
    std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(image.content.data()), image.content.size());
    try {
      send(res, service_.analyze(bytes, filter, eyes));
    } catch (const std::exception& e) {
      send(res, error_response(500, e.what()));
    }
  });
  server_->Get(R"(/v1/maps/([0-9a-f]+)/([A-Za-z0-9_\-]+)\.png)",
               [this, send](const httplib::Request& req, httplib::Response& res) {
                 send(res, service_.map_png(req.matches[1], req.matches[2]));
               });
  if (static_dir) server_->set_mount_point("/", static_dir->string());
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw DataError("cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) {
    throw DataError("cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
  }
  return port;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::wait_until_ready() const { server_->wait_until_ready(); }

void HttpServer::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

}  // namespace smad::service
