#pragma once

// HTTP analysis service: per-method morph scores and rendered feature maps
// for an uploaded face image. Routes live under /v1.

#include <cstdint>
#include <filesystem>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smad/features/extract.hpp"
#include "smad/forest.hpp"

namespace httplib {
class Server;
}

namespace smad::service {

inline constexpr const char* kApiVersion = "v1";
inline constexpr std::size_t kMaxUploadBytes = 20u << 20;

struct LoadedModel {
  std::string name;  // method tag, or "A+B" for a fused-feature model
  std::vector<features::Method> parts;
  forest::ForestModel model;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

class AnalysisService {
 public:
  /// Throws DataError when a model's feature dimension differs from what
  /// the configured extractors produce.
  AnalysisService(std::vector<forest::ForestModel> models, features::ExtractConfig config,
                  std::size_t map_capacity = 64);

  static AnalysisService from_files(const std::vector<std::filesystem::path>& model_paths,
                                    features::ExtractConfig config);

  Response health() const;
  Response methods() const;
  /// `method_filter` is a comma-separated list; empty means every method.
  Response analyze(std::span<const std::uint8_t> image_bytes, const std::string& method_filter,
                   const std::string& eyes = {});
  Response map_png(const std::string& token, const std::string& method) const;

  const std::vector<LoadedModel>& models() const { return models_; }

 private:
  struct Analysis {
    std::map<std::string, std::vector<std::uint8_t>> pngs;
  };

  void store(const std::string& token, Analysis analysis);

  std::vector<LoadedModel> models_;
  features::ExtractConfig config_;
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::map<std::string, Analysis> maps_;
  std::list<std::string> order_;
};

/// Owns the httplib server bound to one port.
class HttpServer {
 public:
  explicit HttpServer(AnalysisService& service, std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Port 0 picks a free port. Throws DataError when the port is taken.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  /// Returns once a concurrent listen() accepts connections.
  void wait_until_ready() const;
  void stop();

 private:
  AnalysisService& service_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace smad::service
