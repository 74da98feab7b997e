#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "acervo/catalog.hpp"
#include "acervo/embeddings.hpp"
#include "acervo/filter.hpp"
#include "acervo/head.hpp"
#include "acervo/lenses.hpp"
#include "acervo/projection.hpp"
#include "acervo/spatial.hpp"

namespace acervo {

struct ServiceSettings {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t page_size = 24;
  double radius_px = kDefaultRadiusPx;
  std::vector<std::string> cors_allow;  // "*" allows any origin
  std::string record_url_template;      // "{id}" is replaced by the item id
  std::size_t attribution_steps = 256;
};

// Relative paths resolve against the config file's directory.
//   {"catalog": "...", "embeddings": {"image": "...", "text": "..."},
//    "projections": {"semantic_image": "...", ...}, "head_models": {"text": "..."},
//    "state_centroids": "...", "listen": {"host": "...", "port": 8080},
//    "page_size": 24, "radius_px": 24, "cors_allow": ["*"],
//    "record_url_template": "https://host/item/{id}", "attribution_steps": 256}
struct ServiceConfig {
  std::filesystem::path catalog;
  std::map<std::string, std::filesystem::path> embeddings;   // modality -> file
  std::map<std::string, std::filesystem::path> projections;  // view mode -> cache
  std::map<std::string, std::filesystem::path> head_models;  // modality -> model
  std::optional<std::filesystem::path> state_centroids;
  ServiceSettings settings;
};

ServiceConfig service_config_from_json(const Json& j, const std::filesystem::path& base_dir);
ServiceConfig load_service_config(const std::filesystem::path& path);

// Everything the service reads, already loaded.
struct ServiceData {
  Catalog catalog;
  std::map<ViewMode, Projection2D> projections;
  std::map<std::string, EmbeddingSet> embeddings;  // "image", "text"
  std::map<std::string, HeadModel> heads;          // by modality
  StateCentroids centroids;
};

ServiceData load_service_data(const ServiceConfig& config);

// Modality backing a view: semantic_image -> "image", semantic_text -> "text",
// material -> none.
std::optional<std::string> view_modality(ViewMode view);

struct ApiResponse {
  int status = 200;
  std::string body;  // canonical JSON
};

using QueryParams = std::map<std::string, std::string>;

// Read-only request router over immutable data; safe to call concurrently.
class ExplorerService {
 public:
  ExplorerService(ServiceData data, ServiceSettings settings);

  ApiResponse handle(const std::string& path, const QueryParams& query) const;

  const ServiceData& data() const { return data_; }
  const ServiceSettings& settings() const { return settings_; }
  const std::string& catalog_hash() const { return catalog_hash_; }

 private:
  Json health() const;
  Json item(const std::string& id) const;
  Json points(const QueryParams& q) const;
  Json timeline_years() const;
  Json timeline_year(const std::string& year, const QueryParams& q) const;
  Json markers() const;
  Json marker_items(const std::string& key, const QueryParams& q) const;
  Json attribution(const std::string& id, const QueryParams& q) const;
  Json item_summary(ItemId id) const;

  ServiceData data_;
  ServiceSettings settings_;
  std::string catalog_hash_;
  std::map<ViewMode, KdTree2D> trees_;
  GeoMarkerSet markers_;
  YearlyCounts years_;
  Json schema_;
};

// HTTP front end: GET /api/... routed to ExplorerService::handle.
class HttpServer {
 public:
  HttpServer(const ExplorerService& service, std::vector<std::string> cors_allow);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Returns the bound port (port 0 picks a free one). Throws Error(io).
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace acervo
