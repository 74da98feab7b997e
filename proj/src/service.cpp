#include "acervo/service.hpp"

#include <charconv>
#include <fstream>

#include <httplib.h>

#include "acervo/attribution.hpp"
#include "acervo/error.hpp"
#include "acervo/train.hpp"

namespace acervo {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.push_back(text.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
T parse_number(const std::string& text, const std::string& what) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty())
    throw Error(ErrorCode::invalid_argument, "malformed " + what + " '" + text + "'");
  return value;
}

double parse_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::invalid_argument, "malformed " + what + " '" + text + "'");
  }
}

template <class T>
T param(const QueryParams& q, const std::string& key, T fallback) {
  auto it = q.find(key);
  if (it == q.end() || it->second.empty()) return fallback;
  if constexpr (std::is_floating_point_v<T>) return parse_double(it->second, key);
  else return parse_number<T>(it->second, key);
}

const char* code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::io: return "io";
    case ErrorCode::parse: return "parse";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::numeric: return "numeric";
    case ErrorCode::conflict: return "conflict";
  }
  return "internal";
}

int status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
    case ErrorCode::parse: return 400;
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict: return 409;
    case ErrorCode::numeric: return 422;
    case ErrorCode::io: return 500;
  }
  return 500;
}

ApiResponse error_response(int status, const std::string& code, const std::string& message) {
  return {status, dump_canonical({{"error", {{"code", code}, {"message", message}}}})};
}

ViewMode view_param(const QueryParams& q) {
  auto it = q.find("view");
  if (it == q.end()) throw Error(ErrorCode::invalid_argument, "missing view parameter");
  try {
    return view_mode_from_string(it->second);
  } catch (const Error&) {
    throw Error(ErrorCode::not_found, "unknown view '" + it->second + "'");
  }
}

ItemId id_segment(const std::string& text) { return parse_number<ItemId>(text, "item id"); }

}  // namespace

ServiceConfig service_config_from_json(const Json& j, const std::filesystem::path& base_dir) {
  try {
    ServiceConfig c;
    c.catalog = resolve(base_dir, j.at("catalog").get<std::string>());
    const Json embeddings = j.value("embeddings", Json::object());
    for (const auto& [k, v] : embeddings.items()) c.embeddings[k] = resolve(base_dir, v.get<std::string>());
    const Json projections = j.value("projections", Json::object());
    for (const auto& [k, v] : projections.items()) {
      view_mode_from_string(k);
      c.projections[k] = resolve(base_dir, v.get<std::string>());
    }
    const Json heads = j.value("head_models", Json::object());
    for (const auto& [k, v] : heads.items()) c.head_models[k] = resolve(base_dir, v.get<std::string>());
    if (j.contains("state_centroids")) c.state_centroids = resolve(base_dir, j.at("state_centroids").get<std::string>());
    auto& s = c.settings;
    if (j.contains("listen")) {
      s.host = j["listen"].value("host", s.host);
      s.port = j["listen"].value("port", s.port);
    }
    s.page_size = j.value("page_size", s.page_size);
    s.radius_px = j.value("radius_px", s.radius_px);
    s.cors_allow = j.value("cors_allow", s.cors_allow);
    s.record_url_template = j.value("record_url_template", s.record_url_template);
    s.attribution_steps = j.value("attribution_steps", s.attribution_steps);
    if (s.page_size == 0) throw Error(ErrorCode::invalid_argument, "page_size must be >= 1");
    if (!(s.radius_px > 0.0)) throw Error(ErrorCode::invalid_argument, "radius_px must be > 0");
    return c;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::parse, std::string("service config: ") + e.what());
  }
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open service config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::parse, "service config " + path.string() + ": " + e.what());
  }
  return service_config_from_json(j, path.parent_path());
}

ServiceData load_service_data(const ServiceConfig& config) {
  auto need = [](const std::filesystem::path& p) {
    if (!std::filesystem::exists(p)) throw Error(ErrorCode::io, "missing file " + p.string());
  };
  need(config.catalog);
  ServiceData data;
  CatalogLoad load = load_catalog(config.catalog);
  if (!load.report.accepted())
    throw Error(ErrorCode::invalid_argument, "catalog has " + std::to_string(load.report.errors.size()) +
                                                 " errors; run validate");
  data.catalog = std::move(load.catalog);
  for (const auto& [modality, path] : config.embeddings) {
    need(path);
    data.embeddings.emplace(modality, load_embeddings(path, data.catalog));
  }
  for (const auto& [view, path] : config.projections) {
    need(path);
    Projection2D p = load_projection(path);
    const ViewMode mode = view_mode_from_string(view);
    if (p.view_mode != mode)
      throw Error(ErrorCode::invalid_argument, "projection " + path.string() + " is for view " + to_string(p.view_mode));
    data.projections.emplace(mode, std::move(p));
  }
  for (const auto& [modality, path] : config.head_models) {
    need(path);
    data.heads.emplace(modality, load_model(path));
  }
  if (config.state_centroids) {
    need(*config.state_centroids);
    data.centroids = load_state_centroids(*config.state_centroids);
  }
  return data;
}

std::optional<std::string> view_modality(ViewMode view) {
  switch (view) {
    case ViewMode::semantic_image: return "image";
    case ViewMode::semantic_text: return "text";
    case ViewMode::material: return std::nullopt;
  }
  return std::nullopt;
}

ExplorerService::ExplorerService(ServiceData data, ServiceSettings settings)
    : data_(std::move(data)), settings_(std::move(settings)) {
  catalog_hash_ = acervo::catalog_hash(data_.catalog);
  for (const auto& [view, projection] : data_.projections) {
    std::vector<SpatialPoint> pts;
    for (std::size_t i = 0; i < projection.size(); ++i) {
      if (!data_.catalog.contains(projection.ids[i]))
        throw Error(ErrorCode::invalid_argument, "projection " + to_string(view) + " references unknown item " +
                                                     std::to_string(projection.ids[i]));
      pts.push_back({projection.coords[i].x, projection.coords[i].y, projection.ids[i]});
    }
    trees_.emplace(view, KdTree2D(std::move(pts)));
  }
  markers_ = map_markers(data_.catalog, data_.centroids);
  years_ = yearly_counts(data_.catalog);
  schema_ = to_json(filter_schema(data_.catalog));
}

ApiResponse ExplorerService::handle(const std::string& path, const QueryParams& query) const {
  try {
    auto parts = split(path, '/');
    // "/api/x" splits to {"", "api", "x"}.
    if (parts.size() < 3 || !parts[0].empty() || parts[1] != "api")
      return error_response(404, "not_found", "no route for " + path);
    parts.erase(parts.begin(), parts.begin() + 2);
    if (!parts.empty() && parts.back().empty()) parts.pop_back();
    const auto n = parts.size();
    Json body;
    if (n == 1 && parts[0] == "health") body = health();
    else if (n == 2 && parts[0] == "items") body = item(parts[1]);
    else if (n == 1 && parts[0] == "points") body = points(query);
    else if (n == 2 && parts[0] == "filters" && parts[1] == "schema") body = schema_;
    else if (n == 2 && parts[0] == "timeline" && parts[1] == "years") body = timeline_years();
    else if (n == 2 && parts[0] == "timeline") body = timeline_year(parts[1], query);
    else if (n == 2 && parts[0] == "map" && parts[1] == "markers") body = markers();
    else if (n == 4 && parts[0] == "map" && parts[1] == "markers" && parts[3] == "items")
      body = marker_items(parts[2], query);
    else if (n == 2 && parts[0] == "attribution") body = attribution(parts[1], query);
    else return error_response(404, "not_found", "no route for " + path);
    return {200, dump_canonical(body)};
  } catch (const Error& e) {
    return error_response(status_of(e.code()), code_name(e.code()), e.what());
  } catch (const Json::exception& e) {
    return error_response(400, "parse", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

Json ExplorerService::health() const {
  Json views = Json::array();
  for (const auto& [view, p] : data_.projections) views.push_back(to_string(view));
  Json heads = Json::array();
  for (const auto& [modality, h] : data_.heads) heads.push_back(modality);
  return {{"status", "ok"},
          {"catalog_hash", catalog_hash_},
          {"items", data_.catalog.size()},
          {"views", views},
          {"head_models", heads}};
}

Json ExplorerService::item(const std::string& id_text) const {
  const ItemId id = id_segment(id_text);
  const Item* it = data_.catalog.find(id);
  if (!it) throw Error(ErrorCode::not_found, "unknown item " + id_text);
  Json j = item_to_json(*it);
  std::string url = settings_.record_url_template;
  for (auto pos = url.find("{id}"); pos != std::string::npos; pos = url.find("{id}", pos))
    url.replace(pos, 4, std::to_string(id));
  j["record_url"] = url.empty() ? Json(nullptr) : Json(url);
  return j;
}

Json ExplorerService::points(const QueryParams& q) const {
  const ViewMode view = view_param(q);
  auto tree = trees_.find(view);
  if (tree == trees_.end()) throw Error(ErrorCode::not_found, "view " + to_string(view) + " has no projection loaded");

  Viewport vp;
  auto bbox = q.find("bbox");
  if (bbox == q.end()) throw Error(ErrorCode::invalid_argument, "missing bbox parameter");
  const auto corners = split(bbox->second, ',');
  if (corners.size() != 4) throw Error(ErrorCode::invalid_argument, "bbox needs x0,y0,x1,y1");
  vp.world = {parse_double(corners[0], "bbox"), parse_double(corners[2], "bbox"), parse_double(corners[1], "bbox"),
              parse_double(corners[3], "bbox")};
  vp.width = param<int>(q, "w", 1024);
  vp.height = param<int>(q, "h", 768);
  vp.validate();
  const double g = param<double>(q, "g", 1.0);
  const double r = param<double>(q, "r", settings_.radius_px);

  FilterSpec spec;
  if (auto f = q.find("f"); f != q.end() && !f->second.empty()) {
    Json fj;
    try {
      fj = Json::parse(f->second);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::invalid_argument, std::string("malformed filter JSON: ") + e.what());
    }
    spec = filter_from_json(fj);
  }
  validate_filter(data_.catalog, spec);
  const FilterResult filtered = filter_items(data_.catalog, spec);
  const ClusterBatch batch = viewport_clusters(tree->second, vp, r, g, filtered.ids, !spec.empty());

  Json clusters = Json::array();
  for (const auto& c : batch.clusters)
    clusters.push_back(
        {{"x", c.px}, {"y", c.py}, {"count", c.count}, {"members", c.members}, {"representative", c.representative}});
  Json singles = Json::array();
  for (const auto& s : batch.singles) singles.push_back({{"x", s.px}, {"y", s.py}, {"id", s.id}});
  return {{"view", to_string(view)},
          {"live_count", filtered.count},
          {"bbox", {vp.world.x_min, vp.world.y_min, vp.world.x_max, vp.world.y_max}},
          {"w", vp.width},
          {"h", vp.height},
          {"g", g},
          {"r", r},
          {"clusters", clusters},
          {"singles", singles}};
}

Json ExplorerService::item_summary(ItemId id) const {
  const Item& it = data_.catalog.at(id);
  Json j = item_to_json(it);
  return {{"id", it.id},
          {"titulo", it.titulo},
          {"thumbnail_url", j["thumbnail_url"]},
          {"categoria", j["categoria"]},
          {"povo", j["povo"]},
          {"acquisition", j["acquisition"]}};
}

Json ExplorerService::timeline_years() const {
  Json years = Json::array();
  for (const auto& y : years_.years) years.push_back({{"year", y.year}, {"count", y.count}});
  return {{"years", years}, {"undated", years_.undated}};
}

Json ExplorerService::timeline_year(const std::string& year_text, const QueryParams& q) const {
  const int year = parse_number<int>(year_text, "year");
  const YearDetail d = year_detail(data_.catalog, year, param<std::size_t>(q, "page", 0),
                                   param<std::size_t>(q, "page_size", settings_.page_size));
  Json items = Json::array();
  for (ItemId id : d.page.ids) items.push_back(item_summary(id));
  return {{"year", year},
          {"months", d.month_buckets},
          {"month_unknown", d.month_unknown},
          {"total", d.page.total},
          {"page", d.page.page},
          {"page_size", d.page.page_size},
          {"items", items}};
}

Json ExplorerService::markers() const {
  Json red = Json::array(), blue = Json::array();
  for (const auto& m : markers_.red)
    red.push_back({{"key", "c:" + m.community}, {"name", m.community}, {"lat", m.lat}, {"lon", m.lon},
                   {"count", m.ids.size()}});
  for (const auto& m : markers_.blue)
    blue.push_back(
        {{"key", "s:" + m.state}, {"state", m.state}, {"lat", m.lat}, {"lon", m.lon}, {"count", m.ids.size()}});
  return {{"red", red}, {"blue", blue}, {"unmapped", markers_.unmapped}};
}

Json ExplorerService::marker_items(const std::string& key, const QueryParams& q) const {
  const auto* ids = markers_.find(key);
  if (!ids) throw Error(ErrorCode::not_found, "unknown marker '" + key + "'");
  const Page page = paginate(*ids, param<std::size_t>(q, "page", 0),
                             param<std::size_t>(q, "page_size", settings_.page_size));
  Json items = Json::array();
  for (ItemId id : page.ids) items.push_back(item_summary(id));
  return {{"key", key}, {"total", page.total}, {"page", page.page}, {"page_size", page.page_size}, {"items", items}};
}

Json ExplorerService::attribution(const std::string& id_text, const QueryParams& q) const {
  const ItemId id = id_segment(id_text);
  auto ref_it = q.find("ref");
  if (ref_it == q.end()) throw Error(ErrorCode::invalid_argument, "missing ref parameter");
  const ItemId ref = id_segment(ref_it->second);
  const ViewMode view = view_param(q);
  if (!data_.catalog.contains(id)) throw Error(ErrorCode::not_found, "unknown item " + id_text);
  if (!data_.catalog.contains(ref)) throw Error(ErrorCode::not_found, "unknown reference item " + ref_it->second);
  const auto modality = view_modality(view);
  if (!modality) throw Error(ErrorCode::conflict, "view " + to_string(view) + " has no embedding modality");
  auto head = data_.heads.find(*modality);
  if (head == data_.heads.end()) throw Error(ErrorCode::conflict, "no head model loaded for " + *modality);
  auto emb = data_.embeddings.find(*modality);
  if (emb == data_.embeddings.end()) throw Error(ErrorCode::conflict, "no " + *modality + " embeddings loaded");
  if (!emb->second.index_of(id)) throw Error(ErrorCode::not_found, "item " + id_text + " has no " + *modality + " embedding");
  if (!emb->second.index_of(ref))
    throw Error(ErrorCode::not_found, "item " + ref_it->second + " has no " + *modality + " embedding");

  AttributionConfig config;
  config.steps = settings_.attribution_steps;
  config.reference = head_forward(head->second, emb->second.row_as_double(ref)).output;
  const auto x = emb->second.row_as_double(id);
  const AttributionResult result = integrated_gradients(head->second, x, config);
  Json j = attribution_report(result);
  j["id"] = id;
  j["ref"] = ref;
  j["view"] = to_string(view);
  return j;
}

struct HttpServer::Impl {
  Impl(const ExplorerService& s, std::vector<std::string> allow) : service(s), cors_allow(std::move(allow)) {}

  const ExplorerService& service;
  std::vector<std::string> cors_allow;
  httplib::Server server;

  void cors(const httplib::Request& req, httplib::Response& res) const {
    const auto origin = req.get_header_value("Origin");
    for (const auto& allowed : cors_allow) {
      if (allowed == "*") {
        res.set_header("Access-Control-Allow-Origin", "*");
        return;
      }
      if (!origin.empty() && allowed == origin) {
        res.set_header("Access-Control-Allow-Origin", origin);
        res.set_header("Vary", "Origin");
        return;
      }
    }
  }
};

HttpServer::HttpServer(const ExplorerService& service, std::vector<std::string> cors_allow)
    : impl_(std::make_unique<Impl>(service, std::move(cors_allow))) {
  Impl* impl = impl_.get();
  impl->server.Get(R"(/api/.*)", [impl](const httplib::Request& req, httplib::Response& res) {
    QueryParams q;
    for (const auto& [k, v] : req.params) q.emplace(k, v);
    ApiResponse r = impl->service.handle(req.path, q);
    res.status = r.status;
    impl->cors(req, res);
    res.set_content(r.body, "application/json");
  });
  impl->server.Options(R"(/api/.*)", [impl](const httplib::Request& req, httplib::Response& res) {
    impl->cors(req, res);
    res.set_header("Access-Control-Allow-Methods", "GET, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::io, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::serve() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace acervo
