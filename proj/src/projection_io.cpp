#include <algorithm>
#include <fstream>

#include "acervo/error.hpp"
#include "acervo/hash.hpp"
#include "acervo/projection.hpp"

namespace acervo {

std::string projection_config_hash(const ProjectionConfig& config, ViewMode view,
                                   const std::string& input_digest) {
  Json j = {{"config", to_json(config)}, {"view_mode", to_string(view)}, {"input", input_digest}};
  return hex64(fnv1a64(j.dump()));
}

Json projection_to_json(const Projection2D& projection, const std::string& config_hash) {
  Json coords = Json::array();
  for (std::size_t i = 0; i < projection.size(); ++i)
    coords.push_back(Json::array({projection.ids[i], projection.coords[i].x, projection.coords[i].y}));
  return {{"view_mode", to_string(projection.view_mode)},
          {"config", to_json(projection.config)},
          {"config_hash", config_hash},
          {"a", projection.a},
          {"b", projection.b},
          {"coords", std::move(coords)}};
}

Projection2D projection_from_json(const Json& j) {
  try {
    Projection2D proj;
    proj.view_mode = view_mode_from_string(j.at("view_mode").get<std::string>());
    proj.config = projection_config_from_json(j.at("config"));
    proj.a = j.at("a").get<double>();
    proj.b = j.at("b").get<double>();
    std::vector<std::pair<ItemId, Point2>> rows;
    for (const auto& row : j.at("coords")) {
      if (!row.is_array() || row.size() != 3)
        throw Error(ErrorCode::parse, "projection cache: coords rows must be [id, x, y]");
      rows.emplace_back(row[0].get<ItemId>(), Point2{row[1].get<double>(), row[2].get<double>()});
    }
    std::sort(rows.begin(), rows.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i > 0 && rows[i].first == rows[i - 1].first)
        throw Error(ErrorCode::parse, "projection cache: duplicate id " + std::to_string(rows[i].first));
      proj.ids.push_back(rows[i].first);
      proj.coords.push_back(rows[i].second);
    }
    return proj;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::parse, std::string("projection cache: ") + e.what());
  }
}

void save_projection(const Projection2D& projection, const std::string& config_hash,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write projection cache " + path.string());
  out << projection_to_json(projection, config_hash).dump() << '\n';
}

Projection2D load_projection(const std::filesystem::path& path, std::string* config_hash) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open projection cache " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::parse, std::string("projection cache: ") + e.what());
  }
  if (config_hash) *config_hash = j.value("config_hash", std::string());
  return projection_from_json(j);
}

}  // namespace acervo
