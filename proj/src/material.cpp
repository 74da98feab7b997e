#include <cmath>
#include <fstream>
#include <numbers>

#include "acervo/error.hpp"
#include "acervo/hash.hpp"
#include "acervo/projection.hpp"

namespace acervo {

void MaterialConfig::validate() const {
  if (vertices.size() != 3)
    throw Error(ErrorCode::invalid_argument,
                "material config needs exactly 3 vertices, got " + std::to_string(vertices.size()));
  for (const auto& [label, cls] : label_to_class) {
    bool known = false;
    for (const auto& v : vertices) known = known || v.first == cls;
    if (!known)
      throw Error(ErrorCode::invalid_argument,
                  "material label '" + label + "' maps to unknown macro-class '" + cls + "'");
  }
}

// {"vertices": {"class": [x, y], ...}, "labels": {"raw label": "class", ...}}
MaterialConfig material_config_from_json(const Json& j) {
  MaterialConfig config;
  if (!j.is_object() || !j.contains("vertices") || !j["vertices"].is_object())
    throw Error(ErrorCode::parse, "material config: missing 'vertices' object");
  for (const auto& [name, xy] : j["vertices"].items()) {
    if (!xy.is_array() || xy.size() != 2 || !xy[0].is_number() || !xy[1].is_number())
      throw Error(ErrorCode::parse, "material config: vertex '" + name + "' must be [x, y]");
    config.vertices.emplace_back(name, Point2{xy[0].get<double>(), xy[1].get<double>()});
  }
  if (auto it = j.find("labels"); it != j.end()) {
    for (const auto& [label, cls] : it->items())
      config.label_to_class[normalize_nfc(label)] = cls.get<std::string>();
  }
  config.validate();
  return config;
}

MaterialConfig load_material_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open material config " + path.string());
  try {
    return material_config_from_json(Json::parse(in));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::parse, std::string("material config: ") + e.what());
  }
}

Projection2D material_layout(const Catalog& catalog, const MaterialConfig& config) {
  config.validate();
  const Point2 va = config.vertices[0].second, vb = config.vertices[1].second,
               vc = config.vertices[2].second;
  const Point2 centroid{(va.x + vb.x + vc.x) / 3.0, (va.y + vb.y + vc.y) / 3.0};

  // Circumradius R = abc / (4 area).
  const double ab = std::hypot(va.x - vb.x, va.y - vb.y);
  const double bc = std::hypot(vb.x - vc.x, vb.y - vc.y);
  const double ca = std::hypot(vc.x - va.x, vc.y - va.y);
  const double area = 0.5 * std::abs((vb.x - va.x) * (vc.y - va.y) - (vc.x - va.x) * (vb.y - va.y));
  if (!(area > 0.0)) throw Error(ErrorCode::invalid_argument, "material config: vertices are colinear");
  const double jitter_radius = 0.05 * ab * bc * ca / (4.0 * area);

  Projection2D proj;
  proj.view_mode = ViewMode::material;
  for (const Item& item : catalog.items()) {
    double counts[3] = {0, 0, 0};
    for (const auto& m : item.materials) {
      auto it = config.label_to_class.find(m);
      if (it == config.label_to_class.end()) continue;
      for (int v = 0; v < 3; ++v)
        if (config.vertices[static_cast<std::size_t>(v)].first == it->second) counts[v] += 1.0;
    }
    const double total = counts[0] + counts[1] + counts[2];
    Point2 p;
    if (total > 0.0) {
      p.x = (counts[0] * va.x + counts[1] * vb.x + counts[2] * vc.x) / total;
      p.y = (counts[0] * va.y + counts[1] * vb.y + counts[2] * vc.y) / total;
    } else {
      const double angle = static_cast<double>(mix64(item.id) >> 11) * 0x1.0p-53 * 2.0 * std::numbers::pi;
      p.x = centroid.x + jitter_radius * std::cos(angle);
      p.y = centroid.y + jitter_radius * std::sin(angle);
    }
    proj.ids.push_back(item.id);
    proj.coords.push_back(p);
  }
  return proj;
}

}  // namespace acervo
