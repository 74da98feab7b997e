#include "acervo/lenses.hpp"

#include <algorithm>
#include <fstream>
#include <tuple>

#include "acervo/error.hpp"

namespace acervo {

YearlyCounts yearly_counts(const Catalog& catalog) {
  std::map<int, std::size_t> counts;
  YearlyCounts out;
  for (const Item& item : catalog.items()) {
    if (item.acquisition && item.acquisition->year) ++counts[*item.acquisition->year];
    else ++out.undated;
  }
  for (const auto& [year, n] : counts) out.years.push_back({year, n});
  return out;
}

Page paginate(std::span<const ItemId> ordered, std::size_t page, std::size_t page_size) {
  if (page_size == 0) throw Error(ErrorCode::invalid_argument, "page_size must be >= 1");
  Page out{ordered.size(), page, page_size, {}};
  if (page < (ordered.size() + page_size - 1) / page_size) {
    const std::size_t begin = page * page_size;
    const std::size_t end = std::min(ordered.size(), begin + page_size);
    out.ids.assign(ordered.begin() + static_cast<std::ptrdiff_t>(begin),
                   ordered.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

YearDetail year_detail(const Catalog& catalog, int year, std::size_t page, std::size_t page_size) {
  YearDetail detail;
  detail.year = year;
  // (month known, month, day known, day, id); month-unknown sorts first.
  std::vector<std::tuple<int, int, int, int, ItemId>> keys;
  for (const Item& item : catalog.items()) {
    if (!item.acquisition || item.acquisition->year != year) continue;
    const auto& d = *item.acquisition;
    if (d.month) ++detail.month_buckets[static_cast<std::size_t>(*d.month - 1)];
    else ++detail.month_unknown;
    keys.emplace_back(d.month ? 1 : 0, d.month.value_or(0), d.day ? 0 : 1, d.day.value_or(0), item.id);
  }
  std::sort(keys.begin(), keys.end());
  for (const auto& k : keys) detail.ordered.push_back(std::get<4>(k));
  detail.page = paginate(detail.ordered, page, page_size);
  return detail;
}

const std::vector<ItemId>* GeoMarkerSet::find(const std::string& key) const {
  if (key.rfind("c:", 0) == 0) {
    for (const auto& m : red)
      if (m.community == key.substr(2)) return &m.ids;
  } else if (key.rfind("s:", 0) == 0) {
    for (const auto& m : blue)
      if (m.state == key.substr(2)) return &m.ids;
  }
  return nullptr;
}

GeoMarkerSet map_markers(const Catalog& catalog, const StateCentroids& centroids) {
  std::map<std::string, RedMarker> red;
  std::map<std::string, BlueMarker> blue;
  GeoMarkerSet out;
  for (const Item& item : catalog.items()) {
    if (item.community_coords && item.povo) {
      RedMarker& m = red[*item.povo];
      m.community = *item.povo;
      m.lat += item.community_coords->lat;
      m.lon += item.community_coords->lon;
      m.ids.push_back(item.id);
    } else if (item.state) {
      auto it = centroids.find(*item.state);
      if (it == centroids.end())
        throw Error(ErrorCode::invalid_argument, "no centroid configured for state '" + *item.state + "'");
      BlueMarker& m = blue[*item.state];
      m.state = *item.state;
      m.lat = it->second.lat;
      m.lon = it->second.lon;
      m.ids.push_back(item.id);
    } else {
      ++out.unmapped;
    }
  }
  for (auto& [name, m] : red) {
    m.lat /= static_cast<double>(m.ids.size());
    m.lon /= static_cast<double>(m.ids.size());
    out.red.push_back(std::move(m));
  }
  for (auto& [state, m] : blue) out.blue.push_back(std::move(m));
  return out;
}

StateCentroids state_centroids_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::parse, "state centroids must be a JSON object");
  StateCentroids out;
  for (const auto& [code, v] : j.items()) {
    try {
      GeoCoord c{v.at("lat").get<double>(), v.at("lon").get<double>()};
      if (c.lat < -90.0 || c.lat > 90.0 || c.lon < -180.0 || c.lon > 180.0)
        throw Error(ErrorCode::parse, "state centroid '" + code + "' out of range");
      out[normalize_nfc(code)] = c;
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::parse, "state centroid '" + code + "': " + e.what());
    }
  }
  return out;
}

StateCentroids load_state_centroids(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open state centroid file " + path.string());
  try {
    return state_centroids_from_json(Json::parse(in));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::parse, "state centroid file " + path.string() + ": " + e.what());
  }
}

}  // namespace acervo
