#include "acervo/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include "acervo/error.hpp"
#include "acervo/hash.hpp"

namespace acervo {

namespace {

const std::set<std::string, std::less<>> kKnownFields = {
    "id",    "titulo",           "categoria", "povo",        "descricao", "thumbnail_url",
    "acquisition", "state",      "community_coords", "materials", "extensions"};

[[noreturn]] void fail(const std::string& message) { throw Error(ErrorCode::parse, message); }

std::optional<std::string> optional_text(const Json& object, const char* key, bool label) {
  auto it = object.find(key);
  if (it == object.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) fail(std::string("field '") + key + "' must be a string");
  auto text = it->get<std::string>();
  return label ? normalize_nfc(text) : text;
}

std::optional<int> optional_int(const Json& object, const char* key) {
  auto it = object.find(key);
  if (it == object.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) fail(std::string("date field '") + key + "' must be an integer");
  return it->get<int>();
}

PartialDate parse_date(const Json& value) {
  if (!value.is_object()) fail("field 'acquisition' must be an object");
  PartialDate date{optional_int(value, "year"), optional_int(value, "month"),
                   optional_int(value, "day")};
  if (date.day && !date.month) fail("acquisition has a day but no month");
  if (date.month && !date.year) fail("acquisition has a month but no year");
  if (date.month && (*date.month < 1 || *date.month > 12))
    fail("acquisition month " + std::to_string(*date.month) + " outside 1..12");
  if (date.day && (*date.day < 1 || *date.day > 31))
    fail("acquisition day " + std::to_string(*date.day) + " outside 1..31");
  return date;
}

GeoCoord parse_coords(const Json& value) {
  if (!value.is_object() || !value.contains("lat") || !value.contains("lon") ||
      !value["lat"].is_number() || !value["lon"].is_number())
    fail("field 'community_coords' must be {lat, lon} numbers");
  GeoCoord c{value["lat"].get<double>(), value["lon"].get<double>()};
  if (!std::isfinite(c.lat) || c.lat < -90.0 || c.lat > 90.0)
    fail("latitude " + std::to_string(c.lat) + " out of range [-90, 90]");
  if (!std::isfinite(c.lon) || c.lon < -180.0 || c.lon > 180.0)
    fail("longitude " + std::to_string(c.lon) + " out of range [-180, 180]");
  return c;
}

}  // namespace

std::string normalize_nfc(const std::string& text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error(ErrorCode::io, "ICU NFC normalizer unavailable");
  icu::UnicodeString source = icu::UnicodeString::fromUTF8(text);
  if (nfc->isNormalized(source, status) && U_SUCCESS(status)) return text;
  status = U_ZERO_ERROR;
  icu::UnicodeString normalized = nfc->normalize(source, status);
  if (U_FAILURE(status)) return text;
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

Catalog::Catalog(std::vector<Item> items) : items_(std::move(items)) {
  std::sort(items_.begin(), items_.end(),
            [](const Item& a, const Item& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < items_.size(); ++i) {
    if (items_[i].id == items_[i - 1].id)
      throw Error(ErrorCode::invalid_argument,
                  "duplicate item id " + std::to_string(items_[i].id));
  }
}

const Item* Catalog::find(ItemId id) const {
  auto it = std::lower_bound(items_.begin(), items_.end(), id,
                             [](const Item& item, ItemId key) { return item.id < key; });
  if (it == items_.end() || it->id != id) return nullptr;
  return &*it;
}

const Item& Catalog::at(ItemId id) const {
  const Item* item = find(id);
  if (!item) throw Error(ErrorCode::not_found, "unknown item id " + std::to_string(id));
  return *item;
}

Item item_from_json(const Json& object, std::vector<std::string>* warnings) {
  if (!object.is_object()) fail("line is not a JSON object");
  auto id_it = object.find("id");
  if (id_it == object.end() || !id_it->is_number_integer()) fail("missing integer 'id'");
  if (id_it->is_number_integer() && !id_it->is_number_unsigned() && id_it->get<long long>() < 0)
    fail("negative 'id'");

  Item item;
  item.id = id_it->get<ItemId>();
  item.titulo = optional_text(object, "titulo", false).value_or("");
  item.categoria = optional_text(object, "categoria", true);
  item.povo = optional_text(object, "povo", true);
  item.descricao = optional_text(object, "descricao", false);
  item.thumbnail_url = optional_text(object, "thumbnail_url", false);
  item.state = optional_text(object, "state", true);

  if (auto it = object.find("acquisition"); it != object.end() && !it->is_null())
    item.acquisition = parse_date(*it);
  if (auto it = object.find("community_coords"); it != object.end() && !it->is_null())
    item.community_coords = parse_coords(*it);
  if (auto it = object.find("materials"); it != object.end() && !it->is_null()) {
    if (!it->is_array()) fail("field 'materials' must be an array of strings");
    for (const auto& m : *it) {
      if (!m.is_string()) fail("field 'materials' must be an array of strings");
      item.materials.push_back(normalize_nfc(m.get<std::string>()));
    }
  }
  if (auto it = object.find("extensions"); it != object.end() && !it->is_null()) {
    if (!it->is_object()) fail("field 'extensions' must be an object of numbers");
    for (const auto& [key, value] : it->items()) {
      if (!value.is_number() || !std::isfinite(value.get<double>()))
        fail("extension '" + key + "' must be a finite number");
      item.extensions[key] = value.get<double>();
    }
  }
  if (warnings) {
    for (const auto& [key, value] : object.items()) {
      if (!kKnownFields.contains(key)) warnings->push_back("unknown field '" + key + "' ignored");
    }
  }
  return item;
}

Json item_to_json(const Item& item) {
  Json j;
  j["id"] = item.id;
  j["titulo"] = item.titulo;
  auto put = [&j](const char* key, const std::optional<std::string>& value) {
    j[key] = value ? Json(*value) : Json(nullptr);
  };
  put("categoria", item.categoria);
  put("povo", item.povo);
  put("descricao", item.descricao);
  put("thumbnail_url", item.thumbnail_url);
  put("state", item.state);
  if (item.acquisition) {
    Json date = Json::object();
    if (item.acquisition->year) date["year"] = *item.acquisition->year;
    if (item.acquisition->month) date["month"] = *item.acquisition->month;
    if (item.acquisition->day) date["day"] = *item.acquisition->day;
    j["acquisition"] = date;
  } else {
    j["acquisition"] = nullptr;
  }
  if (item.community_coords) {
    j["community_coords"] = {{"lat", item.community_coords->lat},
                             {"lon", item.community_coords->lon}};
  } else {
    j["community_coords"] = nullptr;
  }
  j["materials"] = item.materials;
  if (!item.extensions.empty()) j["extensions"] = item.extensions;
  return j;
}

CatalogLoad parse_catalog(std::istream& in) {
  CatalogLoad result;
  std::vector<Item> items;
  std::map<ItemId, std::size_t> first_line;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    Json object;
    try {
      object = Json::parse(line);
    } catch (const Json::parse_error& e) {
      result.report.errors.push_back({std::nullopt, line_no, std::string("malformed JSON: ") + e.what()});
      continue;
    }
    std::optional<ItemId> id;
    if (object.is_object() && object.contains("id") && object["id"].is_number_unsigned())
      id = object["id"].get<ItemId>();
    std::vector<std::string> warnings;
    try {
      Item item = item_from_json(object, &warnings);
      auto [pos, inserted] = first_line.emplace(item.id, line_no);
      if (!inserted) {
        result.report.errors.push_back(
            {item.id, line_no,
             "duplicate id " + std::to_string(item.id) + " (first seen on line " +
                 std::to_string(pos->second) + ")"});
        continue;
      }
      items.push_back(std::move(item));
      for (auto& w : warnings) result.report.warnings.push_back({id, line_no, std::move(w)});
    } catch (const Error& e) {
      result.report.errors.push_back({id, line_no, e.what()});
    }
  }
  result.catalog = Catalog(std::move(items));
  result.report.item_count = result.catalog.size();
  return result;
}

CatalogLoad load_catalog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open catalog file " + path.string());
  return parse_catalog(in);
}

void save_catalog(const Catalog& catalog, std::ostream& out) {
  for (const Item& item : catalog.items()) out << item_to_json(item).dump() << '\n';
}

void save_catalog(const Catalog& catalog, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write catalog file " + path.string());
  save_catalog(catalog, out);
}

std::string catalog_hash(const Catalog& catalog) {
  std::ostringstream out;
  save_catalog(catalog, out);
  return hex64(fnv1a64(out.str()));
}

Json to_json(const ValidationReport& report) {
  auto issues = [](const std::vector<Issue>& list) {
    Json arr = Json::array();
    for (const auto& issue : list) {
      Json e;
      e["id"] = issue.item_id ? Json(*issue.item_id) : Json(nullptr);
      e["line"] = issue.line;
      e["message"] = issue.message;
      arr.push_back(std::move(e));
    }
    return arr;
  };
  Json j;
  j["accepted"] = report.accepted();
  j["item_count"] = report.item_count;
  j["with_image_embedding"] = report.with_image_embedding;
  j["with_text_embedding"] = report.with_text_embedding;
  j["errors"] = issues(report.errors);
  j["warnings"] = issues(report.warnings);
  return j;
}

}  // namespace acervo
