#include "acervo/filter.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "acervo/error.hpp"

namespace acervo {

namespace {

const std::set<std::string, std::less<>> kCategorical = {"categoria", "povo", "state", "materials"};
const std::set<std::string, std::less<>> kDateNumeric = {"year", "month", "day"};

const std::optional<std::string>* label_field(const Item& item, const std::string& attr) {
  if (attr == "categoria") return &item.categoria;
  if (attr == "povo") return &item.povo;
  if (attr == "state") return &item.state;
  return nullptr;
}

std::optional<double> numeric_field(const Item& item, const std::string& attr) {
  if (kDateNumeric.contains(attr)) {
    if (!item.acquisition) return std::nullopt;
    const auto& d = *item.acquisition;
    const auto& field = attr == "year" ? d.year : attr == "month" ? d.month : d.day;
    if (!field) return std::nullopt;
    return static_cast<double>(*field);
  }
  auto it = item.extensions.find(attr);
  if (it == item.extensions.end()) return std::nullopt;
  return it->second;
}

}  // namespace

FilterSchema filter_schema(const Catalog& catalog) {
  FilterSchema schema;
  for (const auto& attr : kCategorical) schema.categorical[attr];
  auto widen = [&schema](const std::string& attr, double v) {
    auto [it, inserted] = schema.numeric.emplace(attr, std::make_pair(v, v));
    if (!inserted) {
      it->second.first = std::min(it->second.first, v);
      it->second.second = std::max(it->second.second, v);
    }
  };
  for (const Item& item : catalog.items()) {
    for (const char* attr : {"categoria", "povo", "state"}) {
      if (const auto& label = *label_field(item, attr)) ++schema.categorical[attr][*label];
    }
    std::set<std::string> distinct(item.materials.begin(), item.materials.end());
    for (const auto& m : distinct) ++schema.categorical["materials"][m];
    for (const auto& attr : kDateNumeric) {
      if (auto v = numeric_field(item, attr)) widen(attr, *v);
    }
    for (const auto& [key, value] : item.extensions) widen(key, value);
  }
  return schema;
}

void validate_filter(const Catalog& catalog, const FilterSpec& spec) {
  for (const auto& [attr, labels] : spec.categorical) {
    if (!kCategorical.contains(attr))
      throw Error(ErrorCode::invalid_argument, "unknown categorical attribute '" + attr + "'");
  }
  std::optional<std::set<std::string>> extension_keys;
  for (const auto& [attr, range] : spec.numeric) {
    if (!std::isfinite(range.first) || !std::isfinite(range.second) || range.first > range.second)
      throw Error(ErrorCode::invalid_argument, "invalid numeric range for '" + attr + "'");
    if (kDateNumeric.contains(attr)) continue;
    if (!extension_keys) {
      extension_keys.emplace();
      for (const Item& item : catalog.items())
        for (const auto& kv : item.extensions) extension_keys->insert(kv.first);
    }
    if (!extension_keys->contains(attr))
      throw Error(ErrorCode::invalid_argument, "unknown numeric attribute '" + attr + "'");
  }
}

bool matches(const Item& item, const FilterSpec& spec) {
  for (const auto& [attr, labels] : spec.categorical) {
    if (attr == "materials") {
      bool any = std::any_of(item.materials.begin(), item.materials.end(),
                             [&](const std::string& m) { return labels.contains(m); });
      if (!any) return false;
      continue;
    }
    const auto* field = label_field(item, attr);
    if (!field || !*field || !labels.contains(**field)) return false;
  }
  for (const auto& [attr, range] : spec.numeric) {
    auto v = numeric_field(item, attr);
    if (!v || *v < range.first || *v > range.second) return false;
  }
  return true;
}

FilterResult filter_items(const Catalog& catalog, const FilterSpec& spec) {
  validate_filter(catalog, spec);
  FilterResult result;
  for (const Item& item : catalog.items()) {
    if (matches(item, spec)) result.ids.push_back(item.id);
  }
  result.count = result.ids.size();
  return result;
}

FilterSpec filter_from_json(const Json& j) {
  FilterSpec spec;
  if (j.is_null()) return spec;
  auto bad = [](const std::string& what) { return Error(ErrorCode::invalid_argument, "filter: " + what); };
  if (!j.is_object()) throw bad("expected an object");
  for (const auto& [key, value] : j.items()) {
    if (key != "categorical" && key != "numeric") throw bad("unknown key '" + key + "'");
  }
  if (auto it = j.find("categorical"); it != j.end()) {
    if (!it->is_object()) throw bad("'categorical' must be an object");
    for (const auto& [attr, labels] : it->items()) {
      if (!labels.is_array()) throw bad("labels for '" + attr + "' must be an array");
      auto& set = spec.categorical[attr];
      for (const auto& l : labels) {
        if (!l.is_string()) throw bad("labels for '" + attr + "' must be strings");
        set.insert(normalize_nfc(l.get<std::string>()));
      }
    }
  }
  if (auto it = j.find("numeric"); it != j.end()) {
    if (!it->is_object()) throw bad("'numeric' must be an object");
    for (const auto& [attr, range] : it->items()) {
      if (!range.is_array() || range.size() != 2 || !range[0].is_number() || !range[1].is_number())
        throw bad("range for '" + attr + "' must be [min, max]");
      spec.numeric[attr] = {range[0].get<double>(), range[1].get<double>()};
    }
  }
  return spec;
}

Json filter_to_json(const FilterSpec& spec) {
  Json j = Json::object();
  j["categorical"] = Json::object();
  for (const auto& [attr, labels] : spec.categorical) j["categorical"][attr] = labels;
  j["numeric"] = Json::object();
  for (const auto& [attr, range] : spec.numeric)
    j["numeric"][attr] = Json::array({range.first, range.second});
  return j;
}

Json to_json(const FilterSchema& schema) {
  Json j;
  j["categorical"] = Json::object();
  for (const auto& [attr, labels] : schema.categorical) j["categorical"][attr] = labels;
  j["numeric"] = Json::object();
  for (const auto& [attr, range] : schema.numeric)
    j["numeric"][attr] = {{"min", range.first}, {"max", range.second}};
  return j;
}

}  // namespace acervo
