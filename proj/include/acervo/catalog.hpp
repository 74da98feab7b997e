#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "acervo/json_format.hpp"

namespace acervo {

using ItemId = std::uint64_t;

// Acquisition date with any suffix unknown: day => month => year.
struct PartialDate {
  std::optional<int> year;
  std::optional<int> month;
  std::optional<int> day;

  bool operator==(const PartialDate&) const = default;
};

struct GeoCoord {
  double lat = 0.0;
  double lon = 0.0;

  bool operator==(const GeoCoord&) const = default;
};

struct Item {
  ItemId id = 0;
  std::string titulo;
  std::optional<std::string> categoria;
  std::optional<std::string> povo;
  std::optional<std::string> descricao;
  std::optional<std::string> thumbnail_url;
  std::optional<PartialDate> acquisition;
  std::optional<std::string> state;
  std::optional<GeoCoord> community_coords;
  std::vector<std::string> materials;
  // Extra numeric attributes, usable by numeric filters.
  std::map<std::string, double> extensions;

  bool operator==(const Item&) const = default;
};

struct Issue {
  std::optional<ItemId> item_id;
  std::size_t line = 0;  // 1-based; 0 when not tied to a line
  std::string message;
};

struct ValidationReport {
  std::size_t item_count = 0;
  std::size_t with_image_embedding = 0;
  std::size_t with_text_embedding = 0;
  std::vector<Issue> errors;
  std::vector<Issue> warnings;

  bool accepted() const { return errors.empty(); }
};

Json to_json(const ValidationReport& report);

// Immutable, id-sorted item collection.
class Catalog {
 public:
  Catalog() = default;
  // Throws Error(invalid_argument) on duplicate ids.
  explicit Catalog(std::vector<Item> items);

  std::span<const Item> items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  const Item* find(ItemId id) const;
  const Item& at(ItemId id) const;
  bool contains(ItemId id) const { return find(id) != nullptr; }

 private:
  std::vector<Item> items_;
};

struct CatalogLoad {
  Catalog catalog;
  ValidationReport report;
};

// Every line that fails to parse or validate is listed in report.errors and
// its item is left out of the catalog.
CatalogLoad parse_catalog(std::istream& in);
CatalogLoad load_catalog(const std::filesystem::path& path);

void save_catalog(const Catalog& catalog, std::ostream& out);
void save_catalog(const Catalog& catalog, const std::filesystem::path& path);

Json item_to_json(const Item& item);
// Throws Error(parse) on schema violations; unknown keys go to `warnings`.
Item item_from_json(const Json& object, std::vector<std::string>* warnings = nullptr);

// Digest over the canonical serialization, as 16 hex chars.
std::string catalog_hash(const Catalog& catalog);

// NFC normalization of UTF-8 text (ICU).
std::string normalize_nfc(const std::string& text);

}  // namespace acervo
