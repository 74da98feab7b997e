#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "acervo/catalog.hpp"

namespace acervo {

// Conjunction across attributes, disjunction within a categorical set.
// An item lacking a filtered attribute fails that clause.
struct FilterSpec {
  std::map<std::string, std::set<std::string>> categorical;
  std::map<std::string, std::pair<double, double>> numeric;  // inclusive

  bool empty() const { return categorical.empty() && numeric.empty(); }
};

struct FilterResult {
  std::vector<ItemId> ids;  // ascending
  std::size_t count = 0;
};

// Categorical: categoria, povo, state, materials (any label matches).
// Numeric: year, month, day, plus every extension key present in the catalog.
struct FilterSchema {
  std::map<std::string, std::map<std::string, std::size_t>> categorical;  // label -> item count
  std::map<std::string, std::pair<double, double>> numeric;               // observed range
};

FilterSchema filter_schema(const Catalog& catalog);

// Throws Error(invalid_argument) for unknown attributes or min > max.
void validate_filter(const Catalog& catalog, const FilterSpec& spec);
bool matches(const Item& item, const FilterSpec& spec);
FilterResult filter_items(const Catalog& catalog, const FilterSpec& spec);

// {"categorical": {attr: [labels]}, "numeric": {attr: [min, max]}}
FilterSpec filter_from_json(const Json& j);
Json filter_to_json(const FilterSpec& spec);
Json to_json(const FilterSchema& schema);

}  // namespace acervo
