#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "acervo/catalog.hpp"

namespace acervo {

struct YearSummary {
  int year = 0;
  std::size_t count = 0;

  bool operator==(const YearSummary&) const = default;
};

struct YearlyCounts {
  std::vector<YearSummary> years;  // ascending, zero-count years omitted
  std::size_t undated = 0;         // items with no year
};

YearlyCounts yearly_counts(const Catalog& catalog);

struct Page {
  std::size_t total = 0;
  std::size_t page = 0;  // 0-based
  std::size_t page_size = 0;
  std::vector<ItemId> ids;
};

// Throws Error(invalid_argument) for page_size 0. A page past the end is empty.
Page paginate(std::span<const ItemId> ordered, std::size_t page, std::size_t page_size);

struct YearDetail {
  int year = 0;
  std::array<std::size_t, 12> month_buckets{};  // January first
  std::size_t month_unknown = 0;
  std::vector<ItemId> ordered;  // whole year
  Page page;
};

// Order: month unknown first, then (month, day with unknown last, id).
YearDetail year_detail(const Catalog& catalog, int year, std::size_t page, std::size_t page_size);

struct RedMarker {
  std::string community;
  double lat = 0.0;
  double lon = 0.0;
  std::vector<ItemId> ids;  // ascending
};

struct BlueMarker {
  std::string state;
  double lat = 0.0;
  double lon = 0.0;
  std::vector<ItemId> ids;  // ascending
};

struct GeoMarkerSet {
  std::vector<RedMarker> red;    // by community name
  std::vector<BlueMarker> blue;  // by state code
  std::size_t unmapped = 0;

  // Keys are "c:<community>" and "s:<state>".
  const std::vector<ItemId>* find(const std::string& key) const;
};

using StateCentroids = std::map<std::string, GeoCoord>;

// Items with coordinates and a povo form red markers at the mean coordinate;
// the rest with a state form blue markers at the configured centroid.
// Throws Error(invalid_argument) when a needed state centroid is missing.
GeoMarkerSet map_markers(const Catalog& catalog, const StateCentroids& centroids);

// {"AM": {"lat": .., "lon": ..}, ...}
StateCentroids state_centroids_from_json(const Json& j);
StateCentroids load_state_centroids(const std::filesystem::path& path);

}  // namespace acervo
