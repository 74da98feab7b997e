#include <doctest.h>

#include "acervo/error.hpp"
#include "fixtures.hpp"
#include "lens_oracle.hpp"

using namespace acervo;

namespace {

Item dated(ItemId id, std::optional<int> year, std::optional<int> month = {}, std::optional<int> day = {}) {
  Item it;
  it.id = id;
  if (year) it.acquisition = PartialDate{year, month, day};
  return it;
}

StateCentroids all_states() {
  StateCentroids c;
  double lat = -3.0;
  for (const auto& s : fixtures::kStates) c[s] = {lat -= 2.0, -55.0};
  return c;
}

}  // namespace

TEST_CASE("yearly counts") {
  const Catalog c({dated(1, 1950), dated(2, 1950), dated(3, 1960), dated(4, std::nullopt)});
  const auto yc = yearly_counts(c);
  CHECK(yc.years == std::vector<YearSummary>{{1950, 2}, {1960, 1}});
  CHECK(yc.undated == 1);

  const Catalog none({dated(1, std::nullopt), dated(2, std::nullopt)});
  CHECK(yearly_counts(none).years.empty());
  CHECK(yearly_counts(none).undated == 2);
}

TEST_CASE("year detail ordering and buckets") {
  const Catalog c({dated(10, 1970, 7), dated(11, 1970, 3, 20), dated(12, 1970, 3), dated(13, 1970),
                   dated(14, 1970, 3, 2), dated(15, 1971, 1)});
  const auto d = year_detail(c, 1970, 0, 10);
  CHECK(d.month_buckets[2] == 3);
  CHECK(d.month_buckets[6] == 1);
  CHECK(d.month_unknown == 1);
  CHECK(d.ordered == std::vector<ItemId>{13, 14, 11, 12, 10});
  CHECK(d.page.ids == d.ordered);

  const auto p1 = year_detail(c, 1970, 1, 2);
  CHECK(p1.page.ids == std::vector<ItemId>{11, 12});
  CHECK(p1.month_buckets == d.month_buckets);
  CHECK(p1.page.total == 5);

  const auto empty = year_detail(c, 1999, 0, 10);
  CHECK(empty.ordered.empty());
  CHECK(empty.page.total == 0);
  CHECK_THROWS_AS(year_detail(c, 1970, 0, 0), Error);
}

TEST_CASE("pagination arithmetic") {
  const std::vector<ItemId> ids = {1, 2, 3, 4, 5};
  CHECK(paginate(ids, 0, 2).ids.size() == 2);
  CHECK(paginate(ids, 1, 2).ids.size() == 2);
  CHECK(paginate(ids, 2, 2).ids == std::vector<ItemId>{5});
  const auto past = paginate(ids, 9, 2);
  CHECK(past.ids.empty());
  CHECK(past.total == 5);
  CHECK(paginate(ids, 0, 10).ids == ids);
  CHECK_THROWS_AS(paginate(ids, 0, 0), Error);
}

TEST_CASE("map markers") {
  std::vector<Item> items(5);
  for (std::size_t i = 0; i < 5; ++i) items[i].id = i + 1;
  items[0].povo = "Tikuna";
  items[0].community_coords = GeoCoord{-3.1, -60.0};
  items[1].povo = "Tikuna";
  items[1].community_coords = GeoCoord{-3.1, -60.0};
  items[1].state = "AM";
  items[2].state = "AM";
  items[3].community_coords = GeoCoord{-10.0, -50.0};  // no community name
  items[3].state = "PA";
  const Catalog c(items);
  const StateCentroids centroids = {{"AM", {-4.0, -63.0}}, {"PA", {-4.5, -52.0}}};
  const auto m = map_markers(c, centroids);
  REQUIRE(m.red.size() == 1);
  CHECK(m.red[0].community == "Tikuna");
  CHECK(m.red[0].lat == doctest::Approx(-3.1));
  CHECK(m.red[0].lon == doctest::Approx(-60.0));
  CHECK(m.red[0].ids == std::vector<ItemId>{1, 2});
  REQUIRE(m.blue.size() == 2);
  CHECK(m.blue[0].state == "AM");
  CHECK(m.blue[0].lat == -4.0);
  CHECK(m.blue[0].ids == std::vector<ItemId>{3});
  CHECK(m.blue[1].ids == std::vector<ItemId>{4});
  CHECK(m.unmapped == 1);
  CHECK(*m.find("c:Tikuna") == std::vector<ItemId>{1, 2});
  CHECK(*m.find("s:PA") == std::vector<ItemId>{4});
  CHECK(m.find("s:MT") == nullptr);
  CHECK(m.find("Tikuna") == nullptr);

  CHECK_THROWS_AS(map_markers(c, {{"AM", {-4.0, -63.0}}}), Error);
}

TEST_CASE("red marker sits at the mean member coordinate") {
  std::vector<Item> items(3);
  for (std::size_t i = 0; i < 3; ++i) {
    items[i].id = i + 1;
    items[i].povo = "Bororo";
    items[i].community_coords = GeoCoord{-15.0 - double(i), -55.0 + 0.5 * double(i)};
  }
  const auto m = map_markers(Catalog(items), {});
  REQUIRE(m.red.size() == 1);
  CHECK(m.red[0].lat == doctest::Approx(-16.0));
  CHECK(m.red[0].lon == doctest::Approx(-54.5));
}

TEST_CASE("state centroid config") {
  const auto c = state_centroids_from_json(Json::parse(R"({"AM": {"lat": -4, "lon": -63}})"));
  CHECK(c.at("AM") == GeoCoord{-4, -63});
  CHECK_THROWS_AS(state_centroids_from_json(Json::parse(R"({"AM": {"lat": -95, "lon": -63}})")), Error);
  CHECK_THROWS_AS(state_centroids_from_json(Json::parse(R"({"AM": [1, 2]})")), Error);
  CHECK_THROWS_AS(load_state_centroids("/nonexistent/centroids.json"), Error);
}

TEST_CASE("partitions hold on random catalogs") {
  std::mt19937_64 rng(31);
  const auto centroids = all_states();
  for (int trial = 0; trial < 100; ++trial) {
    const Catalog c = fixtures::random_catalog(1 + fixtures::pick(rng, 400), rng());
    CHECK(lens_oracle::temporal_partition_holds(c));
    CHECK(lens_oracle::geographic_partition_holds(c, centroids));
  }
}

TEST_CASE("year ordering matches a sort-key oracle") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 30; ++trial) {
    const Catalog c = fixtures::random_catalog(300, rng());
    for (const auto& ys : yearly_counts(c).years) {
      std::vector<ItemId> expected;
      for (const auto& it : c.items())
        if (it.acquisition && it.acquisition->year == ys.year) expected.push_back(it.id);
      auto rank = [&](ItemId id) {
        const auto& a = *c.at(id).acquisition;
        return std::tuple(a.month.has_value(), a.month.value_or(0), !a.day.has_value(), a.day.value_or(0), id);
      };
      std::sort(expected.begin(), expected.end(), [&](ItemId x, ItemId y) { return rank(x) < rank(y); });
      CHECK(year_detail(c, ys.year, 0, 1).ordered == expected);
    }
  }
}
