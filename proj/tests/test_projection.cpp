#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "acervo/error.hpp"
#include "acervo/projection.hpp"
#include "curve_oracle.hpp"
#include "fixtures.hpp"

using namespace acervo;

TEST_CASE("calibrate_row hits log2(k) on random rows") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + fixtures::pick(rng, 40);
    std::vector<double> d(k);
    for (auto& v : d) v = 0.01 + 5.0 * fixtures::uniform(rng);
    std::sort(d.begin(), d.end());
    const RowCalibration c = calibrate_row(d);
    REQUIRE_FALSE(c.degenerate);
    CHECK(c.rho == d.front());
    double sum = 0.0;
    for (double x : d) sum += std::exp(-std::max(0.0, x - c.rho) / c.sigma);
    CHECK(std::abs(sum - std::log2(double(k))) <= 1e-3);
    CHECK(c.residual <= 1e-3);
  }
}

TEST_CASE("uniform rows are flagged degenerate without throwing") {
  for (std::size_t k : {3u, 15u, 50u}) {
    std::vector<double> d(k, 2.5);
    RowCalibration c;
    CHECK_NOTHROW(c = calibrate_row(d));
    CHECK(c.degenerate);
    CHECK(std::isfinite(c.sigma));
  }
  std::vector<double> zeros(10, 0.0);
  CHECK(calibrate_row(zeros).degenerate);
}

TEST_CASE("fuzzy union of directed memberships") {
  CHECK(fuzzy_union(0.5, 0.5) == 0.75);
  CHECK(fuzzy_union(1.0, 0.3) == 1.0);
  CHECK(fuzzy_union(0.0, 0.3) == 0.3);

  const auto clusters = fixtures::gaussian_clusters(60, 8, 4.0, 3);
  ProjectionConfig cfg;
  cfg.n_neighbors = 6;
  const NeighborGraph g = knn_graph(clusters.embeddings, cfg);
  const WeightedGraph w = fuzzy_simplicial_set(g);
  auto directed = [&](std::size_t i, std::size_t j) {
    auto nb = g.row_neighbors(i);
    for (std::size_t r = 0; r < g.k; ++r)
      if (nb[r] == j) return std::exp(-std::max(0.0, g.row_distances(i)[r] - g.rho[i]) / g.sigma[i]);
    return 0.0;
  };
  for (const auto& e : w.edges) {
    CHECK(e.i < e.j);
    CHECK(e.weight > 0.0);
    CHECK(e.weight <= 1.0);
    const double p = directed(e.i, e.j), q = directed(e.j, e.i);
    CHECK(e.weight == doctest::Approx(p + q - p * q).epsilon(1e-12));
    CHECK(w.weight(e.j, e.i) == e.weight);
  }
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t r = 0; r < g.k; ++r) CHECK(w.weight(i, g.row_neighbors(i)[r]) > 0.0);
}

TEST_CASE("fit_curve agrees with an independent least-squares search") {
  for (auto [min_dist, spread] : {std::pair{0.1, 1.0}, {0.1, 2.0}, {0.0, 1.0}, {0.5, 1.0}, {0.25, 1.5}}) {
    const CurveFit fit = fit_curve(min_dist, spread);
    const auto oracle = curve_oracle::fit(min_dist, spread);
    INFO("min_dist=" << min_dist << " spread=" << spread);
    CHECK(fit.converged);
    CHECK(std::abs(fit.a - oracle.a) <= 0.01);
    CHECK(std::abs(fit.b - oracle.b) <= 0.01);
    CHECK(fit.residual <= curve_oracle::sse(oracle.a, oracle.b, min_dist, spread) + 1e-9);
  }
}

TEST_CASE("fit_curve frozen reference values") {
  // Reference values from an off-line Levenberg-Marquardt run on the same grid.
  struct Ref {
    double min_dist, spread, a, b;
  };
  for (const Ref& r : {Ref{0.1, 1.0, 1.57694191, 0.89506194}, Ref{0.1, 2.0, 0.54466049, 0.8420551},
                       Ref{0.0, 1.0, 1.93280736, 0.79049416}, Ref{0.5, 1.0, 0.58301799, 1.33418904}}) {
    const CurveFit fit = fit_curve(r.min_dist, r.spread);
    CHECK(fit.a == doctest::Approx(r.a).epsilon(1e-4));
    CHECK(fit.b == doctest::Approx(r.b).epsilon(1e-4));
  }
}

TEST_CASE("projection is deterministic per seed and separates clusters") {
  const auto clusters = fixtures::gaussian_clusters(150, 16, 10.0, 8);
  ProjectionConfig cfg;
  cfg.seed = 7;
  cfg.n_epochs = 100;
  const Projection2D a = project_embeddings(clusters.embeddings, cfg, ViewMode::semantic_text);
  const Projection2D b = project_embeddings(clusters.embeddings, cfg, ViewMode::semantic_text);
  CHECK(a.coords == b.coords);
  cfg.seed = 8;
  const Projection2D c = project_embeddings(clusters.embeddings, cfg, ViewMode::semantic_text);
  CHECK(a.coords != c.coords);
  CHECK(silhouette_score(a.coords, clusters.labels) > 0.5);
  CHECK(trustworthiness(clusters.embeddings, a, 10) > 0.9);
  for (const auto& p : a.coords) CHECK((std::isfinite(p.x) && std::isfinite(p.y)));
}

TEST_CASE("spectral initialization only for a single connected component") {
  WeightedGraph connected;
  connected.n = 6;
  for (std::uint32_t i = 0; i + 1 < 6; ++i) connected.edges.push_back({i, i + 1, 1.0});
  bool spectral = false;
  auto pts = initial_layout(connected, 1, &spectral);
  CHECK(spectral);
  CHECK(pts.size() == 6);

  WeightedGraph split;
  split.n = 6;
  split.edges = {{0, 1, 1.0}, {1, 2, 1.0}, {3, 4, 1.0}, {4, 5, 1.0}};
  pts = initial_layout(split, 1, &spectral);
  CHECK_FALSE(spectral);
  for (const auto& p : pts) CHECK((std::abs(p.x) <= 10.0 && std::abs(p.y) <= 10.0));
}

TEST_CASE("silhouette of two tight pairs") {
  std::vector<Point2> pts = {{0, 0}, {0, 1}, {10, 0}, {10, 1}};
  std::vector<int> labels = {0, 0, 1, 1};
  const double b = (10.0 + std::sqrt(101.0)) / 2.0;
  CHECK(silhouette_score(pts, labels) == doctest::Approx(1.0 - 1.0 / b).epsilon(1e-12));
}

TEST_CASE("material layout places items barycentrically") {
  const Json cfg_json = Json::parse(R"({
    "vertices": {"animal": [0, 0], "mineral": [1, 0], "vegetal": [0, 1]},
    "labels": {"pena": "animal", "argila": "mineral", "palha": "vegetal", "madeira": "vegetal"}})");
  const MaterialConfig cfg = material_config_from_json(cfg_json);
  std::vector<Item> items(4);
  items[0].id = 1;
  items[0].materials = {"pena"};
  items[1].id = 2;
  items[1].materials = {"argila", "palha"};
  items[2].id = 3;
  items[2].materials = {"palha", "madeira", "pena", "desconhecido"};
  items[3].id = 4;
  const Projection2D p = material_layout(Catalog(items), cfg);
  CHECK(p.view_mode == ViewMode::material);
  CHECK(p.coords[0] == Point2{0, 0});
  CHECK(p.coords[1].x == doctest::Approx(0.5));
  CHECK(p.coords[1].y == doctest::Approx(0.5));
  CHECK(p.coords[2].x == doctest::Approx(0.0));
  CHECK(p.coords[2].y == doctest::Approx(2.0 / 3.0));
  // No mapped material: near the centroid, within 0.05 circumradius.
  const double r = std::hypot(p.coords[3].x - 1.0 / 3.0, p.coords[3].y - 1.0 / 3.0);
  CHECK(r == doctest::Approx(0.05 * std::sqrt(2.0) / 2.0).epsilon(1e-9));

  CHECK_THROWS_AS(material_config_from_json(Json::parse(R"({"vertices": {"a": [0, 0], "b": [1, 0]}})")), Error);
  CHECK_THROWS_AS(
      material_config_from_json(Json::parse(R"({"vertices": {"a": [0,0], "b": [1,0], "c": [0,1]}, "labels": {"x": "d"}})")),
      Error);
  CHECK_THROWS_AS(material_layout(Catalog(items), material_config_from_json(Json::parse(
                                                      R"({"vertices": {"a": [0,0], "b": [1,1], "c": [2,2]}})"))),
                  Error);
}

TEST_CASE("projection cache round trip is exact") {
  const auto clusters = fixtures::gaussian_clusters(40, 4, 5.0, 2);
  ProjectionConfig cfg;
  cfg.n_neighbors = 5;
  cfg.n_epochs = 20;
  const Projection2D p = project_embeddings(clusters.embeddings, cfg, ViewMode::semantic_image);
  const auto dir = fixtures::temp_dir("proj_io");
  save_projection(p, "abc", dir / "p.json");
  std::string hash;
  const Projection2D back = load_projection(dir / "p.json", &hash);
  CHECK(hash == "abc");
  CHECK(back.ids == p.ids);
  CHECK(back.coords == p.coords);
  CHECK(back.view_mode == p.view_mode);
  CHECK(back.a == p.a);
  CHECK(back.b == p.b);
}

TEST_CASE("projection config validation") {
  ProjectionConfig cfg;
  cfg.n_neighbors = 1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.spread = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK_THROWS_AS(view_mode_from_string("semantic_audio"), Error);
}
