#include "acervo/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "acervo/error.hpp"

namespace acervo {

std::string to_string(ViewMode mode) {
  switch (mode) {
    case ViewMode::semantic_image: return "semantic_image";
    case ViewMode::semantic_text: return "semantic_text";
    case ViewMode::material: return "material";
  }
  return "unknown";
}

ViewMode view_mode_from_string(const std::string& text) {
  if (text == "semantic_image") return ViewMode::semantic_image;
  if (text == "semantic_text") return ViewMode::semantic_text;
  if (text == "material") return ViewMode::material;
  throw Error(ErrorCode::invalid_argument, "unknown view mode '" + text + "'");
}

std::string to_string(Metric metric) { return metric == Metric::cosine ? "cosine" : "euclidean"; }

Metric metric_from_string(const std::string& text) {
  if (text == "euclidean") return Metric::euclidean;
  if (text == "cosine") return Metric::cosine;
  throw Error(ErrorCode::invalid_argument, "unknown metric '" + text + "'");
}

void ProjectionConfig::validate() const {
  auto bad = [](const std::string& m) { return Error(ErrorCode::invalid_argument, m); };
  if (n_neighbors < 2) throw bad("n_neighbors must be >= 2");
  if (!(min_dist >= 0.0)) throw bad("min_dist must be >= 0");
  if (!(spread > 0.0)) throw bad("spread must be > 0");
  if (!(min_dist < spread)) throw bad("min_dist must be < spread");
  if (!(initial_learning_rate > 0.0)) throw bad("initial_learning_rate must be > 0");
}

Json to_json(const ProjectionConfig& c) {
  return {{"n_neighbors", c.n_neighbors},
          {"min_dist", c.min_dist},
          {"spread", c.spread},
          {"n_epochs", c.n_epochs},
          {"negative_sample_rate", c.negative_sample_rate},
          {"initial_learning_rate", c.initial_learning_rate},
          {"seed", c.seed},
          {"metric", to_string(c.metric)}};
}

ProjectionConfig projection_config_from_json(const Json& j) {
  ProjectionConfig c;
  c.n_neighbors = j.value("n_neighbors", c.n_neighbors);
  c.min_dist = j.value("min_dist", c.min_dist);
  c.spread = j.value("spread", c.spread);
  c.n_epochs = j.value("n_epochs", c.n_epochs);
  c.negative_sample_rate = j.value("negative_sample_rate", c.negative_sample_rate);
  c.initial_learning_rate = j.value("initial_learning_rate", c.initial_learning_rate);
  c.seed = j.value("seed", c.seed);
  c.metric = metric_from_string(j.value("metric", std::string("euclidean")));
  return c;
}

namespace {

double membership_sum(std::span<const double> d, double rho, double sigma) {
  double sum = 0.0;
  for (double x : d) sum += std::exp(-std::max(0.0, x - rho) / sigma);
  return sum;
}

}  // namespace

RowCalibration calibrate_row(std::span<const double> distances) {
  if (distances.empty()) throw Error(ErrorCode::invalid_argument, "calibrate_row: empty row");
  RowCalibration out;
  out.rho = distances.front();
  const double target = std::log2(static_cast<double>(distances.size()));
  double mean = std::accumulate(distances.begin(), distances.end(), 0.0) /
                static_cast<double>(distances.size());
  if (!(mean > 0.0)) mean = 1.0;  // all-zero row (duplicates)
  const double lo_bound = 1e-3 * mean;
  const double hi_bound = 1e3 * mean;

  // membership_sum is non-decreasing in sigma.
  const double at_lo = membership_sum(distances, out.rho, lo_bound);
  const double at_hi = membership_sum(distances, out.rho, hi_bound);
  if (at_lo >= target) {
    out.sigma = lo_bound;
    out.residual = at_lo - target;
    out.degenerate = out.residual > 1e-5;
    return out;
  }
  if (at_hi <= target) {
    out.sigma = hi_bound;
    out.residual = target - at_hi;
    out.degenerate = out.residual > 1e-5;
    return out;
  }
  double lo = lo_bound, hi = hi_bound, sigma = 0.5 * (lo + hi);
  double sum = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    sigma = 0.5 * (lo + hi);
    sum = membership_sum(distances, out.rho, sigma);
    if (std::abs(sum - target) <= 1e-5) break;
    (sum > target ? hi : lo) = sigma;
  }
  out.sigma = sigma;
  out.residual = std::abs(sum - target);
  return out;
}

NeighborGraph knn_graph(const EmbeddingSet& embeddings, const ProjectionConfig& config) {
  config.validate();
  const std::size_t k = config.n_neighbors;
  if (embeddings.size() < k + 1)
    throw Error(ErrorCode::invalid_argument,
                "knn_graph: need at least k+1 = " + std::to_string(k + 1) + " items, got " +
                    std::to_string(embeddings.size()));
  NeighborLists lists = knn_parallel(rows_view(embeddings), k, config.metric);
  NeighborGraph graph;
  graph.n = lists.n;
  graph.k = k;
  graph.neighbors = std::move(lists.indices);
  graph.distances = std::move(lists.distances);
  graph.rho.resize(graph.n);
  graph.sigma.resize(graph.n);
  graph.degenerate.resize(graph.n);
  for (std::size_t i = 0; i < graph.n; ++i) {
    RowCalibration c = calibrate_row(graph.row_distances(i));
    graph.rho[i] = c.rho;
    graph.sigma[i] = c.sigma;
    graph.degenerate[i] = c.degenerate ? 1 : 0;
  }
  return graph;
}

double WeightedGraph::weight(std::uint32_t a, std::uint32_t b) const {
  if (a > b) std::swap(a, b);
  auto it = std::lower_bound(edges.begin(), edges.end(), std::make_pair(a, b),
                             [](const WeightedEdge& e, const std::pair<std::uint32_t, std::uint32_t>& key) {
                               return std::tie(e.i, e.j) < std::tie(key.first, key.second);
                             });
  if (it == edges.end() || it->i != a || it->j != b) return 0.0;
  return it->weight;
}

WeightedGraph fuzzy_simplicial_set(const NeighborGraph& graph) {
  struct Directed {
    std::uint32_t lo, hi;
    double p;       // membership of the edge in the lo -> hi direction
    bool forward;   // true when the source row is `lo`
  };
  std::vector<Directed> directed;
  directed.reserve(graph.n * graph.k);
  for (std::size_t i = 0; i < graph.n; ++i) {
    auto nbrs = graph.row_neighbors(i);
    auto dists = graph.row_distances(i);
    for (std::size_t m = 0; m < graph.k; ++m) {
      const auto j = nbrs[m];
      if (j == i) continue;
      const double p = std::exp(-std::max(0.0, dists[m] - graph.rho[i]) / graph.sigma[i]);
      const auto src = static_cast<std::uint32_t>(i);
      directed.push_back({std::min(src, j), std::max(src, j), p, src < j});
    }
  }
  std::sort(directed.begin(), directed.end(), [](const Directed& a, const Directed& b) {
    return std::tie(a.lo, a.hi, a.forward) < std::tie(b.lo, b.hi, b.forward);
  });
  WeightedGraph out;
  out.n = graph.n;
  for (std::size_t s = 0; s < directed.size();) {
    double p = 0.0, q = 0.0;
    std::size_t e = s;
    for (; e < directed.size() && directed[e].lo == directed[s].lo && directed[e].hi == directed[s].hi; ++e)
      (directed[e].forward ? p : q) = directed[e].p;
    const double w = std::min(1.0, fuzzy_union(p, q));
    if (w > 0.0) out.edges.push_back({directed[s].lo, directed[s].hi, w});
    s = e;
  }
  return out;
}

std::optional<std::size_t> Projection2D::index_of(ItemId id) const {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

RowsView<float> rows_view(const EmbeddingSet& embeddings) {
  return {embeddings.values(), embeddings.size(), embeddings.dim()};
}

Projection2D project_embeddings(const EmbeddingSet& embeddings, const ProjectionConfig& config,
                                ViewMode view_mode) {
  NeighborGraph graph = knn_graph(embeddings, config);
  WeightedGraph weighted = fuzzy_simplicial_set(graph);
  LayoutResult layout = optimize_layout(weighted, config);
  Projection2D proj;
  proj.view_mode = view_mode;
  proj.ids.assign(embeddings.ids().begin(), embeddings.ids().end());
  proj.coords = std::move(layout.coords);
  proj.config = config;
  proj.a = layout.a;
  proj.b = layout.b;
  return proj;
}

double trustworthiness(const EmbeddingSet& embeddings, const Projection2D& projection, std::size_t k,
                       Metric metric) {
  if (!std::equal(embeddings.ids().begin(), embeddings.ids().end(), projection.ids.begin(),
                  projection.ids.end()))
    throw Error(ErrorCode::invalid_argument, "trustworthiness: projection ids differ from embedding ids");
  return trustworthiness_parallel(rows_view(embeddings), projection.coords_view(), k, metric);
}

double silhouette_score(std::span<const Point2> points, std::span<const int> labels) {
  if (points.size() != labels.size())
    throw Error(ErrorCode::invalid_argument, "silhouette: size mismatch");
  std::map<int, std::size_t> sizes;
  for (int l : labels) ++sizes[l];
  if (sizes.size() < 2) throw Error(ErrorCode::invalid_argument, "silhouette: need >= 2 labels");
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::map<int, double> sums;
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (i == j) continue;
      sums[labels[j]] += std::hypot(points[i].x - points[j].x, points[i].y - points[j].y);
    }
    const std::size_t own = sizes[labels[i]];
    if (own <= 1) continue;  // singleton clusters score 0
    const double a = sums[labels[i]] / static_cast<double>(own - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [label, size] : sizes) {
      if (label != labels[i]) b = std::min(b, sums[label] / static_cast<double>(size));
    }
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(points.size());
}

}  // namespace acervo
