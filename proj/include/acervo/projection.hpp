#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "acervo/catalog.hpp"
#include "acervo/embeddings.hpp"
#include "acervo/kernels.hpp"

namespace acervo {

enum class ViewMode { semantic_image, semantic_text, material };

std::string to_string(ViewMode mode);
ViewMode view_mode_from_string(const std::string& text);  // throws Error(invalid_argument)
std::string to_string(Metric metric);
Metric metric_from_string(const std::string& text);

struct ProjectionConfig {
  std::size_t n_neighbors = 15;
  double min_dist = 0.1;
  double spread = 1.0;
  std::size_t n_epochs = 200;
  std::size_t negative_sample_rate = 5;
  double initial_learning_rate = 1.0;
  std::uint64_t seed = 0;
  Metric metric = Metric::euclidean;

  void validate() const;
};

Json to_json(const ProjectionConfig& config);
ProjectionConfig projection_config_from_json(const Json& j);

struct RowCalibration {
  double rho = 0.0;
  double sigma = 0.0;
  double residual = 0.0;  // |sum - log2(k)| at the returned sigma
  // Target unreachable inside [1e-3, 1e3] x mean distance; sigma was clamped.
  bool degenerate = false;
};

// Smooth-kNN bandwidth: finds sigma with
//   sum_j exp(-max(0, d_j - rho) / sigma) = log2(k),  rho = d_0,
// by bisection to |residual| <= 1e-5, sigma clamped to [1e-3, 1e3] x mean(d).
RowCalibration calibrate_row(std::span<const double> distances);

struct NeighborGraph {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<std::uint32_t> neighbors;  // n x k row indices, nearest first
  std::vector<double> distances;         // n x k
  std::vector<double> rho;
  std::vector<double> sigma;
  std::vector<std::uint8_t> degenerate;

  std::span<const std::uint32_t> row_neighbors(std::size_t i) const {
    return {neighbors.data() + i * k, k};
  }
  std::span<const double> row_distances(std::size_t i) const { return {distances.data() + i * k, k}; }
};

// Exact brute-force k-NN under config.metric plus per-row calibration.
// Rows follow the embedding set order (ascending item id).
NeighborGraph knn_graph(const EmbeddingSet& embeddings, const ProjectionConfig& config);

struct WeightedEdge {
  std::uint32_t i = 0;  // i < j
  std::uint32_t j = 0;
  double weight = 0.0;  // in (0, 1]
};

struct WeightedGraph {
  std::size_t n = 0;
  std::vector<WeightedEdge> edges;  // sorted by (i, j), each undirected edge once

  double weight(std::uint32_t a, std::uint32_t b) const;  // 0 when absent
};

// Probabilistic t-conorm: p + q - p q.
inline double fuzzy_union(double p, double q) { return p + q - p * q; }

// Directed memberships exp(-max(0, d - rho_i) / sigma_i), symmetrized with
// fuzzy_union. Edges whose weight underflows to 0 are dropped.
WeightedGraph fuzzy_simplicial_set(const NeighborGraph& graph);

struct CurveFit {
  double a = 0.0;
  double b = 0.0;
  double residual = 0.0;  // sum of squared errors on the sample grid
  std::size_t iterations = 0;
  bool converged = false;
};

inline constexpr std::size_t kCurveSamples = 300;

// Least-squares fit of 1 / (1 + a d^(2b)) to the target
//   1 for d <= min_dist, exp(-(d - min_dist) / spread) otherwise,
// on d_i = 3 spread (i + 1) / 300, i = 0..299, via damped Gauss-Newton.
CurveFit fit_curve(double min_dist, double spread);

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point2&) const = default;
};

struct LayoutResult {
  std::vector<Point2> coords;
  double a = 0.0;
  double b = 0.0;
  bool spectral_init = false;
};

// Stochastic gradient layout with negative sampling. Serial and fully
// deterministic for a given seed.
LayoutResult optimize_layout(const WeightedGraph& graph, const ProjectionConfig& config);

// Initial coordinates: spectral embedding of the normalized Laplacian when the
// graph has a single component of size > 1, else uniform in [-10, 10]^2.
// Returns true in `used_spectral` when the spectral path ran.
std::vector<Point2> initial_layout(const WeightedGraph& graph, std::uint64_t seed, bool* used_spectral);

struct Projection2D {
  ViewMode view_mode = ViewMode::semantic_image;
  std::vector<ItemId> ids;      // ascending
  std::vector<Point2> coords;   // parallel to ids
  ProjectionConfig config;
  double a = 1.0;
  double b = 1.0;

  std::size_t size() const { return ids.size(); }
  std::optional<std::size_t> index_of(ItemId id) const;
  RowsView<double> coords_view() const {
    return {{reinterpret_cast<const double*>(coords.data()), coords.size() * 2}, coords.size(), 2};
  }
};

static_assert(sizeof(Point2) == 2 * sizeof(double));

// knn_graph -> fuzzy_simplicial_set -> optimize_layout.
Projection2D project_embeddings(const EmbeddingSet& embeddings, const ProjectionConfig& config,
                                ViewMode view_mode);

RowsView<float> rows_view(const EmbeddingSet& embeddings);

// Requires the projection to cover exactly the embedding ids.
double trustworthiness(const EmbeddingSet& embeddings, const Projection2D& projection, std::size_t k,
                       Metric metric = Metric::euclidean);

// Mean silhouette coefficient of `labels` in 2D (euclidean).
double silhouette_score(std::span<const Point2> points, std::span<const int> labels);

// Triangular material layout. Exactly three macro-classes, each with a vertex;
// every raw material label maps to one macro-class.
struct MaterialConfig {
  std::vector<std::pair<std::string, Point2>> vertices;
  std::map<std::string, std::string> label_to_class;

  void validate() const;
};

MaterialConfig material_config_from_json(const Json& j);
MaterialConfig load_material_config(const std::filesystem::path& path);

// Position = count-weighted barycentric mix of the macro-class vertices. Items
// with no mapped material sit at the centroid plus a per-id jitter of radius
// 0.05 x circumradius.
Projection2D material_layout(const Catalog& catalog, const MaterialConfig& config);

// Cache file: {"view_mode","config","config_hash","a","b","coords":[[id,x,y],...]}.
std::string projection_config_hash(const ProjectionConfig& config, ViewMode view,
                                   const std::string& input_digest);
Json projection_to_json(const Projection2D& projection, const std::string& config_hash);
Projection2D projection_from_json(const Json& j);
void save_projection(const Projection2D& projection, const std::string& config_hash,
                     const std::filesystem::path& path);
Projection2D load_projection(const std::filesystem::path& path, std::string* config_hash = nullptr);

}  // namespace acervo
