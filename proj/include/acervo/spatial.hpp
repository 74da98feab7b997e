#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "acervo/catalog.hpp"

namespace acervo {

struct SpatialPoint {
  double x = 0.0;
  double y = 0.0;
  ItemId id = 0;
};

// Closed rectangle.
struct Rect {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;

  bool contains(double x, double y) const { return x >= x_min && x <= x_max && y >= y_min && y <= y_max; }
};

// Static 2D kd-tree stored implicitly: the node of range [lo, hi) sits at
// (lo + hi) / 2, split axis alternates x, y by depth, ties broken by id.
class KdTree2D {
 public:
  KdTree2D() = default;
  explicit KdTree2D(std::vector<SpatialPoint> points);

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  std::size_t depth() const;
  std::span<const SpatialPoint> points() const { return nodes_; }

  // Ids inside the closed rect, ascending.
  std::vector<ItemId> range_query(const Rect& rect) const;
  // Node positions (indices into points()) within Euclidean distance r of (x, y),
  // compared as squared distances.
  std::vector<std::size_t> radius_query(double x, double y, double r) const;

 private:
  void build(std::size_t lo, std::size_t hi, int axis);
  void range(std::size_t lo, std::size_t hi, int axis, const Rect& rect, std::vector<ItemId>& out) const;
  void radius(std::size_t lo, std::size_t hi, int axis, double x, double y, double r2,
              std::vector<std::size_t>& out) const;

  std::vector<SpatialPoint> nodes_;
};

struct Viewport {
  Rect world;
  int width = 0;   // pixels
  int height = 0;  // pixels

  // Throws Error(invalid_argument) for an empty world rect or non-positive size.
  void validate() const;
  // x grows right, y grows down.
  double pixel_x(double x) const { return (x - world.x_min) / (world.x_max - world.x_min) * width; }
  double pixel_y(double y) const { return (world.y_max - y) / (world.y_max - world.y_min) * height; }
};

// Hash-ordered subsample: ids ordered by (mix64(id), id), first ceil(g n) kept.
// Result ascending. Throws for g outside [0, 1].
std::vector<ItemId> granularity_sample(std::span<const ItemId> ids, double g);

struct Cluster {
  double px = 0.0;  // centroid, pixels
  double py = 0.0;
  std::size_t count = 0;
  std::vector<ItemId> members;  // ascending
  ItemId representative = 0;    // smallest member = seed
};

struct Single {
  double px = 0.0;
  double py = 0.0;
  ItemId id = 0;
};

struct ClusterBatch {
  std::vector<Cluster> clusters;  // seed order
  std::vector<Single> singles;    // ascending id
};

inline constexpr double kDefaultRadiusPx = 24.0;

// Visible points (closed world rect), optionally restricted to `allowed`
// (ascending), are granularity-sampled, mapped to pixels and clustered
// greedily: seeds in ascending id absorb every unclustered point within
// radius_px of the seed.
ClusterBatch viewport_clusters(const KdTree2D& tree, const Viewport& viewport, double radius_px, double g,
                               std::span<const ItemId> allowed = {}, bool restrict_to_allowed = false);

}  // namespace acervo
