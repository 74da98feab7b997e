#include "acervo/spatial.hpp"

#include <algorithm>
#include <cmath>

#include "acervo/error.hpp"
#include "acervo/hash.hpp"

namespace acervo {

namespace {

double coord(const SpatialPoint& p, int axis) { return axis == 0 ? p.x : p.y; }

bool less_on(const SpatialPoint& a, const SpatialPoint& b, int axis) {
  const double ca = coord(a, axis), cb = coord(b, axis);
  return ca < cb || (ca == cb && a.id < b.id);
}

}  // namespace

KdTree2D::KdTree2D(std::vector<SpatialPoint> points) : nodes_(std::move(points)) {
  for (const auto& p : nodes_)
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw Error(ErrorCode::invalid_argument, "kd-tree point " + std::to_string(p.id) + " is not finite");
  build(0, nodes_.size(), 0);
}

void KdTree2D::build(std::size_t lo, std::size_t hi, int axis) {
  if (hi - lo <= 1) return;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::nth_element(nodes_.begin() + static_cast<std::ptrdiff_t>(lo), nodes_.begin() + static_cast<std::ptrdiff_t>(mid),
                   nodes_.begin() + static_cast<std::ptrdiff_t>(hi),
                   [axis](const SpatialPoint& a, const SpatialPoint& b) { return less_on(a, b, axis); });
  build(lo, mid, 1 - axis);
  build(mid + 1, hi, 1 - axis);
}

std::size_t KdTree2D::depth() const {
  std::size_t d = 0;
  for (std::size_t n = nodes_.size(); n > 0; n /= 2) ++d;
  return d;
}

std::vector<ItemId> KdTree2D::range_query(const Rect& rect) const {
  std::vector<ItemId> out;
  range(0, nodes_.size(), 0, rect, out);
  std::sort(out.begin(), out.end());
  return out;
}

void KdTree2D::range(std::size_t lo, std::size_t hi, int axis, const Rect& rect, std::vector<ItemId>& out) const {
  if (lo >= hi) return;
  const std::size_t mid = lo + (hi - lo) / 2;
  const SpatialPoint& p = nodes_[mid];
  if (rect.contains(p.x, p.y)) out.push_back(p.id);
  const double c = coord(p, axis);
  const double qmin = axis == 0 ? rect.x_min : rect.y_min;
  const double qmax = axis == 0 ? rect.x_max : rect.y_max;
  // Left subtree holds coords <= c, right subtree coords >= c.
  if (qmin <= c) range(lo, mid, 1 - axis, rect, out);
  if (qmax >= c) range(mid + 1, hi, 1 - axis, rect, out);
}

std::vector<std::size_t> KdTree2D::radius_query(double x, double y, double r) const {
  std::vector<std::size_t> out;
  radius(0, nodes_.size(), 0, x, y, r * r, out);
  return out;
}

void KdTree2D::radius(std::size_t lo, std::size_t hi, int axis, double x, double y, double r2,
                      std::vector<std::size_t>& out) const {
  if (lo >= hi) return;
  const std::size_t mid = lo + (hi - lo) / 2;
  const SpatialPoint& p = nodes_[mid];
  const double dx = p.x - x, dy = p.y - y;
  if (dx * dx + dy * dy <= r2) out.push_back(mid);
  const double delta = (axis == 0 ? x : y) - coord(p, axis);
  const bool near_left = delta <= 0.0;
  if (near_left || delta * delta <= r2) radius(lo, mid, 1 - axis, x, y, r2, out);
  if (!near_left || delta * delta <= r2) radius(mid + 1, hi, 1 - axis, x, y, r2, out);
}

void Viewport::validate() const {
  if (!(world.x_min < world.x_max) || !(world.y_min < world.y_max))
    throw Error(ErrorCode::invalid_argument, "viewport needs x_min < x_max and y_min < y_max");
  if (width <= 0 || height <= 0) throw Error(ErrorCode::invalid_argument, "viewport pixel size must be positive");
}

std::vector<ItemId> granularity_sample(std::span<const ItemId> ids, double g) {
  if (!(g >= 0.0 && g <= 1.0)) throw Error(ErrorCode::invalid_argument, "granularity must be in [0, 1]");
  std::vector<std::pair<std::uint64_t, ItemId>> keyed;
  keyed.reserve(ids.size());
  for (ItemId id : ids) keyed.emplace_back(mix64(id), id);
  std::sort(keyed.begin(), keyed.end());
  const auto take = std::min(ids.size(), static_cast<std::size_t>(std::ceil(g * static_cast<double>(ids.size()))));
  std::vector<ItemId> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(keyed[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

ClusterBatch viewport_clusters(const KdTree2D& tree, const Viewport& viewport, double radius_px, double g,
                               std::span<const ItemId> allowed, bool restrict_to_allowed) {
  viewport.validate();
  if (!(radius_px > 0.0)) throw Error(ErrorCode::invalid_argument, "radius_px must be > 0");
  std::vector<ItemId> visible = tree.range_query(viewport.world);
  if (restrict_to_allowed) {
    std::vector<ItemId> kept;
    std::set_intersection(visible.begin(), visible.end(), allowed.begin(), allowed.end(), std::back_inserter(kept));
    visible = std::move(kept);
  }
  const std::vector<ItemId> sampled = granularity_sample(visible, g);

  std::vector<SpatialPoint> world_pos;
  world_pos.reserve(sampled.size());
  {
    // sampled is ascending; walk the tree's points once.
    std::vector<SpatialPoint> all(tree.points().begin(), tree.points().end());
    std::sort(all.begin(), all.end(), [](const SpatialPoint& a, const SpatialPoint& b) { return a.id < b.id; });
    std::size_t j = 0;
    for (ItemId id : sampled) {
      while (all[j].id != id) ++j;
      world_pos.push_back(all[j]);
    }
  }
  std::vector<SpatialPoint> pixel;
  pixel.reserve(world_pos.size());
  for (const auto& p : world_pos) pixel.push_back({viewport.pixel_x(p.x), viewport.pixel_y(p.y), p.id});

  const KdTree2D pixel_tree(pixel);
  std::vector<std::size_t> rank_of_node(pixel_tree.size());
  {
    // Map tree node -> position in `pixel` (ascending id order).
    for (std::size_t n = 0; n < pixel_tree.size(); ++n) {
      const ItemId id = pixel_tree.points()[n].id;
      rank_of_node[n] = static_cast<std::size_t>(std::lower_bound(sampled.begin(), sampled.end(), id) - sampled.begin());
    }
  }

  ClusterBatch batch;
  std::vector<std::uint8_t> taken(pixel.size(), 0);
  for (std::size_t s = 0; s < pixel.size(); ++s) {
    if (taken[s]) continue;
    std::vector<std::size_t> members;
    for (std::size_t node : pixel_tree.radius_query(pixel[s].x, pixel[s].y, radius_px)) {
      const std::size_t r = rank_of_node[node];
      if (!taken[r]) members.push_back(r);
    }
    std::sort(members.begin(), members.end());
    for (std::size_t r : members) taken[r] = 1;
    if (members.size() == 1) {
      batch.singles.push_back({pixel[s].x, pixel[s].y, pixel[s].id});
      continue;
    }
    Cluster c;
    c.count = members.size();
    for (std::size_t r : members) {
      c.px += pixel[r].x;
      c.py += pixel[r].y;
      c.members.push_back(pixel[r].id);
    }
    c.px /= static_cast<double>(c.count);
    c.py /= static_cast<double>(c.count);
    c.representative = c.members.front();
    batch.clusters.push_back(std::move(c));
  }
  return batch;
}

}  // namespace acervo
