#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "acervo/error.hpp"
#include "acervo/projection.hpp"

namespace acervo {

namespace {

constexpr double kInitBox = 10.0;
constexpr double kGradClip = 4.0;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  // 53 random bits -> [0, 1); avoids implementation-defined distributions.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

struct Csr {
  std::vector<std::size_t> offsets;
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;
};

Csr symmetric_csr(const WeightedGraph& graph) {
  Csr csr;
  csr.offsets.assign(graph.n + 1, 0);
  for (const auto& e : graph.edges) {
    ++csr.offsets[e.i + 1];
    ++csr.offsets[e.j + 1];
  }
  std::partial_sum(csr.offsets.begin(), csr.offsets.end(), csr.offsets.begin());
  csr.cols.resize(csr.offsets.back());
  csr.vals.resize(csr.offsets.back());
  std::vector<std::size_t> fill(csr.offsets.begin(), csr.offsets.end() - 1);
  for (const auto& e : graph.edges) {
    csr.cols[fill[e.i]] = e.j;
    csr.vals[fill[e.i]++] = e.weight;
    csr.cols[fill[e.j]] = e.i;
    csr.vals[fill[e.j]++] = e.weight;
  }
  return csr;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

bool normalize(std::vector<double>& v) {
  const double n = std::sqrt(dot(v, v));
  if (!(n > 0.0)) return false;
  for (double& x : v) x /= n;
  return true;
}

// Two leading non-trivial eigenvectors of D^-1/2 W D^-1/2 (equivalently the
// smallest of the normalized Laplacian) by deflated subspace iteration on the
// shifted operator (I + M) / 2, whose spectrum lies in [0, 1].
bool spectral_coords(const WeightedGraph& graph, std::mt19937_64& rng, std::vector<Point2>& out) {
  const std::size_t n = graph.n;
  Csr csr = symmetric_csr(graph);
  std::vector<double> inv_sqrt_deg(n, 0.0), trivial(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t p = csr.offsets[i]; p < csr.offsets[i + 1]; ++p) d += csr.vals[p];
    if (d > 0.0) {
      inv_sqrt_deg[i] = 1.0 / std::sqrt(d);
      trivial[i] = std::sqrt(d);
    }
  }
  if (!normalize(trivial)) return false;

  auto apply = [&](const std::vector<double>& v, std::vector<double>& out_v) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t p = csr.offsets[i]; p < csr.offsets[i + 1]; ++p)
        s += csr.vals[p] * inv_sqrt_deg[csr.cols[p]] * v[csr.cols[p]];
      out_v[i] = 0.5 * (v[i] + inv_sqrt_deg[i] * s);
    }
  };

  std::vector<double> v1(n), v2(n), t1(n), t2(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool connected = inv_sqrt_deg[i] > 0.0;
    v1[i] = connected ? uniform(rng, -1.0, 1.0) : 0.0;
    v2[i] = connected ? uniform(rng, -1.0, 1.0) : 0.0;
  }
  auto orthonormalize = [&](std::vector<double>& a, std::vector<double>& b) {
    axpy(-dot(a, trivial), trivial, a);
    if (!normalize(a)) return false;
    axpy(-dot(b, trivial), trivial, b);
    axpy(-dot(b, a), a, b);
    return normalize(b);
  };
  if (!orthonormalize(v1, v2)) return false;

  constexpr int kMaxIterations = 1000;
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    apply(v1, t1);
    apply(v2, t2);
    if (!orthonormalize(t1, t2)) return false;
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      change = std::max({change, std::abs(t1[i] - v1[i]), std::abs(t2[i] - v2[i])});
    v1.swap(t1);
    v2.swap(t2);
    if (change < 1e-10) break;
  }

  double max_abs = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_abs = std::max({max_abs, std::abs(v1[i]), std::abs(v2[i])});
  if (!(max_abs > 0.0)) return false;
  const double scale = kInitBox / max_abs;
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (inv_sqrt_deg[i] > 0.0) {
      out[i] = {v1[i] * scale + uniform(rng, -1e-4, 1e-4), v2[i] * scale + uniform(rng, -1e-4, 1e-4)};
    } else {
      out[i] = {uniform(rng, -kInitBox, kInitBox), uniform(rng, -kInitBox, kInitBox)};
    }
  }
  return true;
}

}  // namespace

std::vector<Point2> initial_layout(const WeightedGraph& graph, std::uint64_t seed, bool* used_spectral) {
  std::mt19937_64 rng(seed ^ 0x5eed5eed5eedULL);
  if (used_spectral) *used_spectral = false;

  std::vector<std::size_t> parent(graph.n);
  std::iota(parent.begin(), parent.end(), 0);
  for (const auto& e : graph.edges) parent[find_root(parent, e.i)] = find_root(parent, e.j);
  std::vector<std::size_t> size(graph.n, 0);
  for (std::size_t i = 0; i < graph.n; ++i) ++size[find_root(parent, i)];
  const auto big = std::count_if(size.begin(), size.end(), [](std::size_t s) { return s > 1; });
  const auto largest = size.empty() ? 0 : *std::max_element(size.begin(), size.end());

  std::vector<Point2> coords;
  if (big == 1 && largest >= 4) {
    std::mt19937_64 spectral_rng(seed ^ 0x5bec7ULL);
    if (spectral_coords(graph, spectral_rng, coords)) {
      if (used_spectral) *used_spectral = true;
      return coords;
    }
  }
  coords.resize(graph.n);
  for (auto& p : coords) p = {uniform(rng, -kInitBox, kInitBox), uniform(rng, -kInitBox, kInitBox)};
  return coords;
}

LayoutResult optimize_layout(const WeightedGraph& graph, const ProjectionConfig& config) {
  config.validate();
  const CurveFit curve = fit_curve(config.min_dist, config.spread);
  const double a = curve.a, b = curve.b;

  LayoutResult result;
  result.a = a;
  result.b = b;
  result.coords = initial_layout(graph, config.seed, &result.spectral_init);
  if (graph.n == 0) return result;

  // Edge e is sampled at every epoch divisible by ceil(1 / w_e).
  std::vector<std::size_t> period(graph.edges.size());
  for (std::size_t e = 0; e < graph.edges.size(); ++e)
    period[e] = static_cast<std::size_t>(std::ceil(1.0 / graph.edges[e].weight));

  auto clip = [](double g) { return std::clamp(g, -kGradClip, kGradClip); };
  auto& y = result.coords;
  const std::size_t n = graph.n;
  std::mt19937_64 rng(config.seed ^ 0x1a7007ULL);

  auto attract = [&](std::uint32_t head, std::uint32_t tail, double alpha) {
    const double dx = y[head].x - y[tail].x, dy = y[head].y - y[tail].y;
    const double d2 = dx * dx + dy * dy;
    if (!(d2 > 0.0)) return;
    const double coeff = -2.0 * a * b * std::pow(d2, b - 1.0) / (a * std::pow(d2, b) + 1.0);
    const double gx = clip(coeff * dx) * alpha, gy = clip(coeff * dy) * alpha;
    y[head].x += gx;
    y[head].y += gy;
    y[tail].x -= gx;
    y[tail].y -= gy;
  };
  auto repel = [&](std::uint32_t head, std::size_t other, double alpha) {
    const double dx = y[head].x - y[other].x, dy = y[head].y - y[other].y;
    const double d2 = dx * dx + dy * dy;
    if (!(d2 > 0.0)) return;
    const double coeff = 2.0 * b / ((0.001 + d2) * (a * std::pow(d2, b) + 1.0));
    y[head].x += clip(coeff * dx) * alpha;
    y[head].y += clip(coeff * dy) * alpha;
  };

  for (std::size_t epoch = 0; epoch < config.n_epochs; ++epoch) {
    const double alpha = config.initial_learning_rate *
                         (1.0 - static_cast<double>(epoch) / static_cast<double>(config.n_epochs));
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
      if (epoch % period[e] != 0) continue;
      const auto& edge = graph.edges[e];
      for (int dir = 0; dir < 2; ++dir) {
        const std::uint32_t head = dir == 0 ? edge.i : edge.j;
        const std::uint32_t tail = dir == 0 ? edge.j : edge.i;
        attract(head, tail, alpha);
        for (std::size_t s = 0; s < config.negative_sample_rate; ++s) {
          const std::size_t other = static_cast<std::size_t>(rng() % n);
          if (other == head) continue;
          repel(head, other, alpha);
        }
      }
    }
  }
  for (const auto& p : y) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw Error(ErrorCode::numeric, "optimize_layout produced a non-finite coordinate");
  }
  return result;
}

}  // namespace acervo
