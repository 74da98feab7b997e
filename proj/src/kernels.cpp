#include "acervo/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "acervo/error.hpp"

namespace acervo {

template <class T>
double distance(std::span<const T> a, std::span<const T> b, Metric metric) {
  if (metric == Metric::euclidean) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
      sum += d * d;
    }
    return std::sqrt(sum);
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double x = a[i], y = b[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) return 1.0;
  return std::max(0.0, 1.0 - dot / (std::sqrt(na) * std::sqrt(nb)));
}

template double distance<float>(std::span<const float>, std::span<const float>, Metric);
template double distance<double>(std::span<const double>, std::span<const double>, Metric);

namespace {

template <class T>
void check_knn_args(const RowsView<T>& data, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::invalid_argument, "k must be positive");
  if (data.rows < k + 1)
    throw Error(ErrorCode::invalid_argument, "k-NN needs at least k+1 = " + std::to_string(k + 1) +
                                                 " items, got " + std::to_string(data.rows));
}

// One row of the k-NN graph; `scratch` holds (distance, index) pairs.
template <class T>
void knn_row(const RowsView<T>& data, std::size_t i, std::size_t k, Metric metric,
             std::vector<std::pair<double, std::uint32_t>>& scratch, std::uint32_t* out_idx,
             double* out_dist) {
  scratch.clear();
  auto xi = data.row(i);
  for (std::size_t j = 0; j < data.rows; ++j) {
    if (j == i) continue;
    scratch.emplace_back(distance(xi, data.row(j), metric), static_cast<std::uint32_t>(j));
  }
  std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k), scratch.end());
  for (std::size_t m = 0; m < k; ++m) {
    out_dist[m] = scratch[m].first;
    out_idx[m] = scratch[m].second;
  }
}

NeighborLists make_lists(std::size_t n, std::size_t k) {
  NeighborLists lists;
  lists.n = n;
  lists.k = k;
  lists.indices.resize(n * k);
  lists.distances.resize(n * k);
  return lists;
}

// Rank of every j among i's high-dimensional neighbours (1 = nearest).
void rank_row(const RowsView<float>& high, std::size_t i, Metric metric,
              std::vector<std::pair<double, std::uint32_t>>& scratch, std::vector<std::uint32_t>& rank) {
  scratch.clear();
  for (std::size_t j = 0; j < high.rows; ++j) {
    if (j == i) continue;
    scratch.emplace_back(distance(high.row(i), high.row(j), metric), static_cast<std::uint32_t>(j));
  }
  std::sort(scratch.begin(), scratch.end());
  rank.assign(high.rows, 0);
  for (std::size_t r = 0; r < scratch.size(); ++r) rank[scratch[r].second] = static_cast<std::uint32_t>(r + 1);
}

// Sum over low-dimensional neighbours j of i that are not high-dimensional
// k-neighbours of max(0, rank(i, j) - k).
double trust_row_penalty(const RowsView<float>& high, const RowsView<double>& low, std::size_t i,
                         std::size_t k, Metric metric,
                         std::vector<std::pair<double, std::uint32_t>>& scratch,
                         std::vector<std::uint32_t>& rank) {
  rank_row(high, i, metric, scratch, rank);
  scratch.clear();
  for (std::size_t j = 0; j < low.rows; ++j) {
    if (j == i) continue;
    scratch.emplace_back(distance(low.row(i), low.row(j), Metric::euclidean),
                         static_cast<std::uint32_t>(j));
  }
  std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k), scratch.end());
  double penalty = 0.0;
  for (std::size_t m = 0; m < k; ++m) {
    std::uint32_t r = rank[scratch[m].second];
    if (r > k) penalty += static_cast<double>(r - k);
  }
  return penalty;
}

void check_trust_args(const RowsView<float>& high, const RowsView<double>& low, std::size_t k) {
  if (high.rows != low.rows)
    throw Error(ErrorCode::invalid_argument, "trustworthiness: row counts differ");
  const auto n = static_cast<long long>(high.rows);
  const auto kk = static_cast<long long>(k);
  if (kk < 1 || kk >= n || 2 * n - 3 * kk - 1 <= 0)
    throw Error(ErrorCode::invalid_argument,
                "trustworthiness: k=" + std::to_string(k) + " out of range for n=" + std::to_string(n));
}

double trust_from_penalty(double penalty, std::size_t n, std::size_t k) {
  const double nn = static_cast<double>(n), kk = static_cast<double>(k);
  return 1.0 - 2.0 / (nn * kk * (2.0 * nn - 3.0 * kk - 1.0)) * penalty;
}

}  // namespace

template <class T>
NeighborLists knn_parallel(const RowsView<T>& data, std::size_t k, Metric metric) {
  check_knn_args(data, k);
  NeighborLists lists = make_lists(data.rows, k);
  const auto n = static_cast<std::ptrdiff_t>(data.rows);
#pragma omp parallel
  {
    std::vector<std::pair<double, std::uint32_t>> scratch;
    scratch.reserve(data.rows);
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto row = static_cast<std::size_t>(i);
      knn_row(data, row, k, metric, scratch, lists.indices.data() + row * k,
              lists.distances.data() + row * k);
    }
  }
  return lists;
}

template <class T>
NeighborLists knn_serial(const RowsView<T>& data, std::size_t k, Metric metric) {
  check_knn_args(data, k);
  NeighborLists lists = make_lists(data.rows, k);
  std::vector<std::pair<double, std::uint32_t>> scratch;
  for (std::size_t i = 0; i < data.rows; ++i)
    knn_row(data, i, k, metric, scratch, lists.indices.data() + i * k, lists.distances.data() + i * k);
  return lists;
}

template NeighborLists knn_parallel<float>(const RowsView<float>&, std::size_t, Metric);
template NeighborLists knn_parallel<double>(const RowsView<double>&, std::size_t, Metric);
template NeighborLists knn_serial<float>(const RowsView<float>&, std::size_t, Metric);
template NeighborLists knn_serial<double>(const RowsView<double>&, std::size_t, Metric);

double trustworthiness_parallel(const RowsView<float>& high, const RowsView<double>& low,
                                std::size_t k, Metric metric) {
  check_trust_args(high, low, k);
  std::vector<double> penalties(high.rows, 0.0);
  const auto n = static_cast<std::ptrdiff_t>(high.rows);
#pragma omp parallel
  {
    std::vector<std::pair<double, std::uint32_t>> scratch;
    std::vector<std::uint32_t> rank;
#pragma omp for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < n; ++i)
      penalties[static_cast<std::size_t>(i)] =
          trust_row_penalty(high, low, static_cast<std::size_t>(i), k, metric, scratch, rank);
  }
  // Fixed-order reduction keeps the result identical to the serial path.
  const double penalty = std::accumulate(penalties.begin(), penalties.end(), 0.0);
  return trust_from_penalty(penalty, high.rows, k);
}

double trustworthiness_serial(const RowsView<float>& high, const RowsView<double>& low,
                              std::size_t k, Metric metric) {
  check_trust_args(high, low, k);
  std::vector<std::pair<double, std::uint32_t>> scratch;
  std::vector<std::uint32_t> rank;
  double penalty = 0.0;
  for (std::size_t i = 0; i < high.rows; ++i)
    penalty += trust_row_penalty(high, low, i, k, metric, scratch, rank);
  return trust_from_penalty(penalty, high.rows, k);
}

}  // namespace acervo
