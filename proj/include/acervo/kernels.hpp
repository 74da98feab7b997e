#pragma once

// Data-parallel kernels. Each has an OpenMP version and a serial reference;
// both produce bit-identical results (rows are independent, no cross-thread
// reductions).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace acervo {

enum class Metric { euclidean, cosine };

// Row-major n x dim view.
template <class T>
struct RowsView {
  std::span<const T> values;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::span<const T> row(std::size_t i) const { return values.subspan(i * cols, cols); }
};

template <class T>
double distance(std::span<const T> a, std::span<const T> b, Metric metric);

// k nearest neighbours of every row, self excluded, ties by row index.
struct NeighborLists {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<std::uint32_t> indices;  // n x k
  std::vector<double> distances;       // n x k, ascending per row
};

template <class T>
NeighborLists knn_parallel(const RowsView<T>& data, std::size_t k, Metric metric);
template <class T>
NeighborLists knn_serial(const RowsView<T>& data, std::size_t k, Metric metric);

// Trustworthiness of `low` as an embedding of `high`, in [0, 1].
// Requires 1 <= k and 2n - 3k - 1 > 0.
double trustworthiness_parallel(const RowsView<float>& high, const RowsView<double>& low,
                                std::size_t k, Metric metric);
double trustworthiness_serial(const RowsView<float>& high, const RowsView<double>& low,
                              std::size_t k, Metric metric);

}  // namespace acervo
