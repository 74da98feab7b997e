#include "acervo/embeddings.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "acervo/error.hpp"

namespace acervo {

namespace {

static_assert(std::endian::native == std::endian::little,
              "embedding I/O assumes a little-endian host");

constexpr char kMagic[4] = {'C', 'E', 'M', 'B'};
constexpr unsigned char kVersion = 0x01;

template <class T>
bool read_pod(std::istream& in, T& value) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&value), sizeof(T)));
}

template <class T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

}  // namespace

EmbeddingSet::EmbeddingSet(std::size_t dim, std::vector<ItemId> ids, std::vector<float> values)
    : dim_(dim) {
  if (dim == 0) throw Error(ErrorCode::invalid_argument, "embedding dim must be positive");
  if (values.size() != ids.size() * dim)
    throw Error(ErrorCode::invalid_argument, "embedding payload does not match n x dim");
  for (std::size_t r = 0; r < ids.size(); ++r) {
    for (std::size_t c = 0; c < dim; ++c) {
      if (!std::isfinite(values[r * dim + c]))
        throw Error(ErrorCode::numeric,
                    "non-finite embedding component for item " + std::to_string(ids[r]));
    }
  }
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  ids_.reserve(ids.size());
  values_.reserve(values.size());
  for (std::size_t r : order) {
    if (!ids_.empty() && ids_.back() == ids[r])
      throw Error(ErrorCode::invalid_argument,
                  "duplicate embedding row for item " + std::to_string(ids[r]));
    ids_.push_back(ids[r]);
    values_.insert(values_.end(), values.begin() + static_cast<std::ptrdiff_t>(r * dim),
                   values.begin() + static_cast<std::ptrdiff_t>((r + 1) * dim));
  }
}

std::optional<std::size_t> EmbeddingSet::index_of(ItemId id) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - ids_.begin());
}

std::span<const float> EmbeddingSet::row_for(ItemId id) const {
  auto index = index_of(id);
  if (!index) throw Error(ErrorCode::not_found, "no embedding for item " + std::to_string(id));
  return row(*index);
}

std::vector<double> EmbeddingSet::row_as_double(ItemId id) const {
  auto r = row_for(id);
  return {r.begin(), r.end()};
}

EmbeddingSet read_embeddings(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw Error(ErrorCode::parse, "embedding file magic mismatch (expected CEMB)");
  unsigned char version = 0;
  if (!read_pod(in, version)) throw Error(ErrorCode::parse, "embedding file truncated in header");
  if (version != kVersion)
    throw Error(ErrorCode::parse, "unsupported embedding file version " + std::to_string(version));
  std::uint32_t n = 0, dim = 0;
  if (!read_pod(in, n) || !read_pod(in, dim))
    throw Error(ErrorCode::parse, "embedding file truncated in header");
  if (dim == 0) throw Error(ErrorCode::parse, "embedding file declares dim 0");

  std::vector<ItemId> ids(n);
  std::vector<float> values(static_cast<std::size_t>(n) * dim);
  for (std::uint32_t r = 0; r < n; ++r) {
    std::uint64_t id = 0;
    if (!read_pod(in, id) ||
        !in.read(reinterpret_cast<char*>(values.data() + static_cast<std::size_t>(r) * dim),
                 static_cast<std::streamsize>(dim * sizeof(float))))
      throw Error(ErrorCode::parse, "embedding payload truncated at record " + std::to_string(r) +
                                        " of " + std::to_string(n));
    ids[r] = id;
    for (std::uint32_t c = 0; c < dim; ++c) {
      if (!std::isfinite(values[static_cast<std::size_t>(r) * dim + c]))
        throw Error(ErrorCode::numeric,
                    "non-finite embedding component for item " + std::to_string(id));
    }
  }
  return EmbeddingSet(dim, std::move(ids), std::move(values));
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open embedding file " + path.string());
  return read_embeddings(in);
}

EmbeddingSet load_embeddings(const std::filesystem::path& path, const Catalog& catalog) {
  EmbeddingSet set = load_embeddings(path);
  for (ItemId id : set.ids()) {
    if (!catalog.contains(id))
      throw Error(ErrorCode::not_found,
                  "embedding row for unknown item id " + std::to_string(id));
  }
  return set;
}

void write_embeddings(const EmbeddingSet& set, std::ostream& out) {
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint32_t>(set.size()));
  write_pod(out, static_cast<std::uint32_t>(set.dim()));
  for (std::size_t r = 0; r < set.size(); ++r) {
    write_pod(out, static_cast<std::uint64_t>(set.ids()[r]));
    auto row = set.row(r);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
}

void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write embedding file " + path.string());
  write_embeddings(set, out);
}

}  // namespace acervo
