#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "acervo/catalog.hpp"

namespace acervo {

// Dense per-item vectors, rows sorted by item id.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  // `values` is row-major, ids.size() x dim. Throws on shape mismatch,
  // duplicate ids or non-finite components.
  EmbeddingSet(std::size_t dim, std::vector<ItemId> ids, std::vector<float> values);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  std::span<const ItemId> ids() const { return ids_; }
  std::span<const float> values() const { return values_; }
  std::span<const float> row(std::size_t index) const {
    return {values_.data() + index * dim_, dim_};
  }
  std::optional<std::size_t> index_of(ItemId id) const;
  // Throws Error(not_found).
  std::span<const float> row_for(ItemId id) const;
  std::vector<double> row_as_double(ItemId id) const;

 private:
  std::size_t dim_ = 0;
  std::vector<ItemId> ids_;
  std::vector<float> values_;
};

// Binary format: "CEMB", version 0x01, u32 n, u32 dim, then n records of
// (u64 id, dim x f32), all little-endian.
EmbeddingSet read_embeddings(std::istream& in);
EmbeddingSet load_embeddings(const std::filesystem::path& path);
// Additionally rejects ids that are not in the catalog.
EmbeddingSet load_embeddings(const std::filesystem::path& path, const Catalog& catalog);

void write_embeddings(const EmbeddingSet& set, std::ostream& out);
void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);

}  // namespace acervo
