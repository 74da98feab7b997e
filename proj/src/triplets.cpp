#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "acervo/datasets.hpp"
#include "acervo/error.hpp"

namespace acervo {

ContrastiveTripletSet build_triplets(const Catalog& catalog,
                                     std::span<const std::pair<ItemId, ItemId>> anchor_positive,
                                     std::uint64_t seed, const EmbeddingSet* pool) {
  std::vector<const Item*> candidates;
  for (const Item& item : catalog.items()) {
    if (!item.categoria) continue;
    if (pool && !pool->index_of(item.id)) continue;
    candidates.push_back(&item);
  }
  std::mt19937_64 rng(seed);
  ContrastiveTripletSet set;
  for (const auto& [anchor_id, positive_id] : anchor_positive) {
    const Item& anchor = catalog.at(anchor_id);
    if (positive_id == anchor_id)
      throw Error(ErrorCode::invalid_argument, "positive equals anchor for item " + std::to_string(anchor_id));
    if (!anchor.categoria)
      throw Error(ErrorCode::invalid_argument,
                  "anchor " + std::to_string(anchor_id) + " has no categoria to sample negatives against");
    std::vector<ItemId> eligible;
    for (const Item* c : candidates)
      if (*c->categoria != *anchor.categoria && c->id != positive_id) eligible.push_back(c->id);
    if (eligible.size() < kNegativesPerAnchor)
      throw Error(ErrorCode::invalid_argument,
                  "only " + std::to_string(eligible.size()) + " negative candidates for anchor " +
                      std::to_string(anchor_id));
    // Partial Fisher-Yates with explicit modulo draws (portable across stdlibs).
    Triplet t{anchor_id, positive_id, {}};
    for (std::size_t k = 0; k < kNegativesPerAnchor; ++k) {
      const std::size_t pick = k + static_cast<std::size_t>(rng() % (eligible.size() - k));
      std::swap(eligible[k], eligible[pick]);
      t.negatives[k] = eligible[k];
    }
    set.records.push_back(t);
  }
  return set;
}

void validate_triplets(const ContrastiveTripletSet& set, const Catalog& catalog) {
  for (const auto& t : set.records) {
    if (t.positive == t.anchor)
      throw Error(ErrorCode::invalid_argument, "triplet: positive equals anchor " + std::to_string(t.anchor));
    const Item& anchor = catalog.at(t.anchor);
    for (ItemId n : t.negatives) {
      const Item& neg = catalog.at(n);
      if (!anchor.categoria || !neg.categoria || *neg.categoria == *anchor.categoria)
        throw Error(ErrorCode::invalid_argument, "triplet for anchor " + std::to_string(t.anchor) +
                                                     ": negative " + std::to_string(n) +
                                                     " does not have a different categoria");
    }
  }
}

void save_triplets(const ContrastiveTripletSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write triplet file " + path.string());
  out << "anchor,positive";
  for (std::size_t k = 0; k < kNegativesPerAnchor; ++k) out << ",neg" << k;
  out << '\n';
  for (const auto& t : set.records) {
    out << t.anchor << ',' << t.positive;
    for (ItemId n : t.negatives) out << ',' << n;
    out << '\n';
  }
}

ContrastiveTripletSet load_triplets(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open triplet file " + path.string());
  ContrastiveTripletSet set;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("anchor", 0) == 0) continue;
    if (line.empty()) continue;
    std::vector<ItemId> fields;
    std::stringstream ss(line);
    std::string cell;
    try {
      while (std::getline(ss, cell, ',')) fields.push_back(std::stoull(cell));
    } catch (const std::exception&) {
      throw Error(ErrorCode::parse, "triplet file line " + std::to_string(line_no) + ": bad id");
    }
    if (fields.size() != 2 + kNegativesPerAnchor)
      throw Error(ErrorCode::parse, "triplet file line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(2 + kNegativesPerAnchor) + " ids");
    Triplet t{fields[0], fields[1], {}};
    std::copy(fields.begin() + 2, fields.end(), t.negatives.begin());
    set.records.push_back(t);
  }
  return set;
}

}  // namespace acervo
