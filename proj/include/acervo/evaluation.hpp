#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "acervo/catalog.hpp"
#include "acervo/embeddings.hpp"
#include "acervo/head.hpp"
#include "acervo/losses.hpp"

namespace acervo {

// Throws Error(numeric) for a zero vector, Error(invalid_argument) on length mismatch.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

// Throws Error(numeric) when either side has zero variance.
double pearson(std::span<const double> xs, std::span<const double> ys);

using PairMember = std::variant<ItemId, Vector>;

struct ScoredPair {
  PairMember left;
  PairMember right;
  double gold = 0.0;  // [0, 5]
};

struct ScoredPairSet {
  std::vector<ScoredPair> records;
};

// CSV `left_id,right_id,gold` with a header line; id-only members.
ScoredPairSet load_scored_pairs(const std::filesystem::path& path);
void save_scored_pairs(const ScoredPairSet& set, const std::filesystem::path& path);

// Pearson r between gold scores and cosines of the projected pair members.
// A null model means identity.
double sts_score(const HeadModel* model, const ScoredPairSet& pairs, const EmbeddingSet& embeddings);

struct InContextAnchor {
  ItemId anchor = 0;
  std::optional<ItemId> positive;  // paraphrase
  std::optional<ItemId> negative;  // unrelated chunk
};

// Two records per anchor, (anchor, positive, 4) then (anchor, negative, 1),
// anchors ascending. When `embeddings` is given every member must resolve.
ScoredPairSet build_in_context_sts(std::vector<InContextAnchor> anchors,
                                   const EmbeddingSet* embeddings = nullptr);

struct LabelStats {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t support = 0;  // gold count
};

struct MetricsReport {
  double accuracy = 0.0;
  double precision_selected = 0.0;
  double recall_selected = 0.0;
  std::map<std::string, LabelStats> per_label;
  std::set<std::string> selected;
  std::size_t samples = 0;
};

// Accuracy over every sample; precision/recall macro-averaged over `selected`,
// with an empty denominator counting as 0. Every selected label must occur in
// gold or predictions.
MetricsReport classification_metrics(std::span<const std::string> predictions,
                                     std::span<const std::string> gold,
                                     const std::set<std::string>& selected);

Json to_json(const MetricsReport& report);

}  // namespace acervo
