#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "acervo/catalog.hpp"
#include "acervo/embeddings.hpp"
#include "acervo/losses.hpp"

namespace acervo {

// ---- supervised contrastive triplets --------------------------------------

struct Triplet {
  ItemId anchor = 0;
  ItemId positive = 0;
  std::array<ItemId, kNegativesPerAnchor> negatives{};
};

struct ContrastiveTripletSet {
  std::vector<Triplet> records;
};

// For each (anchor, positive) pair, samples kNegativesPerAnchor distinct
// negatives among items whose `categoria` is set and differs from the
// anchor's. When `pool` is given, negatives are restricted to its ids.
ContrastiveTripletSet build_triplets(const Catalog& catalog,
                                     std::span<const std::pair<ItemId, ItemId>> anchor_positive,
                                     std::uint64_t seed, const EmbeddingSet* pool = nullptr);

// Checks positive != anchor and the negative categoria rule.
void validate_triplets(const ContrastiveTripletSet& set, const Catalog& catalog);

// CSV: anchor,positive,neg0,...,neg9 with a header line.
void save_triplets(const ContrastiveTripletSet& set, const std::filesystem::path& path);
ContrastiveTripletSet load_triplets(const std::filesystem::path& path);

// ---- class rebalancing -----------------------------------------------------

enum class RebalanceMode {
  filter_only,         // drop labels below min_samples
  augment,             // keep every label, oversample up to min_samples
  filter_and_augment,  // drop labels below filter_threshold, oversample the rest
};

RebalanceMode rebalance_mode_from_string(const std::string& text);

struct RebalanceConfig {
  std::string attribute = "categoria";  // "categoria" or "povo"
  RebalanceMode mode = RebalanceMode::filter_and_augment;
  std::size_t min_samples = 20;
  std::size_t filter_threshold = 5;    // filter_and_augment only
  std::optional<double> jitter_sigma;  // default 0.01 x mean row norm
  std::uint64_t seed = 0;
};

struct RebalancedSample {
  ItemId id = 0;  // source item (synthetic rows copy their source id)
  std::string label;
  bool is_synthetic = false;
  Vector features;  // synthetic rows only
};

struct RebalancedDataset {
  std::string attribute;
  std::set<std::string> selected_labels;
  std::vector<RebalancedSample> samples;
  std::map<std::string, double> class_weights;
  std::map<std::string, std::size_t> original_counts;  // retained labels
};

// w_c proportional to 1 / n_c, normalized so the weights sum to |counts|.
std::map<std::string, double> inverse_frequency_weights(const std::map<std::string, std::size_t>& counts);

// Considers items that have both an embedding and the attribute.
RebalancedDataset rebalance(const Catalog& catalog, const EmbeddingSet& embeddings,
                            const RebalanceConfig& config);

// ---- classification training data ------------------------------------------

struct ClassifierTarget {
  std::string name;
  std::vector<std::string> labels;
  std::vector<double> class_weights;  // parallel to labels
};

struct ClassificationSample {
  ItemId id = 0;
  std::vector<int> labels;  // per target, -1 = unlabelled
  Vector features;          // empty -> use the item's embedding
  bool is_synthetic = false;
};

struct ClassificationData {
  std::vector<ClassifierTarget> targets;
  std::vector<ClassificationSample> samples;
};

ClassificationData classification_data(const RebalancedDataset& dataset);

// One target per attribute; labels with fewer than min_samples items are
// treated as unlabelled for that head. Weights use inverse frequency.
ClassificationData multihead_data(const Catalog& catalog, const EmbeddingSet& embeddings,
                                  std::span<const std::string> attributes, std::size_t min_samples);

// Label accessor for "categoria" / "povo".
const std::optional<std::string>& label_attribute(const Item& item, const std::string& attribute);

}  // namespace acervo
