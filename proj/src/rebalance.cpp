#include <cmath>
#include <numeric>
#include <random>

#include "acervo/datasets.hpp"
#include "acervo/error.hpp"

namespace acervo {

const std::optional<std::string>& label_attribute(const Item& item, const std::string& attribute) {
  if (attribute == "categoria") return item.categoria;
  if (attribute == "povo") return item.povo;
  throw Error(ErrorCode::invalid_argument, "unsupported label attribute '" + attribute + "'");
}

RebalanceMode rebalance_mode_from_string(const std::string& text) {
  if (text == "filter_only") return RebalanceMode::filter_only;
  if (text == "augment") return RebalanceMode::augment;
  if (text == "filter_and_augment") return RebalanceMode::filter_and_augment;
  throw Error(ErrorCode::invalid_argument, "unknown rebalance mode '" + text + "'");
}

std::map<std::string, double> inverse_frequency_weights(const std::map<std::string, std::size_t>& counts) {
  std::map<std::string, double> weights;
  double total = 0.0;
  for (const auto& [label, n] : counts) {
    if (n == 0) throw Error(ErrorCode::invalid_argument, "class '" + label + "' has no samples");
    total += 1.0 / static_cast<double>(n);
  }
  for (const auto& [label, n] : counts)
    weights[label] = (1.0 / static_cast<double>(n)) / total * static_cast<double>(counts.size());
  return weights;
}

RebalancedDataset rebalance(const Catalog& catalog, const EmbeddingSet& embeddings,
                            const RebalanceConfig& config) {
  if (config.min_samples < 1) throw Error(ErrorCode::invalid_argument, "min_samples must be >= 1");
  std::map<std::string, std::vector<ItemId>> members;
  for (ItemId id : embeddings.ids()) {
    const Item* item = catalog.find(id);
    if (!item) continue;
    const auto& label = label_attribute(*item, config.attribute);
    if (label) members[*label].push_back(id);
  }
  if (members.empty())
    throw Error(ErrorCode::invalid_argument,
                "attribute '" + config.attribute + "' is null for every embedded item");

  std::size_t drop_below = 1;
  bool augment = true;
  switch (config.mode) {
    case RebalanceMode::filter_only:
      drop_below = config.min_samples;
      augment = false;
      break;
    case RebalanceMode::augment: break;
    case RebalanceMode::filter_and_augment: drop_below = config.filter_threshold; break;
  }

  double sigma = 0.0;
  if (config.jitter_sigma) {
    sigma = *config.jitter_sigma;
  } else {
    double norms = 0.0;
    for (std::size_t r = 0; r < embeddings.size(); ++r) {
      double s = 0.0;
      for (float v : embeddings.row(r)) s += static_cast<double>(v) * v;
      norms += std::sqrt(s);
    }
    sigma = embeddings.empty() ? 0.0 : 0.01 * norms / static_cast<double>(embeddings.size());
  }
  if (!(sigma >= 0.0)) throw Error(ErrorCode::invalid_argument, "jitter sigma must be >= 0");

  RebalancedDataset out;
  out.attribute = config.attribute;
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (const auto& [label, ids] : members) {
    if (ids.size() < drop_below) continue;
    out.selected_labels.insert(label);
    out.original_counts[label] = ids.size();
    for (ItemId id : ids) out.samples.push_back({id, label, false, {}});
    if (!augment) continue;
    for (std::size_t s = ids.size(); s < config.min_samples; ++s) {
      const ItemId source = ids[(s - ids.size()) % ids.size()];
      auto row = embeddings.row_for(source);
      Vector features(row.begin(), row.end());
      for (double& x : features) x += sigma * noise(rng);
      out.samples.push_back({source, label, true, std::move(features)});
    }
  }
  if (!out.original_counts.empty()) out.class_weights = inverse_frequency_weights(out.original_counts);
  return out;
}

ClassificationData classification_data(const RebalancedDataset& dataset) {
  ClassificationData data;
  ClassifierTarget target{dataset.attribute, {}, {}};
  std::map<std::string, int> index;
  for (const auto& label : dataset.selected_labels) {
    index[label] = static_cast<int>(target.labels.size());
    target.labels.push_back(label);
    target.class_weights.push_back(dataset.class_weights.at(label));
  }
  data.targets.push_back(std::move(target));
  for (const auto& s : dataset.samples)
    data.samples.push_back({s.id, {index.at(s.label)}, s.features, s.is_synthetic});
  return data;
}

ClassificationData multihead_data(const Catalog& catalog, const EmbeddingSet& embeddings,
                                  std::span<const std::string> attributes, std::size_t min_samples) {
  ClassificationData data;
  std::vector<std::map<std::string, int>> index(attributes.size());
  for (std::size_t h = 0; h < attributes.size(); ++h) {
    std::map<std::string, std::size_t> counts;
    for (ItemId id : embeddings.ids()) {
      const Item* item = catalog.find(id);
      if (!item) continue;
      if (const auto& label = label_attribute(*item, attributes[h])) ++counts[*label];
    }
    std::erase_if(counts, [&](const auto& kv) { return kv.second < min_samples; });
    if (counts.empty())
      throw Error(ErrorCode::invalid_argument, "no label of '" + attributes[h] + "' reaches min_samples");
    auto weights = inverse_frequency_weights(counts);
    ClassifierTarget target{attributes[h], {}, {}};
    for (const auto& [label, n] : counts) {
      index[h][label] = static_cast<int>(target.labels.size());
      target.labels.push_back(label);
      target.class_weights.push_back(weights.at(label));
    }
    data.targets.push_back(std::move(target));
  }
  for (ItemId id : embeddings.ids()) {
    const Item* item = catalog.find(id);
    if (!item) continue;
    ClassificationSample sample{id, std::vector<int>(attributes.size(), -1), {}, false};
    bool any = false;
    for (std::size_t h = 0; h < attributes.size(); ++h) {
      const auto& label = label_attribute(*item, attributes[h]);
      if (!label) continue;
      auto it = index[h].find(*label);
      if (it == index[h].end()) continue;
      sample.labels[h] = it->second;
      any = true;
    }
    if (any) data.samples.push_back(std::move(sample));
  }
  return data;
}

}  // namespace acervo
