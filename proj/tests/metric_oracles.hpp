#pragma once

// Brute-force references for pearson and classification metrics.

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace metric_oracles {

// Raw-moment formula in long double, deliberately unlike the two-pass version.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  long double n = static_cast<long double>(x.size()), sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    syy += static_cast<long double>(y[i]) * y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  return static_cast<double>((n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy)));
}

struct Metrics {
  double accuracy = 0.0;
  double precision_selected = 0.0;
  double recall_selected = 0.0;
  std::map<std::string, std::pair<double, double>> per_label;  // precision, recall
};

// Full confusion matrix, then per-label ratios read off its rows and columns.
inline Metrics classification(const std::vector<std::string>& pred, const std::vector<std::string>& gold,
                              const std::set<std::string>& selected) {
  std::map<std::string, std::map<std::string, std::size_t>> confusion;  // gold -> pred -> count
  std::set<std::string> labels;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++confusion[gold[i]][pred[i]];
    labels.insert(gold[i]);
    labels.insert(pred[i]);
  }
  Metrics m;
  std::size_t correct = 0;
  for (const auto& l : labels) correct += confusion[l][l];
  m.accuracy = gold.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(gold.size());
  for (const auto& l : labels) {
    std::size_t column = 0, row = 0;
    for (const auto& g : labels) column += confusion[g][l];
    for (const auto& p : labels) row += confusion[l][p];
    const double tp = static_cast<double>(confusion[l][l]);
    m.per_label[l] = {column ? tp / static_cast<double>(column) : 0.0, row ? tp / static_cast<double>(row) : 0.0};
  }
  for (const auto& s : selected) {
    m.precision_selected += m.per_label[s].first / static_cast<double>(selected.size());
    m.recall_selected += m.per_label[s].second / static_cast<double>(selected.size());
  }
  return m;
}

struct Instance {
  std::vector<std::string> pred;
  std::vector<std::string> gold;
  std::set<std::string> selected;
};

inline Instance random_instance(std::mt19937_64& rng, std::size_t max_samples) {
  const std::size_t n = 1 + rng() % max_samples, k = 2 + rng() % 6;
  Instance inst;
  for (std::size_t i = 0; i < n; ++i) {
    inst.gold.push_back("L" + std::to_string(rng() % k));
    inst.pred.push_back(rng() % 3 == 0 ? inst.gold.back() : "L" + std::to_string(rng() % k));
  }
  std::set<std::string> seen(inst.gold.begin(), inst.gold.end());
  seen.insert(inst.pred.begin(), inst.pred.end());
  for (const auto& l : seen)
    if (rng() % 2 == 0) inst.selected.insert(l);
  if (inst.selected.empty()) inst.selected.insert(*seen.begin());
  return inst;
}

}  // namespace metric_oracles
