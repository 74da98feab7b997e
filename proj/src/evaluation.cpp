#include "acervo/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "acervo/error.hpp"

namespace acervo {

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error(ErrorCode::invalid_argument, "cosine: length mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (!(nu > 0.0) || !(nv > 0.0)) throw Error(ErrorCode::numeric, "cosine of a zero vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error(ErrorCode::invalid_argument, "pearson: length mismatch");
  if (xs.size() < 2) throw Error(ErrorCode::invalid_argument, "pearson needs at least 2 points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw Error(ErrorCode::numeric, "pearson undefined: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

ScoredPairSet load_scored_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open pair file " + path.string());
  ScoredPairSet set;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (line_no == 1 && line.rfind("left_id", 0) == 0)) continue;
    std::stringstream ss(line);
    std::string a, b, g;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, g, ','))
      throw Error(ErrorCode::parse, "pair file line " + std::to_string(line_no) + ": expected 3 fields");
    ScoredPair pair;
    try {
      pair.left = static_cast<ItemId>(std::stoull(a));
      pair.right = static_cast<ItemId>(std::stoull(b));
      pair.gold = std::stod(g);
    } catch (const std::exception&) {
      throw Error(ErrorCode::parse, "pair file line " + std::to_string(line_no) + ": bad number");
    }
    if (!(pair.gold >= 0.0 && pair.gold <= 5.0))
      throw Error(ErrorCode::parse, "pair file line " + std::to_string(line_no) + ": gold outside [0, 5]");
    set.records.push_back(std::move(pair));
  }
  return set;
}

void save_scored_pairs(const ScoredPairSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write pair file " + path.string());
  out << "left_id,right_id,gold\n";
  for (const auto& p : set.records) {
    if (!std::holds_alternative<ItemId>(p.left) || !std::holds_alternative<ItemId>(p.right))
      throw Error(ErrorCode::invalid_argument, "only id pairs can be written to a pair file");
    out << std::get<ItemId>(p.left) << ',' << std::get<ItemId>(p.right) << ',' << p.gold << '\n';
  }
}

namespace {

Vector resolve(const PairMember& m, const EmbeddingSet& embeddings) {
  if (const auto* id = std::get_if<ItemId>(&m)) return embeddings.row_as_double(*id);
  return std::get<Vector>(m);
}

}  // namespace

double sts_score(const HeadModel* model, const ScoredPairSet& pairs, const EmbeddingSet& embeddings) {
  std::vector<double> cosines, golds;
  for (const auto& p : pairs.records) {
    Vector u = resolve(p.left, embeddings), v = resolve(p.right, embeddings);
    if (model) {
      u = head_forward(*model, u).output;
      v = head_forward(*model, v).output;
    }
    cosines.push_back(cosine_similarity(u, v));
    golds.push_back(p.gold);
  }
  return pearson(cosines, golds);
}

ScoredPairSet build_in_context_sts(std::vector<InContextAnchor> anchors, const EmbeddingSet* embeddings) {
  std::stable_sort(anchors.begin(), anchors.end(),
                   [](const InContextAnchor& a, const InContextAnchor& b) { return a.anchor < b.anchor; });
  auto check = [&](ItemId id, ItemId anchor) {
    if (embeddings && !embeddings->index_of(id))
      throw Error(ErrorCode::not_found,
                  "in-context pair for anchor " + std::to_string(anchor) + ": no embedding for " + std::to_string(id));
  };
  ScoredPairSet set;
  for (const auto& a : anchors) {
    const std::string tag = "anchor " + std::to_string(a.anchor);
    if (!a.positive) throw Error(ErrorCode::invalid_argument, tag + " has no positive");
    if (!a.negative) throw Error(ErrorCode::invalid_argument, tag + " has no negative");
    if (*a.positive == a.anchor) throw Error(ErrorCode::invalid_argument, tag + " is its own positive");
    if (*a.negative == a.anchor) throw Error(ErrorCode::invalid_argument, tag + " is its own negative");
    check(a.anchor, a.anchor);
    check(*a.positive, a.anchor);
    check(*a.negative, a.anchor);
    set.records.push_back({a.anchor, *a.positive, 4.0});
    set.records.push_back({a.anchor, *a.negative, 1.0});
  }
  return set;
}

MetricsReport classification_metrics(std::span<const std::string> predictions, std::span<const std::string> gold,
                                     const std::set<std::string>& selected) {
  if (predictions.size() != gold.size())
    throw Error(ErrorCode::invalid_argument, "metrics: predictions and gold differ in length");
  if (gold.empty()) throw Error(ErrorCode::invalid_argument, "metrics: no samples");
  struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;
  };
  std::map<std::string, Counts> counts;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predictions[i] == gold[i]) {
      ++correct;
      ++counts[gold[i]].tp;
    } else {
      ++counts[predictions[i]].fp;
      ++counts[gold[i]].fn;
    }
  }
  for (const auto& s : selected)
    if (!counts.contains(s))
      throw Error(ErrorCode::invalid_argument, "metrics: selected label '" + s + "' is not in the label space");

  MetricsReport report;
  report.samples = gold.size();
  report.selected = selected;
  report.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
  for (const auto& [label, c] : counts) {
    LabelStats st;
    st.support = c.tp + c.fn;
    st.precision = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    st.recall = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    report.per_label[label] = st;
  }
  if (!selected.empty()) {
    for (const auto& s : selected) {
      report.precision_selected += report.per_label[s].precision;
      report.recall_selected += report.per_label[s].recall;
    }
    report.precision_selected /= static_cast<double>(selected.size());
    report.recall_selected /= static_cast<double>(selected.size());
  }
  return report;
}

Json to_json(const MetricsReport& report) {
  Json per_label = Json::object();
  for (const auto& [label, st] : report.per_label)
    per_label[label] = {{"precision", st.precision}, {"recall", st.recall}, {"support", st.support}};
  return {{"accuracy", report.accuracy},
          {"precision_selected", report.precision_selected},
          {"recall_selected", report.recall_selected},
          {"selected", report.selected},
          {"samples", report.samples},
          {"per_label", per_label}};
}

}  // namespace acervo
