#include "acervo/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <set>

#include "acervo/error.hpp"
#include "acervo/hash.hpp"
#include "acervo/losses.hpp"

namespace acervo {

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::nt_xent: return "nt_xent";
    case Regime::info_nce: return "info_nce";
    case Regime::classification: return "classification";
  }
  return "unknown";
}

Regime regime_from_string(const std::string& text) {
  if (text == "nt_xent") return Regime::nt_xent;
  if (text == "info_nce") return Regime::info_nce;
  if (text == "classification") return Regime::classification;
  throw Error(ErrorCode::invalid_argument, "unknown regime '" + text + "'");
}

void TrainingConfig::validate() const {
  auto bad = [](const std::string& m) { return Error(ErrorCode::invalid_argument, "training config: " + m); };
  if (!(temperature > 0.0)) throw bad("temperature must be > 0");
  if (!(learning_rate > 0.0)) throw bad("learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) throw bad("weight_decay must be >= 0");
  if (epochs == 0) throw bad("epochs must be >= 1");
  if (batch_size == 0) throw bad("batch_size must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw bad("dropout_rate must be in [0, 1)");
  if (!head_weights.empty()) {
    double sum = 0.0;
    for (const auto& [name, w] : head_weights) {
      if (!(w >= 0.0)) throw bad("head weight for '" + name + "' must be >= 0");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw bad("head weights must sum to 1");
  }
}

Json to_json(const TrainingConfig& c) {
  return {{"temperature", c.temperature},   {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay}, {"epochs", c.epochs},
          {"batch_size", c.batch_size},     {"head_weights", c.head_weights},
          {"dropout_rate", c.dropout_rate}, {"seed", c.seed},
          {"early_stop_patience", c.early_stop_patience}};
}

std::string training_config_hash(const TrainingConfig& config, Regime regime) {
  Json j = {{"config", to_json(config)}, {"regime", to_string(regime)}};
  return hex64(fnv1a64(j.dump()));
}

namespace {

void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[static_cast<std::size_t>(rng() % i)]);
}

template <class T>
void shuffle_items(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[static_cast<std::size_t>(rng() % i)]);
}

void sgd_step(HeadModel& model, const HeadModel& grad, double lr, double weight_decay) {
  auto params = model.parameters();
  auto grads = grad.parameters();
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      double& p = params[b][i];
      p -= lr * grads[b][i];
      p -= lr * weight_decay * p;
    }
  }
}

// Splits [0, n) into consecutive batches; a trailing batch smaller than
// `min_size` is merged into the previous one.
std::vector<std::pair<std::size_t, std::size_t>> batches(std::size_t n, std::size_t size, std::size_t min_size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t s = 0; s < n; s += size) out.emplace_back(s, std::min(n, s + size));
  if (out.size() > 1 && out.back().second - out.back().first < min_size) {
    out[out.size() - 2].second = out.back().second;
    out.pop_back();
  }
  return out;
}

Vector features_of(const EmbeddingSet& embeddings, ItemId id) { return embeddings.row_as_double(id); }

std::vector<TripletInputs> triplet_inputs(const EmbeddingSet& embeddings, std::span<const Triplet> ts) {
  std::vector<TripletInputs> out;
  out.reserve(ts.size());
  for (const auto& t : ts) {
    TripletInputs in{features_of(embeddings, t.anchor), features_of(embeddings, t.positive), {}};
    for (ItemId n : t.negatives) in.negatives.push_back(features_of(embeddings, n));
    out.push_back(std::move(in));
  }
  return out;
}

Vector sample_features(const EmbeddingSet& embeddings, const ClassificationSample& s) {
  return s.features.empty() ? features_of(embeddings, s.id) : s.features;
}

std::vector<ClassifierTargets> batch_targets(const ClassificationData& data,
                                             std::span<const ClassificationSample* const> samples) {
  std::vector<ClassifierTargets> targets;
  for (std::size_t h = 0; h < data.targets.size(); ++h) {
    ClassifierTargets t{data.targets[h].name, {}, data.targets[h].class_weights};
    for (const auto* s : samples) t.labels.push_back(s->labels[h]);
    targets.push_back(std::move(t));
  }
  return targets;
}

std::map<std::string, double> effective_head_weights(const TrainingConfig& config, const ClassificationData& data) {
  if (!config.head_weights.empty()) return config.head_weights;
  std::map<std::string, double> w;
  for (const auto& t : data.targets) w[t.name] = 1.0 / static_cast<double>(data.targets.size());
  return w;
}

void check_loss(double loss, std::size_t epoch) {
  if (!std::isfinite(loss))
    throw Error(ErrorCode::numeric, "non-finite training loss at epoch " + std::to_string(epoch));
}

double cosine(const Vector& u, const Vector& v) {
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (!(nu > 0.0) || !(nv > 0.0)) return 0.0;
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

// Regime-specific pieces behind a common epoch loop.
struct RegimeRunner {
  virtual ~RegimeRunner() = default;
  virtual std::size_t train_size() const = 0;
  // Mean loss of one SGD pass over the shuffled training set.
  virtual double train_epoch(HeadModel& model, std::mt19937_64& rng, std::size_t epoch) = 0;
  virtual double validation_loss(const HeadModel& model) const = 0;
  virtual std::map<std::string, double> metrics(const HeadModel& model) const = 0;
};

std::set<ItemId> as_set(const std::vector<ItemId>& v) { return {v.begin(), v.end()}; }

class NtXentRunner final : public RegimeRunner {
 public:
  NtXentRunner(const TrainingConfig& c, const NtXentData& data, const EmbeddingSet& e, const DataSplit& split)
      : config_(c), embeddings_(e) {
    auto train = as_set(split.train), val = as_set(split.validation);
    for (ItemId id : data.ids) {
      if (train.contains(id)) train_.push_back(features_of(e, id));
      if (val.contains(id)) val_.push_back(features_of(e, id));
    }
    if (train_.size() < 2 || val_.size() < 2)
      throw Error(ErrorCode::invalid_argument, "nt_xent needs >= 2 items in train and validation splits");
    std::mt19937_64 rng(c.seed ^ 0x7a1dULL);
    for (std::size_t i = 0; i < 2 * val_.size(); ++i)
      val_masks_.push_back(make_dropout_mask(e.dim(), c.dropout_rate, rng));
  }

  std::size_t train_size() const override { return train_.size(); }

  double train_epoch(HeadModel& model, std::mt19937_64& rng, std::size_t epoch) override {
    std::vector<std::size_t> order(train_.size());
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    double total = 0.0;
    for (auto [s, e] : batches(order.size(), config_.batch_size, 2)) {
      std::vector<Vector> inputs;
      std::vector<DropoutMask> masks;
      for (std::size_t i = s; i < e; ++i) {
        inputs.push_back(train_[order[i]]);
        masks.push_back(make_dropout_mask(embeddings_.dim(), config_.dropout_rate, rng));
        masks.push_back(make_dropout_mask(embeddings_.dim(), config_.dropout_rate, rng));
      }
      ParamLoss pl = nt_xent_batch(model, inputs, masks, config_.temperature);
      check_loss(pl.loss, epoch);
      total += pl.loss * static_cast<double>(e - s);
      sgd_step(model, pl.grad, config_.learning_rate, config_.weight_decay);
    }
    return total / static_cast<double>(train_.size());
  }

  double validation_loss(const HeadModel& model) const override {
    double total = 0.0;
    for (auto [s, e] : batches(val_.size(), config_.batch_size, 2)) {
      std::span<const Vector> inputs(val_.data() + s, e - s);
      std::span<const DropoutMask> masks(val_masks_.data() + 2 * s, 2 * (e - s));
      total += nt_xent_batch(model, inputs, masks, config_.temperature).loss * static_cast<double>(e - s);
    }
    return total / static_cast<double>(val_.size());
  }

  std::map<std::string, double> metrics(const HeadModel& model) const override {
    double sum = 0.0;
    for (std::size_t i = 0; i < val_.size(); ++i) {
      auto a = head_forward(model, val_[i], &val_masks_[2 * i]).output;
      auto b = head_forward(model, val_[i], &val_masks_[2 * i + 1]).output;
      sum += cosine(a, b);
    }
    return {{"val_pos_cos", sum / static_cast<double>(val_.size())}};
  }

 private:
  const TrainingConfig& config_;
  const EmbeddingSet& embeddings_;
  std::vector<Vector> train_, val_;
  std::vector<DropoutMask> val_masks_;
};

class InfoNceRunner final : public RegimeRunner {
 public:
  InfoNceRunner(const TrainingConfig& c, const ContrastiveTripletSet& data, const EmbeddingSet& e,
                const DataSplit& split)
      : config_(c) {
    auto train = as_set(split.train), val = as_set(split.validation);
    std::vector<Triplet> tr, va;
    for (const auto& t : data.records) {
      if (train.contains(t.anchor)) tr.push_back(t);
      if (val.contains(t.anchor)) va.push_back(t);
    }
    if (tr.empty() || va.empty())
      throw Error(ErrorCode::invalid_argument, "info_nce needs triplets in train and validation splits");
    train_ = triplet_inputs(e, tr);
    val_ = triplet_inputs(e, va);
  }

  std::size_t train_size() const override { return train_.size(); }

  double train_epoch(HeadModel& model, std::mt19937_64& rng, std::size_t epoch) override {
    std::vector<std::size_t> order(train_.size());
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    double total = 0.0;
    for (auto [s, e] : batches(order.size(), config_.batch_size, 1)) {
      std::vector<TripletInputs> batch;
      for (std::size_t i = s; i < e; ++i) batch.push_back(train_[order[i]]);
      ParamLoss pl = info_nce_batch(model, batch, config_.temperature);
      check_loss(pl.loss, epoch);
      total += pl.loss * static_cast<double>(e - s);
      sgd_step(model, pl.grad, config_.learning_rate, config_.weight_decay);
    }
    return total / static_cast<double>(train_.size());
  }

  double validation_loss(const HeadModel& model) const override {
    return info_nce_batch(model, val_, config_.temperature).loss;
  }

  std::map<std::string, double> metrics(const HeadModel& model) const override {
    auto mean_cos = [&](const std::vector<TripletInputs>& set) {
      double sum = 0.0;
      for (const auto& t : set)
        sum += cosine(head_forward(model, t.anchor).output, head_forward(model, t.positive).output);
      return sum / static_cast<double>(set.size());
    };
    return {{"train_pos_cos", mean_cos(train_)}, {"val_pos_cos", mean_cos(val_)}};
  }

 private:
  const TrainingConfig& config_;
  std::vector<TripletInputs> train_, val_;
};

class ClassificationRunner final : public RegimeRunner {
 public:
  ClassificationRunner(const TrainingConfig& c, const ClassificationData& data, const EmbeddingSet& e,
                       const DataSplit& split)
      : config_(c), data_(data), embeddings_(e), head_weights_(effective_head_weights(c, data)) {
    auto train = as_set(split.train), val = as_set(split.validation);
    for (const auto& s : data.samples) {
      if (s.labels.size() != data.targets.size())
        throw Error(ErrorCode::invalid_argument, "classification sample label count != target count");
      // Synthetic rows train only; they never reach validation.
      if (train.contains(s.id)) train_.push_back(&s);
      else if (!s.is_synthetic && val.contains(s.id)) val_.push_back(&s);
    }
    if (train_.empty() || val_.empty())
      throw Error(ErrorCode::invalid_argument, "classification needs samples in train and validation splits");
    for (const auto* s : train_) train_x_.push_back(sample_features(e, *s));
    for (const auto* s : val_) val_x_.push_back(sample_features(e, *s));
  }

  std::size_t train_size() const override { return train_.size(); }

  double train_epoch(HeadModel& model, std::mt19937_64& rng, std::size_t epoch) override {
    std::vector<std::size_t> order(train_.size());
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    double total = 0.0;
    for (auto [s, e] : batches(order.size(), config_.batch_size, 1)) {
      std::vector<Vector> inputs;
      std::vector<const ClassificationSample*> samples;
      std::vector<DropoutMask> masks;
      for (std::size_t i = s; i < e; ++i) {
        inputs.push_back(train_x_[order[i]]);
        samples.push_back(train_[order[i]]);
        if (config_.dropout_rate > 0.0)
          masks.push_back(make_dropout_mask(embeddings_.dim(), config_.dropout_rate, rng));
      }
      auto targets = batch_targets(data_, samples);
      ParamLoss pl = classification_batch(model, inputs, targets, head_weights_, masks);
      check_loss(pl.loss, epoch);
      total += pl.loss * static_cast<double>(e - s);
      sgd_step(model, pl.grad, config_.learning_rate, config_.weight_decay);
    }
    return total / static_cast<double>(train_.size());
  }

  double validation_loss(const HeadModel& model) const override {
    auto targets = batch_targets(data_, val_);
    return classification_batch(model, val_x_, targets, head_weights_).loss;
  }

  std::map<std::string, double> metrics(const HeadModel& model) const override {
    std::map<std::string, double> out;
    for (std::size_t h = 0; h < data_.targets.size(); ++h) {
      const auto* classifier = model.classifier(data_.targets[h].name);
      std::size_t c = static_cast<std::size_t>(classifier - model.classifiers.data());
      auto accuracy = [&](const std::vector<const ClassificationSample*>& samples, const std::vector<Vector>& xs) {
        std::size_t labelled = 0, correct = 0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
          const int y = samples[i]->labels[h];
          if (y < 0) continue;
          ++labelled;
          auto logits = head_forward(model, xs[i]).logits[c];
          auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
          if (best == y) ++correct;
        }
        return labelled ? static_cast<double>(correct) / static_cast<double>(labelled) : 0.0;
      };
      out["train_accuracy_" + data_.targets[h].name] = accuracy(train_, train_x_);
      out["val_accuracy_" + data_.targets[h].name] = accuracy(val_, val_x_);
    }
    return out;
  }

 private:
  const TrainingConfig& config_;
  const ClassificationData& data_;
  const EmbeddingSet& embeddings_;
  std::map<std::string, double> head_weights_;
  std::vector<const ClassificationSample*> train_, val_;
  std::vector<Vector> train_x_, val_x_;
};

std::vector<ItemId> split_keys(const TrainingData& data) {
  std::set<ItemId> keys;
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, NtXentData>) keys.insert(d.ids.begin(), d.ids.end());
        else if constexpr (std::is_same_v<T, ContrastiveTripletSet>)
          for (const auto& t : d.records) keys.insert(t.anchor);
        else
          for (const auto& s : d.samples) keys.insert(s.id);
      },
      data);
  return {keys.begin(), keys.end()};
}

}  // namespace

DataSplit split_ids(std::vector<ItemId> ids, std::uint64_t seed) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::mt19937_64 rng(seed ^ 0x59117ULL);
  shuffle_items(ids, rng);
  const std::size_t n = ids.size();
  const std::size_t n_val = n >= 3 ? std::max<std::size_t>(1, (n + 5) / 10) : 0;
  const std::size_t n_test = n >= 3 ? (n + 5) / 10 : 0;
  DataSplit split;
  split.validation.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_val),
                    ids.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  split.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), ids.end());
  for (auto* part : {&split.train, &split.validation, &split.test}) std::sort(part->begin(), part->end());
  return split;
}

TrainingResult train_head(const TrainingConfig& config, Regime regime, const TrainingData& data,
                          const EmbeddingSet& embeddings, HeadModel initial) {
  config.validate();
  initial.validate();
  const bool matches = (regime == Regime::nt_xent && std::holds_alternative<NtXentData>(data)) ||
                       (regime == Regime::info_nce && std::holds_alternative<ContrastiveTripletSet>(data)) ||
                       (regime == Regime::classification && std::holds_alternative<ClassificationData>(data));
  if (!matches) throw Error(ErrorCode::invalid_argument, "training data does not match regime " + to_string(regime));
  if (initial.input_dim() != embeddings.dim())
    throw Error(ErrorCode::invalid_argument, "head input dim != embedding dim");

  auto keys = split_keys(data);
  if (keys.empty()) throw Error(ErrorCode::invalid_argument, "empty training data");

  TrainingResult result;
  result.split = split_ids(keys, config.seed);

  std::unique_ptr<RegimeRunner> runner;
  switch (regime) {
    case Regime::nt_xent:
      runner = std::make_unique<NtXentRunner>(config, std::get<NtXentData>(data), embeddings, result.split);
      break;
    case Regime::info_nce:
      runner = std::make_unique<InfoNceRunner>(config, std::get<ContrastiveTripletSet>(data), embeddings, result.split);
      break;
    case Regime::classification: {
      const auto& cd = std::get<ClassificationData>(data);
      for (const auto& t : cd.targets) {
        const auto* c = initial.classifier(t.name);
        if (!c || c->labels != t.labels)
          throw Error(ErrorCode::invalid_argument, "model classifier '" + t.name + "' missing or labels differ");
      }
      runner = std::make_unique<ClassificationRunner>(config, cd, embeddings, result.split);
      break;
    }
  }

  HeadModel model = std::move(initial);
  std::mt19937_64 rng(config.seed);
  double best = std::numeric_limits<double>::infinity();
  HeadModel best_model = model;
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = runner->train_epoch(model, rng, epoch);
    rec.val_loss = runner->validation_loss(model);
    check_loss(rec.val_loss, epoch);
    if (rec.val_loss < best) {
      best = rec.val_loss;
      best_model = model;
      result.best_epoch = epoch;
      stale = 0;
    } else {
      ++stale;
    }
    rec.best_val_loss = best;
    rec.metrics = runner->metrics(model);
    result.history.push_back(std::move(rec));
    if (config.early_stop_patience > 0 && stale >= config.early_stop_patience) break;
  }
  round_to_float(best_model);
  result.model = std::move(best_model);
  return result;
}

double mean_positive_cosine(const HeadModel& model, const ContrastiveTripletSet& set,
                            const EmbeddingSet& embeddings) {
  if (set.records.empty()) throw Error(ErrorCode::invalid_argument, "empty triplet set");
  double sum = 0.0;
  for (const auto& t : set.records) {
    sum += cosine(head_forward(model, features_of(embeddings, t.anchor)).output,
                  head_forward(model, features_of(embeddings, t.positive)).output);
  }
  return sum / static_cast<double>(set.records.size());
}

double classification_accuracy(const HeadModel& model, const ClassificationData& data, std::size_t target,
                               const EmbeddingSet& embeddings) {
  const auto* classifier = model.classifier(data.targets.at(target).name);
  if (!classifier) throw Error(ErrorCode::invalid_argument, "model lacks classifier " + data.targets[target].name);
  const auto c = static_cast<std::size_t>(classifier - model.classifiers.data());
  std::size_t labelled = 0, correct = 0;
  for (const auto& s : data.samples) {
    const int y = s.labels.at(target);
    if (y < 0) continue;
    ++labelled;
    auto logits = head_forward(model, sample_features(embeddings, s)).logits[c];
    if (std::max_element(logits.begin(), logits.end()) - logits.begin() == y) ++correct;
  }
  return labelled ? static_cast<double>(correct) / static_cast<double>(labelled) : 0.0;
}

void save_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write history file " + path.string());
  std::set<std::string> columns;
  for (const auto& r : history)
    for (const auto& kv : r.metrics) columns.insert(kv.first);
  out << "epoch,train_loss,val_loss,best_val_loss";
  for (const auto& c : columns) out << ',' << c;
  out << '\n';
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
  };
  for (const auto& r : history) {
    out << r.epoch << ',' << num(r.train_loss) << ',' << num(r.val_loss) << ',' << num(r.best_val_loss);
    for (const auto& c : columns) {
      auto it = r.metrics.find(c);
      out << ',' << (it == r.metrics.end() ? std::string() : num(it->second));
    }
    out << '\n';
  }
}

}  // namespace acervo
