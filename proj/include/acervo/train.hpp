#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "acervo/datasets.hpp"
#include "acervo/embeddings.hpp"
#include "acervo/head.hpp"
#include "acervo/json_format.hpp"

namespace acervo {

enum class Regime { nt_xent, info_nce, classification };

std::string to_string(Regime regime);
Regime regime_from_string(const std::string& text);

struct TrainingConfig {
  double temperature = 0.05;
  double learning_rate = 0.05;
  double weight_decay = 0.0;
  std::size_t epochs = 16;
  std::size_t batch_size = 32;
  std::map<std::string, double> head_weights;  // classification; empty = uniform
  double dropout_rate = 0.1;
  std::uint64_t seed = 0;
  std::size_t early_stop_patience = 3;  // 0 disables early stopping

  void validate() const;
};

Json to_json(const TrainingConfig& config);
std::string training_config_hash(const TrainingConfig& config, Regime regime);

// Unsupervised regime: every item is its own positive under two dropout masks.
struct NtXentData {
  std::vector<ItemId> ids;
};

using TrainingData = std::variant<NtXentData, ContrastiveTripletSet, ClassificationData>;

// Deterministic 80/10/10 split by seeded shuffle; returned lists are sorted.
struct DataSplit {
  std::vector<ItemId> train;
  std::vector<ItemId> validation;
  std::vector<ItemId> test;
};

DataSplit split_ids(std::vector<ItemId> ids, std::uint64_t seed);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double best_val_loss = 0.0;
  std::map<std::string, double> metrics;
};

struct TrainingResult {
  HeadModel model;  // best-validation snapshot, parameters rounded to float
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  DataSplit split;
};

// Plain SGD with decoupled weight decay over frozen embeddings. Deterministic
// for a fixed seed. Throws Error(numeric) naming the epoch on a non-finite
// loss; Error(invalid_argument) on empty data or a regime/data mismatch.
TrainingResult train_head(const TrainingConfig& config, Regime regime, const TrainingData& data,
                          const EmbeddingSet& embeddings, HeadModel initial);

// Mean cos(head(anchor), head(positive)) over triplets.
double mean_positive_cosine(const HeadModel& model, const ContrastiveTripletSet& set,
                            const EmbeddingSet& embeddings);

// Fraction of labelled samples of `target` whose argmax logit is correct.
double classification_accuracy(const HeadModel& model, const ClassificationData& data,
                               std::size_t target, const EmbeddingSet& embeddings);

// Columns: epoch,train_loss,val_loss,best_val_loss,<metrics...>
void save_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

// Model file: one JSON object; parameters are little-endian f32, base64.
void save_model(const HeadModel& model, const std::string& config_hash, const std::filesystem::path& path);
HeadModel load_model(const std::filesystem::path& path, std::string* config_hash = nullptr);
Json model_to_json(const HeadModel& model, const std::string& config_hash);
HeadModel model_from_json(const Json& j);

}  // namespace acervo
