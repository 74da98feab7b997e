#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "acervo/head.hpp"

namespace acervo {

inline constexpr std::size_t kNegativesPerAnchor = 10;

using Vector = std::vector<double>;

// Loss plus its gradient with respect to every input vector.
struct VectorLoss {
  double loss = 0.0;
  std::vector<Vector> grads;
};

struct CosineGrad {
  double value = 0.0;
  Vector d_u;
  Vector d_v;
};

// Throws Error(numeric) when either vector has zero norm.
CosineGrad cosine_with_grad(std::span<const double> u, std::span<const double> v);

// Views (2i, 2i+1) are positives; every other view in the batch is a negative.
//   L = mean_a -log( exp(cos(a, pos(a)) / tau) / sum_{w != a} exp(cos(a, w) / tau) )
// Needs N >= 2 pairs and tau > 0. Zero vectors raise Error(numeric) naming the
// view index.
VectorLoss nt_xent_loss(std::span<const Vector> views, double tau);

// -log( exp(cos(a,p)/tau) / (exp(cos(a,p)/tau) + sum_k exp(cos(a,n_k)/tau)) )
// with exactly kNegativesPerAnchor negatives. grads = {d_anchor, d_positive, d_neg...}.
VectorLoss info_nce_loss(std::span<const double> anchor, std::span<const double> positive,
                         std::span<const Vector> negatives, double tau);

// Logits and integer labels for one classifier over a batch. Label -1 means
// the sample carries no label for this head.
struct HeadLogits {
  std::string name;
  std::vector<Vector> logits;
  std::vector<int> labels;
  std::vector<double> class_weights;  // per label index
};

struct MultiheadLoss {
  double loss = 0.0;
  std::vector<std::vector<Vector>> logit_grads;  // [head][sample]
  std::vector<double> head_losses;
};

// total = sum_h head_weight[h] * (1 / N_h) sum_i w_{y_i} CE(logits_i, y_i),
// N_h = labelled samples for head h. Errors: missing head weight, label out of
// range, class weight count mismatch.
MultiheadLoss weighted_multihead_ce(std::span<const HeadLogits> heads,
                                    const std::map<std::string, double>& head_weights);

// Loss through a head model, with parameter gradients.
struct ParamLoss {
  double loss = 0.0;
  HeadModel grad;
};

struct TripletInputs {
  Vector anchor;
  Vector positive;
  std::vector<Vector> negatives;
};

// Each item passes through the head twice with independent masks
// (masks[2i], masks[2i+1]); masks may be empty for no dropout.
ParamLoss nt_xent_batch(const HeadModel& model, std::span<const Vector> inputs,
                        std::span<const DropoutMask> masks, double tau);
// Mean InfoNCE over triplets.
ParamLoss info_nce_batch(const HeadModel& model, std::span<const TripletInputs> triplets, double tau);

struct ClassifierTargets {
  std::string name;                   // must match a model classifier
  std::vector<int> labels;            // per sample, -1 = unlabelled
  std::vector<double> class_weights;  // per label index
};

ParamLoss classification_batch(const HeadModel& model, std::span<const Vector> inputs,
                               std::span<const ClassifierTargets> targets,
                               const std::map<std::string, double>& head_weights,
                               std::span<const DropoutMask> masks = {});

}  // namespace acervo
