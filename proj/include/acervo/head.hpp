#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace acervo {

// y = W x + b, W row-major (out x in).
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in_dim, std::size_t out_dim)
      : in(in_dim), out(out_dim), weight(in_dim * out_dim, 0.0), bias(out_dim, 0.0) {}

  void apply(std::span<const double> x, std::span<double> y) const;
};

struct ClassifierHead {
  std::string name;
  std::vector<std::string> labels;  // one logit per label
  DenseLayer layer;                 // output_dim -> labels.size()

  std::optional<std::size_t> label_index(const std::string& label) const;
};

enum class HeadKind { linear, two_layer };

std::string to_string(HeadKind kind);
HeadKind head_kind_from_string(const std::string& text);

// Projection over a frozen embedding:
//   linear:    z = W1 x + b1
//   two_layer: z = W2 tanh(W1 x + b1) + b2
// Classifier logits are computed on z.
struct HeadModel {
  HeadKind kind = HeadKind::linear;
  DenseLayer first;
  DenseLayer second;  // two_layer only
  std::vector<ClassifierHead> classifiers;

  std::size_t input_dim() const { return first.in; }
  std::size_t hidden_dim() const { return kind == HeadKind::two_layer ? first.out : 0; }
  std::size_t output_dim() const { return kind == HeadKind::two_layer ? second.out : first.out; }

  const ClassifierHead* classifier(const std::string& name) const;

  // Parameter blocks in a fixed order: first.{weight,bias}, second.{weight,bias}
  // (two_layer), then every classifier's {weight,bias}.
  std::vector<std::span<double>> parameters();
  std::vector<std::span<const double>> parameters() const;
  std::size_t parameter_count() const;

  // Throws Error(invalid_argument) when dimensions do not chain or a
  // parameter is non-finite.
  void validate() const;
};

// Xavier-uniform weights, zero biases.
HeadModel make_head(HeadKind kind, std::size_t input_dim, std::size_t hidden_dim,
                    std::size_t output_dim, std::uint64_t seed);
HeadModel identity_head(std::size_t dim);
void add_classifier(HeadModel& model, const std::string& name, std::vector<std::string> labels,
                    std::uint64_t seed);
// Same shape as `model`, every parameter zero.
HeadModel zeros_like(const HeadModel& model);
// Rounds every parameter to the nearest float.
void round_to_float(HeadModel& model);

// Inverted dropout on the head input: kept coordinates scale by 1 / (1 - rate).
struct DropoutMask {
  std::vector<std::uint8_t> keep;
  double rate = 0.0;
};

DropoutMask make_dropout_mask(std::size_t dim, double rate, std::mt19937_64& rng);

struct ForwardTrace {
  std::vector<double> input;   // after dropout
  std::vector<double> hidden;  // tanh activations (two_layer)
  std::vector<double> output;  // projected vector z
  std::vector<std::vector<double>> logits;  // one per classifier
};

// Throws Error(invalid_argument) on dimension mismatch.
ForwardTrace head_forward(const HeadModel& model, std::span<const double> x,
                          const DropoutMask* mask = nullptr);

// Backpropagates dL/dz (and optional dL/dlogits per classifier; an empty
// vector skips that classifier) into `grad`, accumulating. Returns dL/dx for
// the raw input x.
std::vector<double> head_backward(const HeadModel& model, const ForwardTrace& trace,
                                  std::span<const double> d_output,
                                  std::span<const std::vector<double>> d_logits, HeadModel& grad,
                                  const DropoutMask* mask = nullptr);

}  // namespace acervo
