#include "acervo/head.hpp"

#include <cmath>

#include "acervo/error.hpp"

namespace acervo {

void DenseLayer::apply(std::span<const double> x, std::span<double> y) const {
  for (std::size_t o = 0; o < out; ++o) {
    const double* w = weight.data() + o * in;
    double s = bias[o];
    for (std::size_t i = 0; i < in; ++i) s += w[i] * x[i];
    y[o] = s;
  }
}

std::optional<std::size_t> ClassifierHead::label_index(const std::string& label) const {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return i;
  return std::nullopt;
}

std::string to_string(HeadKind kind) { return kind == HeadKind::two_layer ? "two_layer" : "linear"; }

HeadKind head_kind_from_string(const std::string& text) {
  if (text == "linear") return HeadKind::linear;
  if (text == "two_layer") return HeadKind::two_layer;
  throw Error(ErrorCode::invalid_argument, "unknown head kind '" + text + "'");
}

const ClassifierHead* HeadModel::classifier(const std::string& name) const {
  for (const auto& c : classifiers)
    if (c.name == name) return &c;
  return nullptr;
}

std::vector<std::span<double>> HeadModel::parameters() {
  std::vector<std::span<double>> blocks{first.weight, first.bias};
  if (kind == HeadKind::two_layer) {
    blocks.emplace_back(second.weight);
    blocks.emplace_back(second.bias);
  }
  for (auto& c : classifiers) {
    blocks.emplace_back(c.layer.weight);
    blocks.emplace_back(c.layer.bias);
  }
  return blocks;
}

std::vector<std::span<const double>> HeadModel::parameters() const {
  std::vector<std::span<const double>> blocks;
  for (auto block : const_cast<HeadModel*>(this)->parameters()) blocks.emplace_back(block);
  return blocks;
}

std::size_t HeadModel::parameter_count() const {
  std::size_t total = 0;
  for (auto block : parameters()) total += block.size();
  return total;
}

void HeadModel::validate() const {
  auto bad = [](const std::string& m) { return Error(ErrorCode::invalid_argument, "head model: " + m); };
  auto check_layer = [&](const DenseLayer& l, const char* name) {
    if (l.in == 0 || l.out == 0) throw bad(std::string(name) + " has a zero dimension");
    if (l.weight.size() != l.in * l.out || l.bias.size() != l.out)
      throw bad(std::string(name) + " parameter sizes do not match its dims");
  };
  check_layer(first, "first layer");
  if (kind == HeadKind::two_layer) {
    check_layer(second, "second layer");
    if (second.in != first.out) throw bad("second layer input != first layer output");
  }
  for (const auto& c : classifiers) {
    check_layer(c.layer, "classifier");
    if (c.layer.in != output_dim()) throw bad("classifier '" + c.name + "' input != output dim");
    if (c.layer.out != c.labels.size()) throw bad("classifier '" + c.name + "' logits != labels");
  }
  for (auto block : parameters())
    for (double v : block)
      if (!std::isfinite(v)) throw bad("non-finite parameter");
}

namespace {

void xavier(DenseLayer& layer, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
  for (double& w : layer.weight) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    w = (2.0 * u - 1.0) * limit;
  }
}

}  // namespace

HeadModel make_head(HeadKind kind, std::size_t input_dim, std::size_t hidden_dim,
                    std::size_t output_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  HeadModel model;
  model.kind = kind;
  if (kind == HeadKind::two_layer) {
    model.first = DenseLayer(input_dim, hidden_dim);
    model.second = DenseLayer(hidden_dim, output_dim);
    xavier(model.first, rng);
    xavier(model.second, rng);
  } else {
    model.first = DenseLayer(input_dim, output_dim);
    xavier(model.first, rng);
  }
  model.validate();
  return model;
}

HeadModel identity_head(std::size_t dim) {
  HeadModel model;
  model.kind = HeadKind::linear;
  model.first = DenseLayer(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) model.first.weight[i * dim + i] = 1.0;
  return model;
}

void add_classifier(HeadModel& model, const std::string& name, std::vector<std::string> labels,
                    std::uint64_t seed) {
  if (model.classifier(name)) throw Error(ErrorCode::invalid_argument, "classifier '" + name + "' exists");
  if (labels.empty()) throw Error(ErrorCode::invalid_argument, "classifier '" + name + "' has no labels");
  std::mt19937_64 rng(seed);
  ClassifierHead head{name, std::move(labels), {}};
  head.layer = DenseLayer(model.output_dim(), head.labels.size());
  xavier(head.layer, rng);
  model.classifiers.push_back(std::move(head));
}

HeadModel zeros_like(const HeadModel& model) {
  HeadModel z = model;
  for (auto block : z.parameters()) std::fill(block.begin(), block.end(), 0.0);
  return z;
}

void round_to_float(HeadModel& model) {
  for (auto block : model.parameters())
    for (double& v : block) v = static_cast<double>(static_cast<float>(v));
}

DropoutMask make_dropout_mask(std::size_t dim, double rate, std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw Error(ErrorCode::invalid_argument, "dropout rate must be in [0, 1)");
  DropoutMask mask;
  mask.rate = rate;
  mask.keep.resize(dim);
  for (auto& k : mask.keep) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    k = u >= rate ? 1 : 0;
  }
  return mask;
}

ForwardTrace head_forward(const HeadModel& model, std::span<const double> x, const DropoutMask* mask) {
  if (x.size() != model.input_dim())
    throw Error(ErrorCode::invalid_argument, "head input has dim " + std::to_string(x.size()) +
                                                 ", model expects " + std::to_string(model.input_dim()));
  ForwardTrace t;
  t.input.assign(x.begin(), x.end());
  if (mask) {
    if (mask->keep.size() != x.size()) throw Error(ErrorCode::invalid_argument, "dropout mask size mismatch");
    const double scale = 1.0 / (1.0 - mask->rate);
    for (std::size_t i = 0; i < x.size(); ++i) t.input[i] = mask->keep[i] ? x[i] * scale : 0.0;
  }
  if (model.kind == HeadKind::two_layer) {
    t.hidden.resize(model.first.out);
    model.first.apply(t.input, t.hidden);
    for (double& h : t.hidden) h = std::tanh(h);
    t.output.resize(model.second.out);
    model.second.apply(t.hidden, t.output);
  } else {
    t.output.resize(model.first.out);
    model.first.apply(t.input, t.output);
  }
  t.logits.resize(model.classifiers.size());
  for (std::size_t c = 0; c < model.classifiers.size(); ++c) {
    t.logits[c].resize(model.classifiers[c].layer.out);
    model.classifiers[c].layer.apply(t.output, t.logits[c]);
  }
  return t;
}

namespace {

// Accumulates dW += dy x^T, db += dy; returns W^T dy.
std::vector<double> dense_backward(const DenseLayer& layer, std::span<const double> x,
                                   std::span<const double> dy, DenseLayer& grad) {
  std::vector<double> dx(layer.in, 0.0);
  for (std::size_t o = 0; o < layer.out; ++o) {
    const double g = dy[o];
    if (g == 0.0) continue;
    grad.bias[o] += g;
    const double* w = layer.weight.data() + o * layer.in;
    double* gw = grad.weight.data() + o * layer.in;
    for (std::size_t i = 0; i < layer.in; ++i) {
      gw[i] += g * x[i];
      dx[i] += g * w[i];
    }
  }
  return dx;
}

}  // namespace

std::vector<double> head_backward(const HeadModel& model, const ForwardTrace& trace,
                                  std::span<const double> d_output,
                                  std::span<const std::vector<double>> d_logits, HeadModel& grad,
                                  const DropoutMask* mask) {
  std::vector<double> dz(d_output.begin(), d_output.end());
  if (dz.empty()) dz.assign(model.output_dim(), 0.0);
  for (std::size_t c = 0; c < d_logits.size() && c < model.classifiers.size(); ++c) {
    if (d_logits[c].empty()) continue;
    auto dzc = dense_backward(model.classifiers[c].layer, trace.output, d_logits[c], grad.classifiers[c].layer);
    for (std::size_t i = 0; i < dz.size(); ++i) dz[i] += dzc[i];
  }
  std::vector<double> dx;
  if (model.kind == HeadKind::two_layer) {
    auto dh = dense_backward(model.second, trace.hidden, dz, grad.second);
    for (std::size_t i = 0; i < dh.size(); ++i) dh[i] *= 1.0 - trace.hidden[i] * trace.hidden[i];
    dx = dense_backward(model.first, trace.input, dh, grad.first);
  } else {
    dx = dense_backward(model.first, trace.input, dz, grad.first);
  }
  if (mask) {
    const double scale = 1.0 / (1.0 - mask->rate);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = mask->keep[i] ? dx[i] * scale : 0.0;
  }
  return dx;
}

}  // namespace acervo
