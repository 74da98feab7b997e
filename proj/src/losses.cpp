#include "acervo/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "acervo/error.hpp"

namespace acervo {

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw Error(ErrorCode::invalid_argument, "temperature must be > 0");
}

Error zero_vector(const std::string& what) {
  return Error(ErrorCode::numeric, "zero-norm vector (" + what + "): cosine undefined");
}

}  // namespace

CosineGrad cosine_with_grad(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error(ErrorCode::invalid_argument, "cosine: dimension mismatch");
  const double nu = norm(u), nv = norm(v);
  if (!(nu > 0.0)) throw zero_vector("first argument");
  if (!(nv > 0.0)) throw zero_vector("second argument");
  CosineGrad out;
  double dot = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
  out.value = dot / (nu * nv);
  out.d_u.resize(u.size());
  out.d_v.resize(v.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    out.d_u[i] = v[i] / (nu * nv) - out.value * u[i] / (nu * nu);
    out.d_v[i] = u[i] / (nu * nv) - out.value * v[i] / (nv * nv);
  }
  return out;
}

VectorLoss nt_xent_loss(std::span<const Vector> views, double tau) {
  check_tau(tau);
  const std::size_t m = views.size();
  if (m < 4 || m % 2 != 0)
    throw Error(ErrorCode::invalid_argument, "nt_xent needs 2N views with N >= 2");
  const std::size_t dim = views[0].size();
  std::vector<Vector> unit(m);
  std::vector<double> norms(m);
  for (std::size_t a = 0; a < m; ++a) {
    if (views[a].size() != dim) throw Error(ErrorCode::invalid_argument, "nt_xent: dimension mismatch");
    norms[a] = norm(views[a]);
    if (!(norms[a] > 0.0)) throw zero_vector("view " + std::to_string(a));
    unit[a].resize(dim);
    for (std::size_t i = 0; i < dim; ++i) unit[a][i] = views[a][i] / norms[a];
  }
  std::vector<double> cos(m * m, 0.0);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t w = a; w < m; ++w) {
      double s = 0.0;
      for (std::size_t i = 0; i < dim; ++i) s += unit[a][i] * unit[w][i];
      cos[a * m + w] = cos[w * m + a] = s;
    }

  // g[a][w] = dL/ds_aw from anchor a's term, s = cos / tau.
  VectorLoss out;
  std::vector<double> g(m * m, 0.0);
  std::vector<double> logits;
  for (std::size_t a = 0; a < m; ++a) {
    const std::size_t pos = a ^ 1U;
    logits.clear();
    for (std::size_t w = 0; w < m; ++w)
      if (w != a) logits.push_back(cos[a * m + w] / tau);
    const double lse = log_sum_exp(logits);
    out.loss += lse - cos[a * m + pos] / tau;
    for (std::size_t w = 0; w < m; ++w) {
      if (w == a) continue;
      g[a * m + w] = std::exp(cos[a * m + w] / tau - lse) / static_cast<double>(m);
    }
    g[a * m + pos] -= 1.0 / static_cast<double>(m);
  }
  out.loss /= static_cast<double>(m);

  out.grads.assign(m, Vector(dim, 0.0));
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t w = 0; w < m; ++w) {
      if (w == a) continue;
      const double c = (g[a * m + w] + g[w * m + a]) / tau;
      if (c == 0.0) continue;
      const double ca = cos[a * m + w];
      for (std::size_t i = 0; i < dim; ++i)
        out.grads[a][i] += c * (unit[w][i] - ca * unit[a][i]) / norms[a];
    }
  }
  return out;
}

VectorLoss info_nce_loss(std::span<const double> anchor, std::span<const double> positive,
                         std::span<const Vector> negatives, double tau) {
  check_tau(tau);
  if (negatives.size() != kNegativesPerAnchor)
    throw Error(ErrorCode::invalid_argument, "info_nce expects exactly " +
                                                 std::to_string(kNegativesPerAnchor) + " negatives, got " +
                                                 std::to_string(negatives.size()));
  std::vector<CosineGrad> sims;
  sims.reserve(negatives.size() + 1);
  try {
    sims.push_back(cosine_with_grad(anchor, positive));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::numeric)
      throw zero_vector(norm(anchor) > 0.0 ? "positive" : "anchor");
    throw;
  }
  for (std::size_t k = 0; k < negatives.size(); ++k) {
    try {
      sims.push_back(cosine_with_grad(anchor, negatives[k]));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::numeric) throw zero_vector("negative " + std::to_string(k));
      throw;
    }
  }
  std::vector<double> logits(sims.size());
  for (std::size_t s = 0; s < sims.size(); ++s) logits[s] = sims[s].value / tau;
  const double lse = log_sum_exp(logits);

  VectorLoss out;
  out.loss = lse - logits[0];
  out.grads.assign(negatives.size() + 2, Vector(anchor.size(), 0.0));
  for (std::size_t s = 0; s < sims.size(); ++s) {
    const double ds = (std::exp(logits[s] - lse) - (s == 0 ? 1.0 : 0.0)) / tau;
    Vector& other = out.grads[s + 1];
    for (std::size_t i = 0; i < anchor.size(); ++i) {
      out.grads[0][i] += ds * sims[s].d_u[i];
      other[i] += ds * sims[s].d_v[i];
    }
  }
  return out;
}

MultiheadLoss weighted_multihead_ce(std::span<const HeadLogits> heads,
                                    const std::map<std::string, double>& head_weights) {
  MultiheadLoss out;
  out.logit_grads.resize(heads.size());
  out.head_losses.resize(heads.size(), 0.0);
  for (std::size_t h = 0; h < heads.size(); ++h) {
    const HeadLogits& head = heads[h];
    auto hw_it = head_weights.find(head.name);
    if (hw_it == head_weights.end())
      throw Error(ErrorCode::invalid_argument, "no head weight for head '" + head.name + "'");
    if (head.labels.size() != head.logits.size())
      throw Error(ErrorCode::invalid_argument, "head '" + head.name + "': labels/logits size mismatch");
    const double hw = hw_it->second;
    std::size_t labelled = 0;
    for (int y : head.labels) {
      if (y < -1 || (y >= 0 && static_cast<std::size_t>(y) >= head.class_weights.size()))
        throw Error(ErrorCode::invalid_argument,
                    "head '" + head.name + "': label " + std::to_string(y) + " outside label set");
      if (y >= 0) ++labelled;
    }
    out.logit_grads[h].resize(head.logits.size());
    if (labelled == 0) continue;
    for (std::size_t i = 0; i < head.logits.size(); ++i) {
      const Vector& z = head.logits[i];
      out.logit_grads[h][i].assign(z.size(), 0.0);
      const int y = head.labels[i];
      if (y < 0) continue;
      if (z.size() != head.class_weights.size())
        throw Error(ErrorCode::invalid_argument, "head '" + head.name + "': logit count != label count");
      const double lse = log_sum_exp(z);
      const double scale = head.class_weights[static_cast<std::size_t>(y)] / static_cast<double>(labelled);
      out.head_losses[h] += scale * (lse - z[static_cast<std::size_t>(y)]);
      for (std::size_t c = 0; c < z.size(); ++c) {
        const double p = std::exp(z[c] - lse);
        out.logit_grads[h][i][c] = hw * scale * (p - (static_cast<int>(c) == y ? 1.0 : 0.0));
      }
    }
    out.loss += hw * out.head_losses[h];
  }
  return out;
}

ParamLoss nt_xent_batch(const HeadModel& model, std::span<const Vector> inputs,
                        std::span<const DropoutMask> masks, double tau) {
  const std::size_t m = inputs.size() * 2;
  if (!masks.empty() && masks.size() != m)
    throw Error(ErrorCode::invalid_argument, "nt_xent_batch: need two masks per input");
  std::vector<ForwardTrace> traces;
  std::vector<Vector> views;
  traces.reserve(m);
  views.reserve(m);
  for (std::size_t v = 0; v < m; ++v) {
    traces.push_back(head_forward(model, inputs[v / 2], masks.empty() ? nullptr : &masks[v]));
    views.push_back(traces.back().output);
  }
  VectorLoss vl = nt_xent_loss(views, tau);
  ParamLoss out{vl.loss, zeros_like(model)};
  for (std::size_t v = 0; v < m; ++v)
    head_backward(model, traces[v], vl.grads[v], {}, out.grad, masks.empty() ? nullptr : &masks[v]);
  return out;
}

ParamLoss info_nce_batch(const HeadModel& model, std::span<const TripletInputs> triplets, double tau) {
  if (triplets.empty()) throw Error(ErrorCode::invalid_argument, "info_nce_batch: empty batch");
  ParamLoss out{0.0, zeros_like(model)};
  const double inv = 1.0 / static_cast<double>(triplets.size());
  for (const auto& t : triplets) {
    ForwardTrace ta = head_forward(model, t.anchor);
    ForwardTrace tp = head_forward(model, t.positive);
    std::vector<ForwardTrace> tn;
    std::vector<Vector> negs;
    for (const auto& n : t.negatives) {
      tn.push_back(head_forward(model, n));
      negs.push_back(tn.back().output);
    }
    VectorLoss vl = info_nce_loss(ta.output, tp.output, negs, tau);
    out.loss += vl.loss * inv;
    for (auto& g : vl.grads)
      for (double& x : g) x *= inv;
    head_backward(model, ta, vl.grads[0], {}, out.grad);
    head_backward(model, tp, vl.grads[1], {}, out.grad);
    for (std::size_t k = 0; k < tn.size(); ++k) head_backward(model, tn[k], vl.grads[k + 2], {}, out.grad);
  }
  return out;
}

ParamLoss classification_batch(const HeadModel& model, std::span<const Vector> inputs,
                               std::span<const ClassifierTargets> targets,
                               const std::map<std::string, double>& head_weights,
                               std::span<const DropoutMask> masks) {
  if (!masks.empty() && masks.size() != inputs.size())
    throw Error(ErrorCode::invalid_argument, "classification_batch: one mask per input");
  std::vector<std::size_t> classifier_index;
  for (const auto& t : targets) {
    std::size_t c = 0;
    while (c < model.classifiers.size() && model.classifiers[c].name != t.name) ++c;
    if (c == model.classifiers.size())
      throw Error(ErrorCode::invalid_argument, "model has no classifier '" + t.name + "'");
    if (t.labels.size() != inputs.size())
      throw Error(ErrorCode::invalid_argument, "targets for '" + t.name + "' do not cover the batch");
    classifier_index.push_back(c);
  }
  std::vector<ForwardTrace> traces;
  traces.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i)
    traces.push_back(head_forward(model, inputs[i], masks.empty() ? nullptr : &masks[i]));

  std::vector<HeadLogits> heads;
  for (std::size_t h = 0; h < targets.size(); ++h) {
    HeadLogits hl{targets[h].name, {}, targets[h].labels, targets[h].class_weights};
    for (const auto& t : traces) hl.logits.push_back(t.logits[classifier_index[h]]);
    heads.push_back(std::move(hl));
  }
  MultiheadLoss ml = weighted_multihead_ce(heads, head_weights);
  ParamLoss out{ml.loss, zeros_like(model)};
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::vector<Vector> d_logits(model.classifiers.size());
    for (std::size_t h = 0; h < targets.size(); ++h) d_logits[classifier_index[h]] = ml.logit_grads[h][i];
    head_backward(model, traces[i], {}, d_logits, out.grad, masks.empty() ? nullptr : &masks[i]);
  }
  return out;
}

}  // namespace acervo
