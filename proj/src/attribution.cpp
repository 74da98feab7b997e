#include "acervo/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "acervo/error.hpp"

namespace acervo {

namespace {

constexpr std::size_t kBlock = 32;

struct ZeroOutput {
  std::size_t t;
};

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

ScalarGrad scalar_with_scratch(const HeadModel& model, std::span<const double> x, const AttributionConfig& config,
                               HeadModel& scratch) {
  ForwardTrace trace = head_forward(model, x);
  const Vector& z = trace.output;
  const Vector& r = config.reference;
  if (z.size() != r.size())
    throw Error(ErrorCode::invalid_argument, "reference dim " + std::to_string(r.size()) + " != head output dim " +
                                                 std::to_string(z.size()));
  ScalarGrad out;
  Vector d_z(z.size());
  if (config.output == ScalarOutput::dot_with_reference) {
    out.value = dot(z, r);
    d_z = r;
  } else {
    const double zz = dot(z, z);
    if (!(zz > 0.0)) throw ZeroOutput{0};
    const double nz = std::sqrt(zz), nr = std::sqrt(dot(r, r));
    const double c = dot(z, r) / (nz * nr);
    out.value = c;
    for (std::size_t i = 0; i < z.size(); ++i) d_z[i] = r[i] / (nz * nr) - c * z[i] / zz;
  }
  out.grad = head_backward(model, trace, d_z, {}, scratch);
  return out;
}

}  // namespace

ScalarGrad scalar_output(const HeadModel& model, std::span<const double> x, const AttributionConfig& config) {
  HeadModel scratch = zeros_like(model);
  try {
    return scalar_with_scratch(model, x, config, scratch);
  } catch (const ZeroOutput&) {
    throw Error(ErrorCode::numeric, "head output is the zero vector; cosine undefined");
  }
}

AttributionResult integrated_gradients(const HeadModel& model, std::span<const double> x,
                                       const AttributionConfig& config) {
  const std::size_t dim = x.size();
  const std::size_t m = config.steps;
  if (m < 1) throw Error(ErrorCode::invalid_argument, "attribution steps must be >= 1");
  if (dim != model.input_dim())
    throw Error(ErrorCode::invalid_argument, "input dim " + std::to_string(dim) + " != head input dim " +
                                                 std::to_string(model.input_dim()));
  if (std::all_of(config.reference.begin(), config.reference.end(), [](double v) { return v == 0.0; }))
    throw Error(ErrorCode::invalid_argument, "attribution reference must be nonzero");
  Vector baseline = config.baseline.value_or(Vector(dim, 0.0));
  if (baseline.size() != dim) throw Error(ErrorCode::invalid_argument, "baseline dim != input dim");
  bool differs = false;
  for (std::size_t i = 0; i < dim; ++i) differs |= x[i] != baseline[i];
  if (!differs) throw Error(ErrorCode::invalid_argument, "input equals the baseline");

  auto zero_at = [](std::size_t t) {
    return Error(ErrorCode::numeric, "head output is the zero vector on the path at t=" + std::to_string(t));
  };

  AttributionResult result;
  result.steps = m;
  result.zero_baseline = !config.baseline.has_value();
  {
    HeadModel scratch = zeros_like(model);
    try {
      result.f_baseline = scalar_with_scratch(model, baseline, config, scratch).value;
    } catch (const ZeroOutput&) {
      throw zero_at(0);
    }
    try {
      result.f_input = scalar_with_scratch(model, x, config, scratch).value;
    } catch (const ZeroOutput&) {
      throw zero_at(m);
    }
  }

  const std::size_t blocks = (m + kBlock - 1) / kBlock;
  std::vector<Vector> partial(blocks, Vector(dim, 0.0));
  std::vector<std::size_t> failed(blocks, 0);
  std::vector<std::string> other_error(blocks);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(blocks); ++bi) {
    const auto b = static_cast<std::size_t>(bi);
    HeadModel scratch = zeros_like(model);
    Vector z(dim);
    for (std::size_t t = b * kBlock + 1; t <= std::min(m, (b + 1) * kBlock); ++t) {
      const double alpha = static_cast<double>(t) / static_cast<double>(m);
      for (std::size_t i = 0; i < dim; ++i) z[i] = baseline[i] + alpha * (x[i] - baseline[i]);
      try {
        auto g = scalar_with_scratch(model, z, config, scratch).grad;
        for (std::size_t i = 0; i < dim; ++i) partial[b][i] += g[i];
      } catch (const ZeroOutput&) {
        failed[b] = t;
        break;
      } catch (const std::exception& e) {
        other_error[b] = e.what();
        break;
      }
    }
  }
  for (std::size_t b = 0; b < blocks; ++b) {
    if (failed[b]) throw zero_at(failed[b]);
    if (!other_error[b].empty()) throw Error(ErrorCode::numeric, other_error[b]);
  }

  Vector sum(dim, 0.0);
  for (const auto& p : partial)
    for (std::size_t i = 0; i < dim; ++i) sum[i] += p[i];
  result.attributions.resize(dim);
  double total = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    result.attributions[i] = (x[i] - baseline[i]) * sum[i] / static_cast<double>(m);
    total += result.attributions[i];
  }
  result.residual = std::abs(total - (result.f_input - result.f_baseline));
  return result;
}

std::map<std::string, double> group_attributions(const AttributionResult& result,
                                                 const std::map<std::size_t, std::string>& segmentation) {
  std::map<std::string, double> groups;
  for (std::size_t i = 0; i < result.attributions.size(); ++i) {
    auto it = segmentation.find(i);
    if (it == segmentation.end())
      throw Error(ErrorCode::invalid_argument, "feature " + std::to_string(i) + " has no group");
    groups[it->second] += result.attributions[i];
  }
  return groups;
}

Json attribution_report(const AttributionResult& result, const std::map<std::string, double>* groups) {
  Json j = {{"attributions", result.attributions},
            {"residual", result.residual},
            {"f_input", result.f_input},
            {"f_baseline", result.f_baseline},
            {"steps", result.steps},
            {"baseline", result.zero_baseline ? "zero" : "explicit"}};
  if (groups) j["groups"] = *groups;
  return j;
}

}  // namespace acervo
