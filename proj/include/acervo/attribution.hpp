#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "acervo/head.hpp"
#include "acervo/json_format.hpp"
#include "acervo/losses.hpp"

namespace acervo {

enum class ScalarOutput {
  cosine,              // F(x) = cos(head(x), reference)
  dot_with_reference,  // F(x) = head(x) . reference
};

struct AttributionConfig {
  std::size_t steps = 256;
  std::optional<Vector> baseline;  // zero vector when unset
  Vector reference;                // in the head's output space, nonzero
  ScalarOutput output = ScalarOutput::cosine;
};

struct AttributionResult {
  std::vector<double> attributions;
  double residual = 0.0;  // |sum(attributions) - (f_input - f_baseline)|
  double f_input = 0.0;
  double f_baseline = 0.0;
  std::size_t steps = 0;
  bool zero_baseline = true;
};

// Scalar output and its gradient with respect to x (dropout off).
struct ScalarGrad {
  double value = 0.0;
  Vector grad;
};

ScalarGrad scalar_output(const HeadModel& model, std::span<const double> x, const AttributionConfig& config);

// Right-endpoint Riemann sum of the path integral from the baseline to x:
//   IG_i = (x_i - b_i) / m * sum_{t=1..m} dF/dx_i(b + t/m (x - b)).
// Step gradients run in parallel; the summation order is fixed.
// A zero head output on the path raises Error(numeric) naming t (t = 0 is the baseline).
AttributionResult integrated_gradients(const HeadModel& model, std::span<const double> x,
                                       const AttributionConfig& config);

// Group score = sum of member attributions. Throws Error(invalid_argument)
// when a feature index has no group.
std::map<std::string, double> group_attributions(const AttributionResult& result,
                                                 const std::map<std::size_t, std::string>& segmentation);

Json attribution_report(const AttributionResult& result,
                        const std::map<std::string, double>* groups = nullptr);

}  // namespace acervo
