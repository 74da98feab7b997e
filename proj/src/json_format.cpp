#include "acervo/json_format.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace acervo {

double round_sig9(double value) {
  if (!std::isfinite(value) || value == 0.0) return value;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return std::strtod(buf, nullptr);
}

Json rounded(Json value) {
  if (value.is_number_float()) return round_sig9(value.get<double>());
  if (value.is_array() || value.is_object()) {
    for (auto& child : value) child = rounded(std::move(child));
  }
  return value;
}

std::string dump_canonical(const Json& value) { return rounded(value).dump(); }

}  // namespace acervo
