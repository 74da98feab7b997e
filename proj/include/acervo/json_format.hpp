#pragma once

#include <string>

#include <json.hpp>

namespace acervo {

using Json = nlohmann::json;

// Rounds to 9 significant digits. Serializing the result with nlohmann's
// shortest round-trip printer gives at most 9 digits.
double round_sig9(double value);

// Recursively applies round_sig9 to every floating point number.
Json rounded(Json value);

// Canonical response text: sorted keys, rounded floats, compact.
std::string dump_canonical(const Json& value);

}  // namespace acervo
