#pragma once

#include <string>
#include <string_view>

namespace aqcal {

// Shortest decimal text that parses back to exactly `value`. Integral
// values keep a trailing ".0" so the column type stays visibly real.
std::string format_real(double value);

// Strict locale-independent parse of a whole string as a finite real.
// Returns false on any trailing garbage, empty input or non-finite result.
bool parse_real(std::string_view text, double& out);

}  // namespace aqcal
