#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tacs {

// Strict numeric parsing: the whole token must be consumed, and the result
// must be finite (for doubles) or in range (for ints). Failures raise
// ConfigError naming the offending token.
double parse_double(const std::string& token);
int parse_int(const std::string& token);
std::uint64_t parse_u64(const std::string& token);

// Splits on commas, trimming surrounding whitespace; empty tokens are errors.
std::vector<std::string> split_list(const std::string& text);

} // namespace tacs
