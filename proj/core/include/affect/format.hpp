#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace affect {

/// Shortest text that parses back to exactly `value`, capped at 17
/// significant digits ("%.17g" semantics). Used by every file writer.
std::string format_double(double value);

/// Fixed-point rendering for human-readable tables.
std::string format_fixed(double value, int decimals = 6);

/// Parses a whole token as a decimal floating-point number. Returns false on
/// trailing garbage, empty input, or non-finite results.
bool parse_double(std::string_view text, double& out);
bool parse_uint(std::string_view text, std::uint64_t& out);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view text);

/// FNV-1a 64-bit, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace affect
