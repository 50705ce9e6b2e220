#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "affect/error.hpp"

namespace affect::detail {

using json = nlohmann::json;

inline json parse_json(std::string_view text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(source + ": " + e.what());
  }
}

/// Throws DataError naming `where` if `object` has keys outside `allowed`.
inline void require_keys(const json& object, std::initializer_list<std::string_view> allowed,
                         const std::string& where) {
  if (!object.is_object()) throw DataError(where + ": expected an object");
  for (const auto& [key, value] : object.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw DataError(where + ": unknown key '" + key + "'");
  }
}

}  // namespace affect::detail

namespace affect {
struct SynthSpec;
namespace detail {
json synth_to_json(const SynthSpec& spec);
SynthSpec synth_from_json(const json& j);
}  // namespace detail
}  // namespace affect
