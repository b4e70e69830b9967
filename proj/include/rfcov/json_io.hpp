#pragma once

// nlohmann adapters for config types. Internal to the library and tools; the
// C API exchanges plain JSON strings.

#include <json.hpp>

#include <string>
#include <type_traits>
#include <vector>

#include "rfcov/error.hpp"
#include "rfcov/forest.hpp"
#include "rfcov/pasr.hpp"

namespace rfcov {

using Json = nlohmann::json;

/// Parses text, converting parse failures to ConfigError.
Json parse_json(std::string_view text, const std::string& what);

/// Rejects keys of `object` that are not in `allowed`.
void require_known_keys(const Json& object, std::initializer_list<std::string_view> allowed,
                        const std::string& section);

/// get<T>() that refuses negative or fractional values for unsigned T
/// (nlohmann would silently wrap them).
template <class T>
T get_checked(const Json& j) {
  if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
    if (!j.is_number_unsigned()) throw ConfigError("expected a non-negative integer, got " + j.dump());
    return j.get<T>();
  } else if constexpr (requires { typename T::value_type; } && !std::is_same_v<T, std::string>) {
    if (!j.is_array()) throw ConfigError("expected an array, got " + j.dump());
    T out;
    for (const auto& item : j) out.push_back(get_checked<typename T::value_type>(item));
    return out;
  } else {
    return j.get<T>();
  }
}

/// Reads j[key] into out when present.
template <class T>
void read_field(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = get_checked<T>(j.at(key));
}

namespace forest {
void to_json(Json& j, const ForestConfig& config);
void from_json(const Json& j, ForestConfig& config);
}  // namespace forest

namespace pasr {
void to_json(Json& j, const PasrConfig& config);
void from_json(const Json& j, PasrConfig& config);
}  // namespace pasr

}  // namespace rfcov
