#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "mmfuse/error.hpp"

namespace mmfuse::util {

using Json = nlohmann::json;

/// Throws ConfigError naming the first key of obj that is not allowed.
void reject_unknown_keys(const Json& obj, std::initializer_list<std::string_view> allowed, std::string_view context);

void require_object(const Json& obj, std::string_view context);

/// Reads obj[key] into out when present; type mismatches become ConfigError.
template <typename T>
void read_optional(const Json& obj, const char* key, T& out, std::string_view context) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(context) + "." + key + ": " + e.what());
  }
}

template <typename T>
T read_required(const Json& obj, const char* key, std::string_view context) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(std::string(context) + ": missing required field '" + key + "'");
  try {
    return it->template get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(context) + "." + key + ": " + e.what());
  }
}

Json load_json_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);
std::string read_text_file(const std::string& path);

}  // namespace mmfuse::util
