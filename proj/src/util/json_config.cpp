#include "mmfuse/util/json_config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace mmfuse::util {

void require_object(const Json& obj, std::string_view context) {
  if (!obj.is_object()) throw ConfigError(std::string(context) + " must be a JSON object");
}

void reject_unknown_keys(const Json& obj, std::initializer_list<std::string_view> allowed, std::string_view context) {
  require_object(obj, context);
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw ConfigError(std::string(context) + ": unknown field '" + it.key() + "'");
    }
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

Json load_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace mmfuse::util
