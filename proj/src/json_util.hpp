#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "o2b/error.hpp"

namespace o2b::detail {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                                std::string_view context) {
  if (!obj.is_object()) {
    throw Error(Errc::parse_error, std::string(context) + " must be a JSON object");
  }
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) {
      throw Error(Errc::parse_error,
                  std::string(context) + ": unknown field '" + key + "'");
    }
  }
}

template <typename T>
T required(const json& obj, const char* key, std::string_view context) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(Errc::parse_error, std::string(context) + ": missing field '" + key + "'");
  }
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error,
                std::string(context) + ": field '" + key + "' has the wrong type (" + e.what() + ")");
  }
}

template <typename T>
T optional_field(const json& obj, const char* key, T fallback, std::string_view context) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error,
                std::string(context) + ": field '" + key + "' has the wrong type (" + e.what() + ")");
  }
}

inline json parse_json(std::string_view text, std::string_view context) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::parse_error, std::string(context) + ": " + e.what());
  }
}

}  // namespace o2b::detail
