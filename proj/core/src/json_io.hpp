// SPDX-License-Identifier: Apache-2.0
// Internal JSON helpers shared by the .cpp files. Not installed.
#pragma once

#include <string>

#include <json.hpp>

#include "toolvoc/error.hpp"

namespace toolvoc::detail {

using json = nlohmann::json;

inline json parse_json(const std::string& text, const std::string& where) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ParseError(where, "invalid JSON");
  return doc;
}

inline const json& require_field(const json& obj, const char* key,
                                 const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw ParseError(where, std::string("missing field '") + key + "'");
  return *it;
}

inline std::string require_string(const json& obj, const char* key,
                                  const std::string& where) {
  const json& v = require_field(obj, key, where);
  if (!v.is_string())
    throw ParseError(where, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

inline std::string optional_string(const json& obj, const char* key,
                                   const std::string& where,
                                   const std::string& fallback = {}) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  if (!it->is_string())
    throw ParseError(where, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

// Recursively re-serializes with object keys sorted, so two JSON texts that
// differ only in key order or whitespace canonicalize identically.
inline std::string canonical_json(const json& doc) {
  return doc.dump(-1, ' ', false, json::error_handler_t::replace);
}

}  // namespace toolvoc::detail
