#pragma once

#include <json.hpp>

#include "qsd/chain.hpp"
#include "qsd/version.hpp"

namespace qsd {

using Json = nlohmann::ordered_json;

// FNV-1a over the raw input bytes, for the provenance block.
inline std::string fnv1a64_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x00000100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

inline void dump_escaped(const std::string& s, std::string& out) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
}

inline void dump_17(const Json& j, std::string& out, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string pad1(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad1;
        dump_escaped(it.key(), out);
        out += ": ";
        dump_17(it.value(), out, indent + 1);
      }
      out += "\n" + pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // numeric vectors stay on one line
      bool scalars = true;
      for (const auto& v : j)
        if (v.is_structured()) scalars = false;
      out += scalars ? "[" : "[\n";
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += scalars ? ", " : ",\n";
        first = false;
        if (!scalars) out += pad1;
        dump_17(v, out, indent + 1);
      }
      out += scalars ? "]" : "\n" + pad + "]";
      return;
    }
    case Json::value_t::string:
      dump_escaped(j.get_ref<const std::string&>(), out);
      return;
    case Json::value_t::boolean:
      out += j.get<bool>() ? "true" : "false";
      return;
    case Json::value_t::number_integer:
    case Json::value_t::number_unsigned: {
      out += j.dump();
      return;
    }
    case Json::value_t::number_float: {
      double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
        return;
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out += buf;
      return;
    }
    default:
      out += "null";
      return;
  }
}

}  // namespace detail

// Deterministic serialization: insertion-ordered keys, floats with 17
// significant digits, so equal inputs give byte-identical reports.
inline std::string dump_report(const Json& j) {
  std::string out;
  detail::dump_17(j, out, 0);
  out += "\n";
  return out;
}

inline Json to_json(const Vec& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

template <typename T>
Json to_json(const std::vector<T>& v) {
  Json arr = Json::array();
  for (const auto& x : v) arr.push_back(x);
  return arr;
}

// Minimal structural validator for the shipped report schema: type,
// properties, required, items and enum keywords.
inline bool validate_schema(const Json& doc, const Json& schema,
                            std::string* error = nullptr,
                            const std::string& path = "$") {
  auto fail = [&](const std::string& msg) {
    if (error) *error = path + ": " + msg;
    return false;
  };
  if (schema.contains("type")) {
    const std::string t = schema["type"].get<std::string>();
    bool ok = (t == "object" && doc.is_object()) ||
              (t == "array" && doc.is_array()) ||
              (t == "string" && doc.is_string()) ||
              (t == "number" && (doc.is_number() || doc.is_null())) ||
              (t == "integer" && doc.is_number_integer()) ||
              (t == "boolean" && doc.is_boolean()) || (t == "null" && doc.is_null());
    if (!ok) return fail("expected type " + t);
  }
  if (schema.contains("enum")) {
    bool ok = false;
    for (const auto& v : schema["enum"])
      if (v == doc) ok = true;
    if (!ok) return fail("value not in enum");
  }
  if (schema.contains("required"))
    for (const auto& key : schema["required"])
      if (!doc.contains(key.get<std::string>()))
        return fail("missing required key " + key.get<std::string>());
  if (schema.contains("properties") && doc.is_object())
    for (auto it = schema["properties"].begin(); it != schema["properties"].end();
         ++it)
      if (doc.contains(it.key()))
        if (!validate_schema(doc[it.key()], it.value(), error,
                             path + "." + it.key()))
          return false;
  if (schema.contains("items") && doc.is_array()) {
    int i = 0;
    for (const auto& v : doc) {
      if (!validate_schema(v, schema["items"], error,
                           path + "[" + std::to_string(i) + "]"))
        return false;
      ++i;
    }
  }
  return true;
}

}  // namespace qsd
