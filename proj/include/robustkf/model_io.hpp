#pragma once

// Model and spec files in JSON or TOML. Both formats map onto the same JSON
// document shape, so validation lives in serialize.hpp.

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include <toml.hpp>

#include "robustkf/serialize.hpp"

namespace robustkf::io {

enum class FileFormat { Json, Toml };

inline FileFormat format_for(const std::filesystem::path& path) {
  return path.extension() == ".toml" ? FileFormat::Toml : FileFormat::Json;
}

inline json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    json j = json::object();
    for (const auto& [k, v] : *t) j[std::string(k.str())] = toml_to_json(v);
    return j;
  }
  if (const auto* a = node.as_array()) {
    json j = json::array();
    for (const auto& v : *a) j.push_back(toml_to_json(v));
    return j;
  }
  if (const auto* v = node.as_integer()) return static_cast<double>(v->get());
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_string()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  throw ParseError("unsupported TOML value type");
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_document(const std::string& text, FileFormat format,
                           const std::string& origin) {
  if (format == FileFormat::Toml) {
    try {
      return toml_to_json(toml::parse(text, origin));
    } catch (const toml::parse_error& e) {
      throw ParseError(origin + ": " + std::string(e.description()));
    }
  }
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(origin + ": " + e.what());
  }
}

inline json read_document(const std::filesystem::path& path) {
  return parse_document(read_text(path), format_for(path), path.string());
}

inline LtiModel load_model(const std::filesystem::path& path) {
  return model_from_json(read_document(path));
}

inline DesignSpec load_spec(const std::filesystem::path& path,
                            DesignSpec base = {}) {
  apply_spec_json(read_document(path), base);
  return base;
}

inline std::string to_toml(const json& j) {
  std::function<toml::array(const json&)> arr;
  auto value = [&](const json& v, auto&& insert) {
    if (v.is_array())
      insert(arr(v));
    else if (v.is_string())
      insert(v.get<std::string>());
    else if (v.is_boolean())
      insert(v.get<bool>());
    else if (v.is_number())
      insert(v.get<double>());
    else
      throw ParseError("TOML cannot represent null or nested objects here");
  };
  arr = [&](const json& a) {
    toml::array out;
    for (const auto& v : a) value(v, [&](auto&& x) { out.push_back(x); });
    return out;
  };
  toml::table t;
  for (const auto& [k, v] : j.items())
    value(v, [&](auto&& x) { t.insert(k, x); });
  std::ostringstream ss;
  ss << t;
  return ss.str();
}

inline void write_text(const std::filesystem::path& path,
                       const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline void save_model(const std::filesystem::path& path, const LtiModel& m) {
  const json j = model_to_json(m);
  write_text(path, format_for(path) == FileFormat::Toml ? to_toml(j)
                                                        : j.dump(2) + "\n");
}

}  // namespace robustkf::io
