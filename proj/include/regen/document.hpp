#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "regen/error.hpp"

namespace regen {

/// Whole file as bytes; a missing or unreadable file is a ConfigError naming the path.
inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// TOML or JSON configuration held as a JSON tree. TOML sources also keep the
/// line and column of every value, keyed by JSON pointer.
class ConfigDocument {
 public:
  enum class Format { kToml, kJson };

  static ConfigDocument parse(std::string text, Format format, std::string source_name) {
    ConfigDocument doc;
    doc.text_ = std::move(text);
    doc.format_ = format;
    doc.source_ = std::move(source_name);
    if (format == Format::kJson) {
      try {
        doc.root_ = nlohmann::json::parse(doc.text_);
      } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(doc.source_ + ": " + e.what());
      }
    } else {
      try {
        const toml::table table = toml::parse(doc.text_, doc.source_);
        doc.root_ = doc.convert(table, "");
      } catch (const toml::parse_error& e) {
        const auto& at = e.source().begin;
        throw ConfigError(doc.source_ + ":" + std::to_string(at.line) + ":" + std::to_string(at.column) + ": " +
                          std::string(e.description()));
      }
    }
    if (!doc.root_.is_object()) throw ConfigError(doc.source_ + ": top level must be a table/object");
    return doc;
  }

  /// Format chosen by extension: `.json` is JSON, anything else TOML.
  static ConfigDocument load(const std::filesystem::path& path) {
    const auto format = path.extension() == ".json" ? Format::kJson : Format::kToml;
    return parse(read_text_file(path), format, path.string());
  }

  const nlohmann::json& root() const { return root_; }
  const std::string& text() const { return text_; }
  const std::string& source() const { return source_; }
  Format format() const { return format_; }

  /// "file:line:col" for a pointer with a recorded position, else "file".
  std::string where(const std::string& pointer) const {
    const auto it = positions_.find(pointer);
    if (it == positions_.end()) return source_;
    return source_ + ":" + std::to_string(it->second.first) + ":" + std::to_string(it->second.second);
  }

  [[noreturn]] void fail(const std::string& pointer, const std::string& message) const {
    std::string key = pointer.empty() ? "(root)" : pointer.substr(1);
    for (auto& c : key) {
      if (c == '/') c = '.';
    }
    throw ConfigError(where(pointer) + ": " + key + ": " + message);
  }

 private:
  nlohmann::json convert(const toml::node& node, const std::string& pointer) {
    const auto& at = node.source().begin;
    positions_[pointer] = {at.line, at.column};
    if (const auto* t = node.as_table()) {
      nlohmann::json out = nlohmann::json::object();
      for (const auto& [key, value] : *t) {
        const std::string k(key.str());
        out[k] = convert(value, pointer + "/" + k);
      }
      return out;
    }
    if (const auto* a = node.as_array()) {
      nlohmann::json out = nlohmann::json::array();
      for (std::size_t i = 0; i < a->size(); ++i) out.push_back(convert(*a->get(i), pointer + "/" + std::to_string(i)));
      return out;
    }
    if (const auto* s = node.as_string()) return s->get();
    if (const auto* i = node.as_integer()) return i->get();
    if (const auto* f = node.as_floating_point()) return f->get();
    if (const auto* b = node.as_boolean()) return b->get();
    std::ostringstream os;
    node.visit([&](const auto& v) { os << v; });
    return os.str();
  }

  nlohmann::json root_;
  std::string text_;
  std::string source_;
  Format format_ = Format::kToml;
  std::map<std::string, std::pair<std::uint32_t, std::uint32_t>> positions_;
};

/// Typed read access to one table of a ConfigDocument. Every failure names
/// the file, the key path and (for TOML) the line and column.
class ConfigSection {
 public:
  ConfigSection(const ConfigDocument& doc, const nlohmann::json& node, std::string pointer)
      : doc_(&doc), node_(&node), pointer_(std::move(pointer)) {
    if (!node_->is_object()) doc_->fail(pointer_, "expected a table");
  }

  explicit ConfigSection(const ConfigDocument& doc) : ConfigSection(doc, doc.root(), "") {}

  const nlohmann::json& json() const { return *node_; }
  const std::string& pointer() const { return pointer_; }
  const ConfigDocument& document() const { return *doc_; }

  bool has(const std::string& key) const { return node_->contains(key); }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    doc_->fail(key.empty() ? pointer_ : path(key), message);
  }

  /// Rejects keys outside `allowed` so typos do not pass silently.
  void allow_only(std::initializer_list<std::string_view> allowed) const {
    for (const auto& [key, value] : node_->items()) {
      bool ok = false;
      for (auto a : allowed) ok = ok || a == key;
      if (!ok) fail(key, "unknown key");
    }
  }

  ConfigSection section(const std::string& key) const {
    if (!has(key)) doc_->fail(pointer_, "missing table '" + key + "'");
    return {*doc_, node_->at(key), path(key)};
  }

  std::optional<ConfigSection> optional_section(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return section(key);
  }

  double number(const std::string& key) const { return as_number(require(key), path(key)); }

  double number_or(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  std::optional<double> optional_number(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return number(key);
  }

  double positive(const std::string& key) const {
    const double v = number(key);
    if (!(v > 0.0)) fail(key, "must be > 0");
    return v;
  }

  double positive_or(const std::string& key, double fallback) const { return has(key) ? positive(key) : fallback; }

  std::uint64_t unsigned_integer(const std::string& key) const {
    const auto& v = require(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      fail(key, "expected a nonnegative integer");
    }
    return v.get<std::uint64_t>();
  }

  std::uint64_t unsigned_or(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? unsigned_integer(key) : fallback;
  }

  std::string string(const std::string& key) const {
    const auto& v = require(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }

  std::string string_or(const std::string& key, std::string fallback) const {
    return has(key) ? string(key) : std::move(fallback);
  }

  bool boolean_or(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = node_->at(key);
    if (!v.is_boolean()) fail(key, "expected true or false");
    return v.get<bool>();
  }

  std::vector<double> numbers(const std::string& key) const {
    const auto& v = require(key);
    if (!v.is_array()) fail(key, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], path(key) + "/" + std::to_string(i)));
    return out;
  }

  std::vector<double> numbers_or(const std::string& key, std::vector<double> fallback) const {
    return has(key) ? numbers(key) : std::move(fallback);
  }

  std::vector<std::string> strings(const std::string& key) const {
    const auto& v = require(key);
    if (!v.is_array()) fail(key, "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) doc_->fail(path(key) + "/" + std::to_string(i), "expected a string");
      out.push_back(v[i].get<std::string>());
    }
    return out;
  }

  std::vector<std::vector<double>> matrix(const std::string& key) const {
    const auto& v = require(key);
    if (!v.is_array()) fail(key, "expected an array of rows");
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string row_ptr = path(key) + "/" + std::to_string(i);
      if (!v[i].is_array()) doc_->fail(row_ptr, "expected an array of numbers");
      std::vector<double> row;
      for (std::size_t j = 0; j < v[i].size(); ++j) row.push_back(as_number(v[i][j], row_ptr + "/" + std::to_string(j)));
      out.push_back(std::move(row));
    }
    return out;
  }

 private:
  std::string path(const std::string& key) const { return pointer_ + "/" + key; }

  const nlohmann::json& require(const std::string& key) const {
    if (!has(key)) doc_->fail(pointer_, "missing key '" + key + "'");
    return node_->at(key);
  }

  double as_number(const nlohmann::json& v, const std::string& ptr) const {
    if (!v.is_number()) doc_->fail(ptr, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) doc_->fail(ptr, "must be finite");
    return d;
  }

  const ConfigDocument* doc_;
  const nlohmann::json* node_;
  std::string pointer_;
};

}  // namespace regen
