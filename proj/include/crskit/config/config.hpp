#pragma once

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "crskit/error.hpp"
#include "crskit/util/logging.hpp"
#include "crskit/util/strings.hpp"
#include "json.hpp"

namespace crskit::config {

using json = nlohmann::json;

// Hierarchical settings: string keys mapping to scalars, lists, or nested
// trees. Keys never contain '.', which is reserved for path addressing.
class ConfigTree {
 public:
  ConfigTree() : root_(json::object()) {}
  explicit ConfigTree(json root) : root_(std::move(root)) {
    if (!root_.is_object()) throw ConfigError("config root must be a mapping");
    check_keys(root_, "");
  }

  const json& root() const noexcept { return root_; }

  const json* find(std::string_view dotted) const {
    const json* node = &root_;
    for (const auto& part : path_of(dotted)) {
      if (!node->is_object()) return nullptr;
      auto it = node->find(part);
      if (it == node->end()) return nullptr;
      node = &*it;
    }
    return node;
  }

  bool contains(std::string_view dotted) const { return find(dotted) != nullptr; }

  const json& at(std::string_view dotted) const {
    const json* v = find(dotted);
    if (!v) throw MissingKeyError(std::string(dotted));
    return *v;
  }

  template <class T>
  T get(std::string_view dotted) const {
    const json& v = at(dotted);
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key " + std::string(dotted) + " has wrong type: " + v.dump());
    }
  }

  template <class T>
  T get(std::string_view dotted, T fallback) const {
    if (!contains(dotted)) return fallback;
    return get<T>(dotted);
  }

  // Builders only; a loaded tree is treated as immutable everywhere else.
  void set(std::string_view dotted, json value) {
    auto parts = path_of(dotted);
    json* node = &root_;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      json& child = (*node)[parts[i]];
      if (child.is_null()) child = json::object();
      if (!child.is_object())
        throw ConfigError("cannot set " + std::string(dotted) + ": " + parts[i] + " is not a mapping");
      node = &child;
    }
    (*node)[parts.back()] = std::move(value);
  }

  // Top-level-or-nested key names under a mapping node, sorted.
  std::vector<std::string> keys(std::string_view dotted) const {
    std::vector<std::string> out;
    const json* node = dotted.empty() ? &root_ : find(dotted);
    if (node && node->is_object())
      for (auto it = node->begin(); it != node->end(); ++it) out.push_back(it.key());
    return out;
  }

  friend bool operator==(const ConfigTree& a, const ConfigTree& b) { return a.root_ == b.root_; }

  static std::vector<std::string> path_of(std::string_view dotted) {
    if (dotted.empty()) throw ConfigError("empty config key");
    auto parts = util::split(dotted, '.');
    for (const auto& p : parts)
      if (p.empty()) throw ConfigError("malformed config key: " + std::string(dotted));
    return parts;
  }

 private:
  static void check_keys(const json& node, const std::string& where) {
    if (node.is_object()) {
      for (auto it = node.begin(); it != node.end(); ++it) {
        if (it.key().empty()) throw ConfigError("empty key under '" + where + "'");
        if (it.key().find('.') != std::string::npos)
          throw ConfigError("key contains '.': " + it.key());
        check_keys(it.value(), where.empty() ? it.key() : where + "." + it.key());
      }
    } else if (node.is_array()) {
      for (const auto& v : node) check_keys(v, where);
    }
  }

  json root_;
};

// Free-function accessors.
inline json get(const ConfigTree& config, std::string_view dotted_key) { return config.at(dotted_key); }

inline json get(const ConfigTree& config, std::string_view dotted_key, const json& fallback) {
  const json* v = config.find(dotted_key);
  return v ? *v : fallback;
}

namespace detail {

inline bool looks_like_int(std::string_view s) {
  static const std::regex re(R"([-+]?[0-9]+)");
  return std::regex_match(s.begin(), s.end(), re);
}

inline bool looks_like_float(std::string_view s) {
  static const std::regex re(R"([-+]?([0-9]+\.[0-9]*|\.[0-9]+|[0-9]+)([eE][-+]?[0-9]+)?)");
  return std::regex_match(s.begin(), s.end(), re);
}

inline json infer_scalar(const std::string& s) {
  if (s == "true" || s == "True") return true;
  if (s == "false" || s == "False") return false;
  if (looks_like_int(s)) {
    std::int64_t v = 0;
    auto first = s.data() + (s[0] == '+' ? 1 : 0);
    auto res = std::from_chars(first, s.data() + s.size(), v);
    if (res.ec == std::errc()) return v;
  }
  if (looks_like_float(s)) return std::strtod(s.c_str(), nullptr);
  return s;
}

inline json from_yaml(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
      return std::string();
    case YAML::NodeType::Scalar:
      if (node.Tag() == "!") return node.Scalar();
      if (node.Scalar() == "~" || node.Scalar() == "null") return std::string();
      return infer_scalar(node.Scalar());
    case YAML::NodeType::Sequence: {
      json arr = json::array();
      for (const auto& item : node) arr.push_back(from_yaml(item));
      return arr;
    }
    case YAML::NodeType::Map: {
      json obj = json::object();
      for (const auto& kv : node) {
        if (!kv.first.IsScalar())
          throw ConfigParseError("mapping keys must be scalars", kv.first.Mark().line + 1);
        const std::string key = kv.first.Scalar();
        if (key.empty()) throw ConfigParseError("empty key", kv.first.Mark().line + 1);
        if (key.find('.') != std::string::npos)
          throw ConfigParseError("key contains '.': " + key, kv.first.Mark().line + 1);
        if (obj.contains(key)) throw ConfigParseError("duplicate key: " + key, kv.first.Mark().line + 1);
        obj[key] = from_yaml(kv.second);
      }
      return obj;
    }
    default:
      throw ConfigParseError("unsupported config node", node.Mark().line + 1);
  }
}

inline bool needs_quotes(const std::string& s) {
  if (s.empty()) return true;
  if (infer_scalar(s).is_string() == false) return true;
  if (s == "~" || s == "null") return true;
  if (s != util::trim(s)) return true;
  static constexpr std::string_view leading = "-?:,[]{}#&*!|>'\"%@`";
  if (leading.find(s.front()) != std::string_view::npos) return true;
  if (s.find(": ") != std::string::npos || s.find(" #") != std::string::npos) return true;
  if (s.back() == ':') return true;
  for (char c : s)
    if (static_cast<unsigned char>(c) < 0x20) return true;
  return false;
}

inline std::string format_float(double v) {
  if (!std::isfinite(v)) throw ConfigError("non-finite float in config");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  // Prefer the shortest representation that round-trips.
  for (int prec = 1; prec < 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) {
      s = buf;
      break;
    }
  }
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

inline std::string format_scalar(const json& v) {
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_float()) return format_float(v.get<double>());
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    return needs_quotes(s) ? json(s).dump() : s;
  }
  throw ConfigError("not a scalar: " + v.dump());
}

inline void emit(const json& node, int indent, std::string& out);

inline void emit_entry_value(const json& value, int indent, std::string& out) {
  if (value.is_object() && !value.empty()) {
    out += "\n";
    emit(value, indent + 2, out);
  } else if (value.is_array() && !value.empty()) {
    out += "\n";
    emit(value, indent + 2, out);
  } else if (value.is_object()) {
    out += " {}\n";
  } else if (value.is_array()) {
    out += " []\n";
  } else {
    out += " " + format_scalar(value) + "\n";
  }
}

inline void emit(const json& node, int indent, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  if (node.is_object()) {
    for (auto it = node.begin(); it != node.end(); ++it) {
      out += pad + format_scalar(json(it.key())) + ":";
      emit_entry_value(it.value(), indent, out);
    }
  } else if (node.is_array()) {
    for (const auto& item : node) {
      if ((item.is_object() || item.is_array()) && !item.empty()) {
        std::string child;
        emit(item, indent + 2, child);
        // Replace the first line's indentation with the list marker.
        out += pad + "- " + child.substr(static_cast<std::size_t>(indent) + 2);
      } else if (item.is_object()) {
        out += pad + "- {}\n";
      } else if (item.is_array()) {
        out += pad + "- []\n";
      } else {
        out += pad + "- " + format_scalar(item) + "\n";
      }
    }
  }
}

inline void merge_into(json& base, const json& overlay) {
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    auto existing = base.find(it.key());
    if (existing != base.end() && existing->is_object() && it.value().is_object())
      merge_into(*existing, it.value());
    else
      base[it.key()] = it.value();
  }
}

}  // namespace detail

// Parses the indentation-based config text format.
inline ConfigTree parse_config_text(std::string_view text) {
  YAML::Node doc;
  try {
    doc = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ConfigParseError(e.msg, e.mark.line + 1);
  }
  if (doc.IsNull()) return ConfigTree();
  if (!doc.IsMap()) throw ConfigParseError("config root must be a mapping", doc.Mark().line + 1);
  return ConfigTree(detail::from_yaml(doc));
}

inline std::string to_config_text(const ConfigTree& config) {
  std::string out;
  detail::emit(config.root(), 0, out);
  return out;
}

// Right-most layer wins per dotted key; nested mappings are merged.
inline ConfigTree merge(const ConfigTree& base, const ConfigTree& overlay) {
  json merged = base.root();
  detail::merge_into(merged, overlay.root());
  return ConfigTree(std::move(merged));
}

// Coerces a command-line override string to the type of the value it replaces.
inline json coerce_override(const std::string& key, const std::string& text, const json* existing) {
  if (!existing || existing->is_string()) return text;
  const std::string t(util::trim(text));
  auto bad = [&](const char* what) {
    return ConfigError("override " + key + "=" + text + " is not a valid " + what);
  };
  if (existing->is_boolean()) {
    if (t == "true" || t == "1") return true;
    if (t == "false" || t == "0") return false;
    throw bad("bool");
  }
  if (existing->is_number_integer()) {
    if (!detail::looks_like_int(t)) throw bad("integer");
    return detail::infer_scalar(t);
  }
  if (existing->is_number_float()) {
    if (!detail::looks_like_float(t)) throw bad("float");
    return std::strtod(t.c_str(), nullptr);
  }
  // Lists and mappings are given in flow syntax, e.g. [1, 10, 50].
  ConfigTree wrapped = parse_config_text("v: " + t);
  const json& v = wrapped.at("v");
  if (existing->is_array() && !v.is_array()) throw bad("list");
  if (existing->is_object() && !v.is_object()) throw bad("mapping");
  return v;
}

struct LoadOptions {
  bool strict = true;  // unknown override keys: error when strict, warning otherwise
  ConfigTree defaults;
};

inline ConfigTree apply_overrides(const ConfigTree& base, const std::map<std::string, std::string>& overrides,
                                  bool strict) {
  ConfigTree out = base;
  for (const auto& [key, text] : overrides) {
    const json* existing = base.find(key);
    if (!existing) {
      if (strict) throw UnknownKeyError(key);
      util::logger()->warn("override key {} is not in the defaults or the config file", key);
    }
    out.set(key, coerce_override(key, text, existing));
  }
  return out;
}

// defaults ⊕ file ⊕ overrides.
inline ConfigTree load_config(const std::filesystem::path& file_path,
                              const std::map<std::string, std::string>& cli_overrides,
                              const LoadOptions& options = {}) {
  if (!std::filesystem::exists(file_path))
    throw ConfigError("config file not found: " + file_path.string());
  const ConfigTree file = parse_config_text(util::read_file(file_path));
  const ConfigTree base = merge(options.defaults, file);
  return apply_overrides(base, cli_overrides, options.strict);
}

enum class ValueType { String, Int, Float, Bool, List, Map };

inline const char* to_string(ValueType t) {
  switch (t) {
    case ValueType::String: return "string";
    case ValueType::Int: return "int";
    case ValueType::Float: return "float";
    case ValueType::Bool: return "bool";
    case ValueType::List: return "list";
    case ValueType::Map: return "map";
  }
  return "?";
}

struct SchemaEntry {
  ValueType type;
  bool required = true;
};

using Schema = std::map<std::string, SchemaEntry>;

struct Violation {
  std::string key;
  std::string message;
};

inline bool has_type(const json& v, ValueType t) {
  switch (t) {
    case ValueType::String: return v.is_string();
    case ValueType::Int: return v.is_number_integer();
    case ValueType::Float: return v.is_number();  // integers widen to float
    case ValueType::Bool: return v.is_boolean();
    case ValueType::List: return v.is_array();
    case ValueType::Map: return v.is_object();
  }
  return false;
}

inline std::vector<Violation> validate(const ConfigTree& config, const Schema& schema) {
  std::vector<Violation> out;
  for (const auto& [key, entry] : schema) {
    const json* v = config.find(key);
    if (!v) {
      if (entry.required) out.push_back({key, "required key is missing"});
      continue;
    }
    if (!has_type(*v, entry.type))
      out.push_back({key, std::string("expected ") + to_string(entry.type) + ", got " + v->dump()});
  }
  return out;
}

}  // namespace crskit::config
