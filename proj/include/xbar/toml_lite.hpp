#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace xbar {

// Minimal TOML subset: [section] headers (dotted names allowed), scalar
// key = value pairs (integer, float, boolean, double-quoted string), and #
// comments. That covers every config file this project ships; anything
// fancier is rejected with a line-numbered config error.
struct TomlValue {
  enum class Kind { Integer, Float, String, Boolean };
  Kind kind = Kind::Integer;
  int64_t i = 0;
  double f = 0.0;
  std::string s;
  bool b = false;
  int line = 0;
};

class TomlDoc {
 public:
  using Section = std::map<std::string, TomlValue>;

  static TomlDoc parse(const std::string& text, const std::string& origin = "<string>");
  static TomlDoc parse_file(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;

  // Typed lookups. The no-fallback forms throw a config error when the key is
  // missing; every form throws on a type mismatch (integers promote to double).
  double number(const std::string& section, const std::string& key, double fallback) const;
  double require_number(const std::string& section, const std::string& key) const;
  int64_t integer(const std::string& section, const std::string& key, int64_t fallback) const;
  std::string text(const std::string& section, const std::string& key,
                   const std::string& fallback) const;
  bool boolean(const std::string& section, const std::string& key, bool fallback) const;

  const std::map<std::string, Section>& sections() const { return sections_; }
  const std::string& origin() const { return origin_; }

 private:
  const TomlValue* find(const std::string& section, const std::string& key) const;

  std::map<std::string, Section> sections_;
  std::string origin_ = "<string>";
};

}  // namespace xbar
