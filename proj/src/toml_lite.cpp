#include "xbar/toml_lite.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "xbar/error.hpp"

namespace xbar {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.')
      return false;
  return true;
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& what) {
  throw Error(errc::config, origin + ":" + std::to_string(line) + ": " + what);
}

TomlValue parse_value(const std::string& raw, const std::string& origin, int line) {
  TomlValue v;
  v.line = line;
  if (raw.empty()) fail(origin, line, "missing value");

  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"') fail(origin, line, "unterminated string");
    v.kind = TomlValue::Kind::String;
    std::string out;
    for (size_t i = 1; i + 1 < raw.size(); ++i) {
      char c = raw[i];
      if (c == '\\') {
        if (i + 2 >= raw.size()) fail(origin, line, "dangling escape in string");
        char e = raw[++i];
        if (e == '"') out += '"';
        else if (e == '\\') out += '\\';
        else if (e == 'n') out += '\n';
        else if (e == 't') out += '\t';
        else fail(origin, line, std::string("unsupported escape \\") + e);
      } else if (c == '"') {
        fail(origin, line, "unescaped quote inside string");
      } else {
        out += c;
      }
    }
    v.s = out;
    return v;
  }
  if (raw == "true" || raw == "false") {
    v.kind = TomlValue::Kind::Boolean;
    v.b = raw == "true";
    return v;
  }

  // integer?
  {
    const char* p = raw.c_str();
    char* end = nullptr;
    errno = 0;
    long long iv = std::strtoll(p, &end, 10);
    if (end == p + raw.size() && errno == 0) {
      v.kind = TomlValue::Kind::Integer;
      v.i = iv;
      return v;
    }
  }
  // float?
  {
    const char* p = raw.c_str();
    char* end = nullptr;
    errno = 0;
    double fv = std::strtod(p, &end);
    if (end == p + raw.size() && errno == 0) {
      v.kind = TomlValue::Kind::Float;
      v.f = fv;
      return v;
    }
  }
  fail(origin, line, "cannot parse value '" + raw + "'");
}

// strips a trailing comment that is not inside a quoted string
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '\\' && quoted) {
      ++i;
      continue;
    }
    if (c == '"') quoted = !quoted;
    if (c == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

}  // namespace

TomlDoc TomlDoc::parse(const std::string& text, const std::string& origin) {
  TomlDoc doc;
  doc.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::string section;  // "" = root table
  int ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    std::string t = trim(strip_comment(line));
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') fail(origin, ln, "unterminated section header");
      std::string name = trim(t.substr(1, t.size() - 2));
      if (!valid_name(name)) fail(origin, ln, "bad section name '" + name + "'");
      if (doc.sections_.count(name)) fail(origin, ln, "duplicate section [" + name + "]");
      doc.sections_[name];  // create
      section = name;
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos) fail(origin, ln, "expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    if (!valid_name(key)) fail(origin, ln, "bad key '" + key + "'");
    Section& sec = doc.sections_[section];
    if (sec.count(key)) fail(origin, ln, "duplicate key '" + key + "'");
    sec[key] = parse_value(val, origin, ln);
  }
  return doc;
}

TomlDoc TomlDoc::parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(errc::config, "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

const TomlValue* TomlDoc::find(const std::string& section, const std::string& key) const {
  auto sit = sections_.find(section);
  if (sit == sections_.end()) return nullptr;
  auto kit = sit->second.find(key);
  return kit == sit->second.end() ? nullptr : &kit->second;
}

bool TomlDoc::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

namespace {

std::string locate(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}

}  // namespace

double TomlDoc::number(const std::string& section, const std::string& key,
                       double fallback) const {
  const TomlValue* v = find(section, key);
  if (v == nullptr) return fallback;
  if (v->kind == TomlValue::Kind::Float) return v->f;
  if (v->kind == TomlValue::Kind::Integer) return static_cast<double>(v->i);
  throw Error(errc::config,
              origin_ + ": " + locate(section, key) + " must be a number");
}

double TomlDoc::require_number(const std::string& section, const std::string& key) const {
  if (!has(section, key))
    throw Error(errc::config, origin_ + ": missing required key " + locate(section, key));
  return number(section, key, 0.0);
}

int64_t TomlDoc::integer(const std::string& section, const std::string& key,
                         int64_t fallback) const {
  const TomlValue* v = find(section, key);
  if (v == nullptr) return fallback;
  if (v->kind != TomlValue::Kind::Integer)
    throw Error(errc::config,
                origin_ + ": " + locate(section, key) + " must be an integer");
  return v->i;
}

std::string TomlDoc::text(const std::string& section, const std::string& key,
                          const std::string& fallback) const {
  const TomlValue* v = find(section, key);
  if (v == nullptr) return fallback;
  if (v->kind != TomlValue::Kind::String)
    throw Error(errc::config, origin_ + ": " + locate(section, key) + " must be a string");
  return v->s;
}

bool TomlDoc::boolean(const std::string& section, const std::string& key, bool fallback) const {
  const TomlValue* v = find(section, key);
  if (v == nullptr) return fallback;
  if (v->kind != TomlValue::Kind::Boolean)
    throw Error(errc::config, origin_ + ": " + locate(section, key) + " must be a boolean");
  return v->b;
}

}  // namespace xbar
