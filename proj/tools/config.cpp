#include "config.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

namespace subfinsler::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

bool parse_double(const std::string& text, double& out) {
  if (text == "inf" || text == "+inf") {
    out = std::numeric_limits<double>::infinity();
    return true;
  }
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end && !text.empty();
}

bool parse_long(const std::string& text, long& out) {
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end && !text.empty();
}

}  // namespace

void Config::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  load_text(ss.str(), path.string());
}

void Config::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string where = origin + ":" + std::to_string(number);
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": missing key");
    if (entries_.count(key) && entries_.at(key).origin.rfind(origin + ":", 0) == 0)
      throw ConfigError(where + ": key '" + key + "' repeats " + entries_.at(key).origin);
    entries_[key] = {value, where};
  }
}

void Config::set_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("--set " + assignment + ": expected key=value");
  const std::string key = trim(assignment.substr(0, eq));
  if (key.empty()) throw ConfigError("--set " + assignment + ": missing key");
  entries_[key] = {trim(assignment.substr(eq + 1)), "--set " + key};
}

const Config::Entry* Config::find(const std::string& key) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

void Config::fail(const std::string& key, const std::string& what) const {
  const Entry* e = find(key);
  throw ConfigError((e ? e->origin + ": " : std::string()) + "key '" + key + "': " + what);
}

std::string Config::get_string(const std::string& key, const std::string& fallback) {
  const Entry* e = find(key);
  const std::string v = e ? e->value : fallback;
  resolved_[key] = v;
  return v;
}

std::string Config::require_string(const std::string& key) {
  const Entry* e = find(key);
  if (!e || e->value.empty()) fail(key, "required");
  resolved_[key] = e->value;
  return e->value;
}

double Config::get_double(const std::string& key, double fallback) {
  double v = fallback;
  if (const Entry* e = find(key); e && !parse_double(e->value, v)) fail(key, "not a number: '" + e->value + "'");
  resolved_[key] = v;
  return v;
}

long Config::get_int(const std::string& key, long fallback) {
  long v = fallback;
  if (const Entry* e = find(key); e && !parse_long(e->value, v)) fail(key, "not an integer: '" + e->value + "'");
  resolved_[key] = v;
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) {
  bool v = fallback;
  if (const Entry* e = find(key)) {
    if (e->value == "true" || e->value == "1" || e->value == "yes") {
      v = true;
    } else if (e->value == "false" || e->value == "0" || e->value == "no") {
      v = false;
    } else {
      fail(key, "expected true or false, got '" + e->value + "'");
    }
  }
  resolved_[key] = v;
  return v;
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) {
  std::vector<double> v = fallback;
  if (const Entry* e = find(key)) {
    v.clear();
    for (const auto& item : split(e->value, ',')) {
      double d = 0.0;
      if (!parse_double(item, d)) fail(key, "not a number list: '" + e->value + "'");
      v.push_back(d);
    }
  }
  resolved_[key] = v;
  return v;
}

std::vector<std::size_t> Config::get_sizes(const std::string& key, const std::vector<std::size_t>& fallback) {
  std::vector<std::size_t> v = fallback;
  if (const Entry* e = find(key)) {
    v.clear();
    for (const auto& item : split(e->value, ',')) {
      long d = 0;
      if (!parse_long(item, d) || d < 0) fail(key, "not a list of nonnegative integers: '" + e->value + "'");
      v.push_back(static_cast<std::size_t>(d));
    }
  }
  resolved_[key] = v;
  return v;
}

std::vector<std::vector<double>> Config::get_points(const std::string& key) {
  std::vector<std::vector<double>> pts;
  if (const Entry* e = find(key)) {
    for (const auto& chunk : split(e->value, ';')) {
      if (chunk.empty()) continue;
      std::vector<double> p;
      for (const auto& item : split(chunk, ',')) {
        double d = 0.0;
        if (!parse_double(item, d)) fail(key, "not a point list: '" + e->value + "'");
        p.push_back(d);
      }
      pts.push_back(p);
    }
  }
  resolved_[key] = pts;
  return pts;
}

void Config::check_known(const std::set<std::string>& known) const {
  for (const auto& [key, e] : entries_)
    if (!known.count(key)) throw ConfigError(e.origin + ": unknown key '" + key + "' for this command");
}

}  // namespace subfinsler::cli
