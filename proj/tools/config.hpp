#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace subfinsler::cli {

// Bad config file, bad override or bad value. The message carries the
// origin (file:line or --set) and the key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat `key = value` config. `#` starts a comment; blank lines are skipped.
// Lists are comma separated; point lists separate points with `;`.
// Overrides given with --set replace file values.
class Config {
 public:
  void load_file(const std::filesystem::path& path);
  void load_text(const std::string& text, const std::string& origin);
  // "key=value"
  void set_override(const std::string& assignment);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback);
  std::string require_string(const std::string& key);
  double get_double(const std::string& key, double fallback);
  long get_int(const std::string& key, long fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback);
  std::vector<std::size_t> get_sizes(const std::string& key, const std::vector<std::size_t>& fallback);
  std::vector<std::vector<double>> get_points(const std::string& key);

  // Throws for keys outside `known`, naming the first offender.
  void check_known(const std::set<std::string>& known) const;

  // Every value read so far, defaults included, as it was used.
  const nlohmann::json& resolved() const { return resolved_; }

 private:
  struct Entry {
    std::string value;
    std::string origin;
  };
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;
  const Entry* find(const std::string& key) const;

  std::map<std::string, Entry> entries_;
  nlohmann::json resolved_ = nlohmann::json::object();
};

}  // namespace subfinsler::cli
