#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ctce {

// Flat key = value text files, '#' comments, comma-separated lists.
// Keys keep insertion order so dumps are stable.
class KeyValueFile {
 public:
  KeyValueFile() = default;

  static KeyValueFile parse_string(const std::string& text);
  static KeyValueFile parse_file(const std::string& path);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, int64_t value);
  void set(const std::string& key, bool value);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;

  std::string dump() const;
  void save(const std::string& path) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, size_t> index_;
};

// FNV-1a over a string; used to stamp resolved configs into outputs.
std::string config_hash(const std::string& text);

}  // namespace ctce
