#include "ctce/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ctce {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

KeyValueFile KeyValueFile::parse_string(const std::string& text) {
  KeyValueFile kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: missing '=' on line " + std::to_string(lineno));
    kv.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return kv;
}

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_string(buf.str());
}

bool KeyValueFile::has(const std::string& key) const { return index_.count(key) > 0; }

void KeyValueFile::set(const std::string& key, const std::string& value) {
  auto it = index_.find(key);
  if (it != index_.end()) {
    entries_[it->second].second = value;
  } else {
    index_[key] = entries_.size();
    entries_.emplace_back(key, value);
  }
}

void KeyValueFile::set(const std::string& key, double value) {
  std::ostringstream os;
  os.precision(17);
  os << value;
  set(key, os.str());
}

void KeyValueFile::set(const std::string& key, int64_t value) { set(key, std::to_string(value)); }

void KeyValueFile::set(const std::string& key, bool value) {
  set(key, std::string(value ? "true" : "false"));
}

std::string KeyValueFile::get_string(const std::string& key, const std::string& fallback) const {
  auto it = index_.find(key);
  return it == index_.end() ? fallback : entries_[it->second].second;
}

double KeyValueFile::get_double(const std::string& key, double fallback) const {
  auto it = index_.find(key);
  if (it == index_.end()) return fallback;
  try {
    return std::stod(entries_[it->second].second);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' is not a number");
  }
}

int64_t KeyValueFile::get_int(const std::string& key, int64_t fallback) const {
  auto it = index_.find(key);
  if (it == index_.end()) return fallback;
  try {
    return std::stoll(entries_[it->second].second);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' is not an integer");
  }
}

bool KeyValueFile::get_bool(const std::string& key, bool fallback) const {
  auto it = index_.find(key);
  if (it == index_.end()) return fallback;
  const std::string& v = entries_[it->second].second;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: key '" + key + "' is not a boolean");
}

std::vector<double> KeyValueFile::get_double_list(const std::string& key,
                                                 const std::vector<double>& fallback) const {
  auto it = index_.find(key);
  if (it == index_.end()) return fallback;
  std::vector<double> out;
  std::istringstream is(entries_[it->second].second);
  std::string item;
  while (std::getline(is, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw std::invalid_argument("config: key '" + key + "' has a non-numeric list item");
    }
  }
  return out;
}

std::string KeyValueFile::dump() const {
  std::ostringstream os;
  for (const auto& [k, v] : entries_) os << k << " = " << v << "\n";
  return os.str();
}

void KeyValueFile::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("config: cannot write " + path);
  os << dump();
}

std::string config_hash(const std::string& text) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace ctce
