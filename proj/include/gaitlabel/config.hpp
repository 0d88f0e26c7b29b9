#pragma once

#include <map>
#include <string>

#include "gaitlabel/common.hpp"

namespace gaitlabel {

// Flat key=value configuration. '#' starts a comment; whitespace around keys
// and values is trimmed. Later assignments win.
class Config {
 public:
  static Config load(const std::string& path);
  static Config from_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) {
    values_[key] = value;
  }

  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace gaitlabel
