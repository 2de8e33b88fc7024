#pragma once

#include <map>
#include <string>

namespace rlqr {

// Flat key=value configuration. Lines starting with '#' are comments; keys
// are dotted lowercase names. Values keep their raw text until a typed getter
// parses them, so a manifest written by one run is a valid config for the
// next.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);  // throws ConfigError

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  // Typed getters fall back to the default when the key is absent and throw
  // ConfigError naming the key on malformed values.
  std::string get_str(const std::string& key, const std::string& dflt) const;
  double get_double(const std::string& key, double dflt) const;
  long get_long(const std::string& key, long dflt) const;
  bool get_bool(const std::string& key, bool dflt) const;

  const std::map<std::string, std::string>& items() const { return values_; }

  // Writes keys in sorted order with a comment header.
  void write(const std::string& path, const std::string& header) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace rlqr
