// Copyright 2026 The certctl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CERTCTL_CONFIG_HPP
#define CERTCTL_CONFIG_HPP

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "certctl/matrix.hpp"

namespace certctl {

/// Sectioned key = value configuration text. '#' and ';' start comments;
/// keys outside any [section] live in the "" section. Unknown keys are
/// rejected against a schema at load time.
class ConfigFile {
public:
  using Schema = std::map<std::string, std::set<std::string>>;

  static ConfigFile parse_string(const std::string& text) {
    ConfigFile cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string s = strip(line);
      if (s.empty() || s[0] == '#' || s[0] == ';') continue;
      if (s.front() == '[') {
        if (s.back() != ']')
          throw NumericError("config line " + std::to_string(lineno) + ": malformed section");
        section = strip(s.substr(1, s.size() - 2));
        cfg.sections_[section];
        continue;
      }
      const size_t eq = s.find('=');
      if (eq == std::string::npos)
        throw NumericError("config line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = strip(s.substr(0, eq));
      const std::string val = strip(s.substr(eq + 1));
      if (key.empty())
        throw NumericError("config line " + std::to_string(lineno) + ": empty key");
      cfg.sections_[section][key] = val;
    }
    return cfg;
  }

  static ConfigFile parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NumericError("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
  }

  /// Every present key must be declared; a schema entry maps a section name
  /// to its allowed keys.
  void validate(const Schema& schema) const {
    for (const auto& [sec, kv] : sections_) {
      const auto it = schema.find(sec);
      if (it == schema.end()) throw NumericError("config: unknown section [" + sec + "]");
      for (const auto& [key, _] : kv)
        if (!it->second.count(key))
          throw NumericError("config: unknown key '" + key + "' in section [" + sec + "]");
    }
  }

  bool has(const std::string& section, const std::string& key) const {
    const auto it = sections_.find(section);
    return it != sections_.end() && it->second.count(key) > 0;
  }

  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const {
    const auto it = sections_.find(section);
    if (it == sections_.end()) return fallback;
    const auto kit = it->second.find(key);
    return kit == it->second.end() ? fallback : kit->second;
  }

  double get_double(const std::string& section, const std::string& key, double fallback) const {
    if (!has(section, key)) return fallback;
    return std::stod(get(section, key, ""));
  }

  long get_int(const std::string& section, const std::string& key, long fallback) const {
    if (!has(section, key)) return fallback;
    return std::stol(get(section, key, ""));
  }

private:
  static std::string strip(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace certctl

#endif  // CERTCTL_CONFIG_HPP
