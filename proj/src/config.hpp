#pragma once

#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "nvreg/error.hpp"

namespace nvreg::cli {

// A mapping in the config file. Every section declares its allowed keys once;
// anything else is a ConfigParse error naming the key and its line.
class Section {
 public:
  Section(YAML::Node node, std::string path);

  static Section load_file(const std::string& file);

  const std::string& path() const { return path_; }
  int line() const { return node_.Mark().line + 1; }
  bool has(const std::string& key) const { return bool(node_[key]); }

  void allow(std::initializer_list<const char*> keys) const;

  template <class T>
  T get(const std::string& key) const;
  template <class T>
  T get(const std::string& key, const T& fallback) const {
    return has(key) ? get<T>(key) : fallback;
  }

  Section child(const std::string& key) const;
  std::optional<Section> maybe_child(const std::string& key) const;
  std::vector<Section> child_list(const std::string& key) const;
  YAML::Node node(const std::string& key) const;

  [[noreturn]] void fail(const std::string& key, const std::string& what) const;

 private:
  YAML::Node node_;
  std::string path_;
};

// Evenly spaced grid: either `values: [...]` or `from/to/steps` (inclusive
// ends unless `endpoint: false`).
std::vector<double> read_grid(const Section& s);

}  // namespace nvreg::cli
