#include "config.hpp"

#include <cstdint>
#include <set>
#include <type_traits>

namespace nvreg::cli {

namespace {
std::string where(const YAML::Node& n) { return "line " + std::to_string(n.Mark().line + 1); }

template <class T>
const char* type_name() {
  if constexpr (std::is_same_v<T, bool>) return "a boolean";
  else if constexpr (std::is_integral_v<T>) return "an integer";
  else if constexpr (std::is_floating_point_v<T>) return "a number";
  else if constexpr (std::is_same_v<T, std::string>) return "a string";
  else return "a list of numbers";
}
}  // namespace

Section::Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
  if (!node_.IsMap()) throw Error(Errc::config_parse, "'" + path_ + "' at " + where(node_) + " must be a mapping");
}

Section Section::load_file(const std::string& file) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(file);
  } catch (const YAML::BadFile&) {
    throw Error(Errc::config_parse, "cannot open config file '" + file + "'");
  } catch (const YAML::ParserException& e) {
    throw Error(Errc::config_parse, "syntax error at line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root || root.IsNull()) throw Error(Errc::config_parse, "config file '" + file + "' is empty");
  return Section(root, "");
}

void Section::allow(std::initializer_list<const char*> keys) const {
  const std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& kv : node_) {
    const std::string k = kv.first.as<std::string>();
    if (!ok.count(k)) {
      std::string list;
      for (const auto& a : ok) list += (list.empty() ? "" : ", ") + a;
      throw Error(Errc::config_parse, "unknown key '" + (path_.empty() ? k : path_ + "." + k) + "' at " +
                                          where(kv.first) + " (allowed: " + list + ")");
    }
  }
}

void Section::fail(const std::string& key, const std::string& what) const {
  const YAML::Node n = node_[key];
  throw Error(Errc::config_parse,
              "key '" + (path_.empty() ? key : path_ + "." + key) + "' at " + where(n ? n : node_) + ": " + what);
}

template <class T>
T Section::get(const std::string& key) const {
  const YAML::Node n = node_[key];
  if (!n) fail(key, "missing required key");
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    fail(key, std::string("expected ") + type_name<T>());
  }
}

template bool Section::get<bool>(const std::string&) const;
template int Section::get<int>(const std::string&) const;
template long long Section::get<long long>(const std::string&) const;
template unsigned Section::get<unsigned>(const std::string&) const;
template std::uint64_t Section::get<std::uint64_t>(const std::string&) const;
template double Section::get<double>(const std::string&) const;
template std::string Section::get<std::string>(const std::string&) const;
template std::vector<double> Section::get<std::vector<double>>(const std::string&) const;
template std::vector<int> Section::get<std::vector<int>>(const std::string&) const;

Section Section::child(const std::string& key) const {
  const YAML::Node n = node_[key];
  if (!n) fail(key, "missing required section");
  if (!n.IsMap()) fail(key, "expected a mapping");
  return Section(n, path_.empty() ? key : path_ + "." + key);
}

std::optional<Section> Section::maybe_child(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return child(key);
}

std::vector<Section> Section::child_list(const std::string& key) const {
  const YAML::Node n = node_[key];
  if (!n) fail(key, "missing required list");
  if (!n.IsSequence()) fail(key, "expected a list");
  std::vector<Section> out;
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (!n[i].IsMap())
      throw Error(Errc::config_parse, "'" + key + "[" + std::to_string(i) + "]' at " + where(n[i]) + " must be a mapping");
    out.emplace_back(n[i], (path_.empty() ? key : path_ + "." + key) + "[" + std::to_string(i) + "]");
  }
  return out;
}

YAML::Node Section::node(const std::string& key) const { return node_[key]; }

std::vector<double> read_grid(const Section& s) {
  s.allow({"values", "from", "to", "steps", "endpoint"});
  if (s.has("values")) {
    if (s.has("from") || s.has("to") || s.has("steps")) s.fail("values", "give either values or from/to/steps");
    auto v = s.get<std::vector<double>>("values");
    if (v.empty()) s.fail("values", "grid is empty");
    return v;
  }
  const double a = s.get<double>("from"), b = s.get<double>("to");
  const int n = s.get<int>("steps");
  const bool endpoint = s.get<bool>("endpoint", true);
  if (n < 1) s.fail("steps", "must be >= 1");
  std::vector<double> v;
  if (n == 1) return {a};
  const double h = (b - a) / (endpoint ? n - 1 : n);
  for (int i = 0; i < n; ++i) v.push_back(a + i * h);
  return v;
}

}  // namespace nvreg::cli
