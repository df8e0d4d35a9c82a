#ifndef PSEUDOFIN_CONFIG_HPP
#define PSEUDOFIN_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "pseudofin/dimension.hpp"
#include "pseudofin/dividing.hpp"
#include "pseudofin/theory.hpp"

namespace pseudofin {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parameter values stay as text until a chain is at hand: "7" or "e7" name an
// element id, "w[2]" or "3[0]" the i-th element of a level in the final stage.
using Binding = std::pair<std::string, std::string>;

struct SetSpec {
  std::string name;
  std::string formula;
  std::vector<std::string> vars;
  std::vector<Binding> params;
  std::optional<LevelOrdinal> level;
};

struct ComparisonSpec {
  std::string name;
  std::string left, right;
  std::optional<VerdictKind> expect;
};

struct DividingSpec {
  std::string name;
  std::string phi;
  std::vector<std::string> x, y;
  std::vector<Binding> a;
  std::vector<std::string> b;
  std::size_t k = 2;
  std::size_t L = 3;
  std::optional<std::string> psi;
  std::optional<bool> expect_divides;
};

struct ExperimentConfig {
  std::string plugin;
  std::size_t stages = 0;
  std::size_t max_universe = 0;
  std::size_t window = 10;
  double bound = 2.0;
  std::uint64_t seed = 0;
  std::vector<SetSpec> sets;
  std::vector<ComparisonSpec> comparisons;
  std::vector<DividingSpec> dividing;

  const SetSpec& set(const std::string& name) const {
    for (const auto& s : sets)
      if (s.name == name) return s;
    throw ConfigError("unknown set '" + name + "'");
  }
};

namespace detail {

template <class T>
T scalar(const YAML::Node& n, const std::string& what) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("bad value for " + what);
  }
}

inline std::vector<std::string> string_list(const YAML::Node& n, const std::string& what) {
  if (!n) return {};
  if (n.IsScalar()) return {scalar<std::string>(n, what)};
  if (!n.IsSequence()) throw ConfigError(what + " must be a list");
  std::vector<std::string> out;
  for (const auto& e : n) out.push_back(scalar<std::string>(e, what));
  return out;
}

inline std::vector<Binding> bindings(const YAML::Node& n, const std::string& what) {
  std::vector<Binding> out;
  if (!n) return out;
  if (!n.IsMap()) throw ConfigError(what + " must be a map from variable to element");
  for (const auto& kv : n) out.emplace_back(scalar<std::string>(kv.first, what), scalar<std::string>(kv.second, what));
  return out;
}

inline void only_keys(const YAML::Node& n, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

inline std::optional<LevelOrdinal> level_of(const YAML::Node& n, const std::string& what) {
  if (!n) return std::nullopt;
  const auto s = scalar<std::string>(n, what);
  if (s == "none" || s == "all") return std::nullopt;
  try {
    return LevelOrdinal::parse(s);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  if (!root.IsMap()) throw ConfigError("config must be a map");
  detail::only_keys(root, {"plugin", "stages", "max_universe", "comparator", "seed", "sets", "comparisons", "dividing"}, "config");

  ExperimentConfig c;
  if (!root["plugin"]) throw ConfigError("config needs a plugin");
  c.plugin = detail::scalar<std::string>(root["plugin"], "plugin");
  if (root["stages"]) c.stages = detail::scalar<std::size_t>(root["stages"], "stages");
  if (root["max_universe"]) c.max_universe = detail::scalar<std::size_t>(root["max_universe"], "max_universe");
  if (root["seed"]) c.seed = detail::scalar<std::uint64_t>(root["seed"], "seed");
  if (auto cmp = root["comparator"]) {
    detail::only_keys(cmp, {"window", "bound"}, "comparator");
    if (cmp["window"]) c.window = detail::scalar<std::size_t>(cmp["window"], "comparator.window");
    if (cmp["bound"]) c.bound = detail::scalar<double>(cmp["bound"], "comparator.bound");
  }

  for (const auto& n : root["sets"]) {
    detail::only_keys(n, {"name", "formula", "vars", "params", "level"}, "set");
    SetSpec s;
    s.name = detail::scalar<std::string>(n["name"], "set name");
    s.formula = detail::scalar<std::string>(n["formula"], "set " + s.name + " formula");
    s.vars = detail::string_list(n["vars"], "set " + s.name + " vars");
    s.params = detail::bindings(n["params"], "set " + s.name + " params");
    s.level = detail::level_of(n["level"], "set " + s.name + " level");
    c.sets.push_back(std::move(s));
  }
  for (const auto& n : root["comparisons"]) {
    detail::only_keys(n, {"name", "left", "right", "expect"}, "comparison");
    ComparisonSpec s;
    s.left = detail::scalar<std::string>(n["left"], "comparison left");
    s.right = detail::scalar<std::string>(n["right"], "comparison right");
    s.name = n["name"] ? detail::scalar<std::string>(n["name"], "comparison name") : s.left + "_vs_" + s.right;
    if (n["expect"]) {
      try {
        s.expect = verdict_from_string(detail::scalar<std::string>(n["expect"], "comparison expect"));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    c.comparisons.push_back(std::move(s));
  }
  for (const auto& n : root["dividing"]) {
    detail::only_keys(n, {"name", "phi", "x", "y", "a", "b", "k", "L", "psi", "expect"}, "dividing experiment");
    DividingSpec s;
    s.name = detail::scalar<std::string>(n["name"], "dividing name");
    s.phi = detail::scalar<std::string>(n["phi"], s.name + " phi");
    s.x = detail::string_list(n["x"], s.name + " x");
    s.y = detail::string_list(n["y"], s.name + " y");
    s.a = detail::bindings(n["a"], s.name + " a");
    s.b = detail::string_list(n["b"], s.name + " b");
    if (n["k"]) s.k = detail::scalar<std::size_t>(n["k"], s.name + " k");
    if (n["L"]) s.L = detail::scalar<std::size_t>(n["L"], s.name + " L");
    if (n["psi"]) s.psi = detail::scalar<std::string>(n["psi"], s.name + " psi");
    if (n["expect"]) {
      const auto e = detail::scalar<std::string>(n["expect"], s.name + " expect");
      if (e != "divides" && e != "none") throw ConfigError(s.name + ": expect must be 'divides' or 'none'");
      s.expect_divides = e == "divides";
    }
    c.dividing.push_back(std::move(s));
  }
  return c;
}

// Checks every name and formula against the plugin before any chain work.
inline void validate_config(const ExperimentConfig& c) {
  const auto names = plugin_names();
  if (std::find(names.begin(), names.end(), c.plugin) == names.end()) {
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    throw ConfigError("unknown plugin '" + c.plugin + "' (available: " + list + ")");
  }
  const auto plugin = make_plugin(c.plugin);
  const Signature& sig = plugin->signature();
  std::set<std::string> seen;
  auto parse = [&](const std::string& text, const std::string& where) {
    try {
      return parse_formula(text, sig);
    } catch (const std::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
  };
  for (const auto& s : c.sets) {
    if (!seen.insert(s.name).second) throw ConfigError("duplicate set '" + s.name + "'");
    const Formula f = parse(s.formula, "set " + s.name);
    for (const auto& v : free_variables(f)) {
      bool known = std::find(s.vars.begin(), s.vars.end(), v) != s.vars.end();
      for (const auto& p : s.params) known |= p.first == v;
      if (!known) throw ConfigError("set " + s.name + ": variable " + v + " is neither in vars nor in params");
    }
  }
  for (const auto& cmp : c.comparisons) {
    c.set(cmp.left);
    c.set(cmp.right);
  }
  for (const auto& d : c.dividing) {
    const Formula f = parse(d.phi, d.name);
    if (!is_quantifier_free(f)) throw ConfigError(d.name + ": phi must be quantifier-free");
    if (d.b.size() != d.y.size()) throw ConfigError(d.name + ": b and y differ in length");
    if (d.k == 0) throw ConfigError(d.name + ": k must be positive");
    if (d.psi && c.set(*d.psi).vars != d.x) throw ConfigError(d.name + ": psi must use the same variables as x");
  }
  if (c.window == 0) throw ConfigError("comparator.window must be positive");
  if (!(c.bound > 0)) throw ConfigError("comparator.bound must be positive");
}

inline ElemId resolve_binding(const FinStructure& m, const std::string& text) {
  auto number = [&](const std::string& s) -> std::uint64_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) throw ConfigError("bad element reference '" + text + "'");
    return std::stoull(s);
  };
  std::uint64_t id;
  if (auto open = text.find('['); open != std::string::npos) {
    if (text.back() != ']') throw ConfigError("bad element reference '" + text + "'");
    LevelOrdinal lv;
    try {
      lv = LevelOrdinal::parse(text.substr(0, open));
    } catch (const std::invalid_argument&) {
      throw ConfigError("bad level in '" + text + "'");
    }
    const auto members = m.v_set(lv);
    const auto i = number(text.substr(open + 1, text.size() - open - 2));
    if (i >= members.size()) throw ConfigError("'" + text + "': level has only " + std::to_string(members.size()) + " elements");
    id = members[i];
  } else {
    id = number(!text.empty() && text[0] == 'e' ? text.substr(1) : text);
  }
  if (id >= m.size()) throw ConfigError("'" + text + "' is not an element of the final stage");
  return static_cast<ElemId>(id);
}

inline DefinableSet resolve_set(const SetSpec& s, const FinStructure& m) {
  DefinableSet d{parse_formula(s.formula, m.signature()), s.vars, {}, s.level};
  for (const auto& [v, ref] : s.params) d.parameters.emplace_back(v, resolve_binding(m, ref));
  return d;
}

inline DividingQuery resolve_dividing(const ExperimentConfig& c, const DividingSpec& s, const FinStructure& m) {
  DividingQuery q{parse_formula(s.phi, m.signature()), s.x, s.y, {}, {}, {}};
  for (const auto& [v, ref] : s.a) q.a.emplace_back(v, resolve_binding(m, ref));
  for (const auto& ref : s.b) q.b.push_back(resolve_binding(m, ref));
  q.level_cap = s.psi ? c.set(*s.psi).level : std::optional<LevelOrdinal>{LevelOrdinal::omega()};
  return q;
}

}  // namespace pseudofin

#endif  // PSEUDOFIN_CONFIG_HPP
