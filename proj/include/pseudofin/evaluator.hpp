#ifndef PSEUDOFIN_EVALUATOR_HPP
#define PSEUDOFIN_EVALUATOR_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pseudofin/formula.hpp"
#include "pseudofin/structure.hpp"

namespace pseudofin {

inline constexpr ElemId kUnassigned = std::numeric_limits<ElemId>::max();
inline constexpr std::size_t kNoBound = kNoBoundPos;

struct UnassignedVariable : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A structure extended by a not-yet-applied delta. Cheap to build; never copies the base.
class OverlayView {
 public:
  OverlayView(const FinStructure& base, const ExtensionDelta& delta) : base_(base), delta_(delta) {
    extra_.resize(base.signature().size());
    for (const auto& [rel, t] : delta.tuples) extra_[rel].insert(t);
  }

  std::size_t size() const { return base_.size() + delta_.new_levels.size(); }
  const Signature& signature() const { return base_.signature(); }
  LevelOrdinal level(ElemId e) const {
    return e < base_.size() ? base_.level(e) : delta_.new_levels[e - base_.size()];
  }
  bool holds(std::size_t rel, std::span<const ElemId> args) const {
    for (ElemId e : args)
      if (e >= base_.size()) return extra_[rel].find(args) != extra_[rel].end();
    return base_.holds(rel, args);
  }

 private:
  const FinStructure& base_;
  const ExtensionDelta& delta_;
  std::vector<TupleSet> extra_;
};

enum class Truth : std::uint8_t { False, True, Unknown };

// A structure plus `extra` elements whose facts are not decided yet, except
// that R(e,...,e) on a new element e takes the value `diagonal[R]` when set.
class PartialView {
 public:
  PartialView(const FinStructure& base, std::size_t extra, const std::vector<std::optional<bool>>& diagonal)
      : base_(base), extra_(extra), diagonal_(diagonal) {}

  std::size_t size() const { return base_.size() + extra_; }
  const Signature& signature() const { return base_.signature(); }
  Truth holds3(std::size_t rel, std::span<const ElemId> args) const {
    bool fresh = false, same = true;
    for (ElemId e : args) {
      if (e >= base_.size()) fresh = true;
      if (e != args[0]) same = false;
    }
    if (!fresh) return base_.holds(rel, args) ? Truth::True : Truth::False;
    if (same && rel < diagonal_.size() && diagonal_[rel]) return *diagonal_[rel] ? Truth::True : Truth::False;
    return Truth::Unknown;
  }

 private:
  const FinStructure& base_;
  std::size_t extra_;
  const std::vector<std::optional<bool>>& diagonal_;
};

// A formula resolved against a signature, with every variable mapped to a slot
// of a flat environment. Free variables occupy slots 0..free_count()-1 in the
// order given at construction; each binder gets its own fresh slots after them.
class CompiledFormula {
 public:
  CompiledFormula(const Formula& f, const Signature& sig, const std::vector<std::string>& free_order) {
    check_signature(f, sig);
    for (const auto& v : free_order) {
      if (std::find(names_.begin(), names_.end(), v) != names_.end())
        throw std::invalid_argument("variable " + v + " listed twice");
      names_.push_back(v);
    }
    free_count_ = names_.size();
    slot_count_ = free_count_;
    std::vector<std::pair<std::string, std::size_t>> scope;
    for (std::size_t i = 0; i < free_count_; ++i) scope.emplace_back(names_[i], i);
    root_ = compile(f, sig, scope);
  }

  std::size_t free_count() const { return free_count_; }
  std::size_t slot_count() const { return slot_count_; }
  const std::vector<std::string>& free_names() const { return names_; }

  std::optional<std::size_t> slot_of(const std::string& v) const {
    for (std::size_t i = 0; i < free_count_; ++i)
      if (names_[i] == v) return i;
    return std::nullopt;
  }

  std::vector<ElemId> fresh_env() const { return std::vector<ElemId>(slot_count_, kUnassigned); }

  template <class View>
  bool eval(const View& m, std::vector<ElemId>& env) const {
    return eval_node(root_, m, env);
  }

  // Kleene evaluation under a partial assignment (kUnassigned marks holes).
  template <class View>
  Truth eval3(const View& m, std::vector<ElemId>& env) const {
    return eval3_node(root_, m, env);
  }

 private:
  struct Node {
    Formula::Kind kind;
    std::size_t rel = 0;
    std::vector<std::size_t> slots;  // Atom/Equal arguments, Exists bound slots
    std::size_t lhs = 0, rhs = 0;
    std::optional<LevelOrdinal> guard;
    std::vector<std::size_t> free_slots;
  };

  std::vector<Node> nodes_;
  std::vector<std::string> names_;
  std::size_t free_count_ = 0;
  std::size_t slot_count_ = 0;
  std::size_t root_ = 0;

  std::size_t compile(const Formula& f, const Signature& sig, std::vector<std::pair<std::string, std::size_t>>& scope) {
    auto resolve = [&](const std::string& v) -> std::size_t {
      for (auto it = scope.rbegin(); it != scope.rend(); ++it)
        if (it->first == v) return it->second;
      throw UnassignedVariable("free variable " + v + " has no slot");
    };
    Node n;
    n.kind = f.kind;
    switch (f.kind) {
      case Formula::Kind::Atom:
        n.rel = *sig.find(f.symbol);
        [[fallthrough]];
      case Formula::Kind::Equal:
        for (const auto& v : f.vars) n.slots.push_back(resolve(v));
        n.free_slots = n.slots;
        break;
      case Formula::Kind::Not:
        n.lhs = compile(f.children[0], sig, scope);
        n.free_slots = nodes_[n.lhs].free_slots;
        break;
      case Formula::Kind::And:
      case Formula::Kind::Or:
        n.lhs = compile(f.children[0], sig, scope);
        n.rhs = compile(f.children[1], sig, scope);
        n.free_slots = nodes_[n.lhs].free_slots;
        n.free_slots.insert(n.free_slots.end(), nodes_[n.rhs].free_slots.begin(), nodes_[n.rhs].free_slots.end());
        break;
      case Formula::Kind::Exists: {
        const std::size_t mark = scope.size();
        for (const auto& v : f.vars) {
          n.slots.push_back(slot_count_);
          scope.emplace_back(v, slot_count_++);
        }
        n.guard = f.guard;
        n.lhs = compile(f.children[0], sig, scope);
        scope.resize(mark);
        for (std::size_t s : nodes_[n.lhs].free_slots)
          if (std::find(n.slots.begin(), n.slots.end(), s) == n.slots.end()) n.free_slots.push_back(s);
        break;
      }
    }
    std::sort(n.free_slots.begin(), n.free_slots.end());
    n.free_slots.erase(std::unique(n.free_slots.begin(), n.free_slots.end()), n.free_slots.end());
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  template <class View>
  bool eval_node(std::size_t idx, const View& m, std::vector<ElemId>& env) const {
    const Node& n = nodes_[idx];
    switch (n.kind) {
      case Formula::Kind::Atom: {
        ElemId args[16];
        std::vector<ElemId> big;
        ElemId* p = args;
        if (n.slots.size() > 16) {
          big.resize(n.slots.size());
          p = big.data();
        }
        for (std::size_t i = 0; i < n.slots.size(); ++i) p[i] = env[n.slots[i]];
        return m.holds(n.rel, std::span<const ElemId>(p, n.slots.size()));
      }
      case Formula::Kind::Equal:
        return env[n.slots[0]] == env[n.slots[1]];
      case Formula::Kind::Not:
        return !eval_node(n.lhs, m, env);
      case Formula::Kind::And:
        return eval_node(n.lhs, m, env) && eval_node(n.rhs, m, env);
      case Formula::Kind::Or:
        return eval_node(n.lhs, m, env) || eval_node(n.rhs, m, env);
      case Formula::Kind::Exists:
        return exists_from(n, 0, m, env);
    }
    return false;
  }

  template <class View>
  bool exists_from(const Node& n, std::size_t k, const View& m, std::vector<ElemId>& env) const {
    if (k == n.slots.size()) return eval_node(n.lhs, m, env);
    const std::size_t slot = n.slots[k];
    const ElemId saved = env[slot];
    bool found = false;
    for (ElemId e = 0; e < m.size() && !found; ++e) {
      if (n.guard && !(m.level(e) <= *n.guard)) continue;
      env[slot] = e;
      found = exists_from(n, k + 1, m, env);
    }
    env[slot] = saved;
    return found;
  }

  template <class View>
  Truth eval3_node(std::size_t idx, const View& m, std::vector<ElemId>& env) const {
    const Node& n = nodes_[idx];
    bool complete = true;
    for (std::size_t s : n.free_slots)
      if (env[s] == kUnassigned) {
        complete = false;
        break;
      }
    if constexpr (requires { m.holds3(std::size_t{}, std::span<const ElemId>{}); }) {
      // Views with undetermined facts answer atoms themselves.
      if (complete && n.kind == Formula::Kind::Atom) {
        ElemId args[16];
        if (n.slots.size() > 16) return Truth::Unknown;
        for (std::size_t i = 0; i < n.slots.size(); ++i) args[i] = env[n.slots[i]];
        return m.holds3(n.rel, std::span<const ElemId>(args, n.slots.size()));
      }
      if (complete && n.kind == Formula::Kind::Equal) return env[n.slots[0]] == env[n.slots[1]] ? Truth::True : Truth::False;
    } else {
      if (complete) return eval_node(idx, m, env) ? Truth::True : Truth::False;
    }
    switch (n.kind) {
      case Formula::Kind::Not: {
        Truth t = eval3_node(n.lhs, m, env);
        return t == Truth::Unknown ? t : (t == Truth::True ? Truth::False : Truth::True);
      }
      case Formula::Kind::And: {
        Truth a = eval3_node(n.lhs, m, env);
        if (a == Truth::False) return a;
        Truth b = eval3_node(n.rhs, m, env);
        if (b == Truth::False) return b;
        return (a == Truth::True && b == Truth::True) ? Truth::True : Truth::Unknown;
      }
      case Formula::Kind::Or: {
        Truth a = eval3_node(n.lhs, m, env);
        if (a == Truth::True) return a;
        Truth b = eval3_node(n.rhs, m, env);
        if (b == Truth::True) return b;
        return (a == Truth::False && b == Truth::False) ? Truth::False : Truth::Unknown;
      }
      case Formula::Kind::Equal:
        if (n.slots[0] == n.slots[1]) return Truth::True;
        return Truth::Unknown;
      default:
        return Truth::Unknown;
    }
  }
};

// Tarskian truth of `f` under `assignment`, which must cover the free variables.
inline bool eval(const FinStructure& m, const Formula& f, const std::map<std::string, ElemId>& assignment) {
  const auto fv = free_variables(f);
  CompiledFormula cf(f, m.signature(), fv);
  auto env = cf.fresh_env();
  for (std::size_t i = 0; i < fv.size(); ++i) {
    auto it = assignment.find(fv[i]);
    if (it == assignment.end()) throw UnassignedVariable("unassigned free variable " + fv[i]);
    if (it->second >= m.size()) throw std::out_of_range("assignment mentions unknown element " + element_name(it->second));
    env[i] = it->second;
  }
  return cf.eval(m, env);
}

// ---------------------------------------------------------------------------
// Witness search

// Twin classes: elements u, v share a class iff the transposition (u v) is an
// automorphism of the structure (levels ignored).
inline std::vector<std::uint32_t> twin_classes(const FinStructure& m) {
  const std::size_t n = m.size();
  // incident[e]: (relation, tuple) pairs mentioning e
  std::vector<std::vector<std::pair<std::size_t, const Tuple*>>> incident(n);
  for (std::size_t r = 0; r < m.signature().size(); ++r)
    for (const Tuple& t : m.relation(r)) {
      for (std::size_t i = 0; i < t.size(); ++i) {
        bool first = true;
        for (std::size_t j = 0; j < i; ++j)
          if (t[j] == t[i]) first = false;
        if (first) incident[t[i]].emplace_back(r, &t);
      }
    }
  auto swap_ok = [&](ElemId u, ElemId v) {
    if (incident[u].size() != incident[v].size()) return false;
    Tuple img;
    for (ElemId src : {u, v})
      for (const auto& [r, tp] : incident[src]) {
        img = *tp;
        for (ElemId& e : img) e = e == u ? v : (e == v ? u : e);
        if (!m.holds(r, img)) return false;
      }
    return true;
  };
  // Coarse key: per relation, how many incident tuples and at which positions.
  std::map<std::vector<std::size_t>, std::vector<ElemId>> groups;
  for (ElemId e = 0; e < n; ++e) {
    std::vector<std::size_t> key;
    for (const auto& [r, tp] : incident[e]) {
      std::size_t mask = 0;
      for (std::size_t i = 0; i < tp->size(); ++i)
        if ((*tp)[i] == e) mask |= std::size_t{1} << i;
      key.push_back(r * 1024 + mask);
    }
    std::sort(key.begin(), key.end());
    groups[key].push_back(e);
  }
  std::vector<std::uint32_t> cls(n, 0);
  std::uint32_t next = 0;
  for (auto& [key, members] : groups) {
    std::vector<ElemId> reps;
    std::vector<std::uint32_t> rep_class;
    for (ElemId e : members) {
      bool placed = false;
      for (std::size_t i = 0; i < reps.size() && !placed; ++i)
        if (swap_ok(reps[i], e)) {
          cls[e] = rep_class[i];
          placed = true;
        }
      if (!placed) {
        reps.push_back(e);
        rep_class.push_back(next);
        cls[e] = next++;
      }
    }
  }
  return cls;
}

// Depth-first search for values of `slots` drawn from `pool` (ascending ids)
// making `cf` true. Other slots of `env` must already be assigned. Returns the
// lexicographically least witness. With `twins`, interchangeable candidates
// are tried once per position; `node_limit` (0 = none) aborts the search,
// reported through `exhausted`.
template <class View>
struct WitnessSearch {
  const View& m;
  const CompiledFormula& cf;
  std::span<const std::size_t> slots;
  std::span<const ElemId> pool;
  const std::vector<std::uint32_t>* twins = nullptr;
  std::size_t node_limit = 0;
  // Optional: after[k] = an earlier depth whose value bounds depth k from
  // below (interchangeable variables), or kNoBound.
  std::span<const std::size_t> after = {};

  std::size_t nodes = 0;
  bool exhausted = false;

  bool run(std::vector<ElemId>& env) {
    nodes = 0;
    exhausted = false;
    if (slots.empty()) return cf.eval(m, env);
    return step(0, env);
  }

 private:
  bool fixed(ElemId e, const std::vector<ElemId>& env, std::size_t depth) const {
    for (std::size_t s = 0; s < env.size(); ++s) {
      if (env[s] != e) continue;
      bool is_search_slot = false;
      for (std::size_t k = 0; k < slots.size(); ++k)
        if (slots[k] == s) {
          is_search_slot = k >= depth;
          break;
        }
      if (!is_search_slot) return true;
    }
    return false;
  }

  bool step(std::size_t depth, std::vector<ElemId>& env) {
    const std::size_t slot = slots[depth];
    std::vector<std::uint32_t> tried;
    const ElemId floor = (!after.empty() && after[depth] != kNoBound) ? env[slots[after[depth]]] : 0;
    for (ElemId c : pool) {
      if (c < floor) continue;
      if (node_limit && ++nodes > node_limit) {
        exhausted = true;
        env[slot] = kUnassigned;
        return false;
      }
      if (twins) {
        if (!fixed(c, env, depth)) {
          const std::uint32_t cls = (*twins)[c];
          if (std::find(tried.begin(), tried.end(), cls) != tried.end()) continue;
          tried.push_back(cls);
        }
      }
      env[slot] = c;
      if (depth + 1 == slots.size()) {
        if (cf.eval(m, env)) return true;
        continue;
      }
      if (cf.eval3(m, env) == Truth::False) continue;
      if (step(depth + 1, env)) return true;
      if (exhausted) return false;
    }
    env[slot] = kUnassigned;
    return false;
  }
};

// ---------------------------------------------------------------------------
// Definable sets

struct DefinableSet {
  Formula formula;
  std::vector<std::string> solution_vars;
  std::vector<std::pair<std::string, ElemId>> parameters;
  std::optional<LevelOrdinal> level_cap;

  std::vector<ElemId> parameter_values() const {
    std::vector<ElemId> out;
    for (const auto& p : parameters) out.push_back(p.second);
    return out;
  }
};

namespace detail {

inline CompiledFormula compile_set(const DefinableSet& d, const Signature& sig) {
  std::vector<std::string> order = d.solution_vars;
  for (const auto& [name, _] : d.parameters) order.push_back(name);
  for (const auto& v : free_variables(d.formula))
    if (std::find(order.begin(), order.end(), v) == order.end())
      throw UnassignedVariable("free variable " + v + " is neither a solution variable nor a parameter");
  return CompiledFormula(d.formula, sig, order);
}

template <class Visit>
void enumerate_solutions(const FinStructure& m, const DefinableSet& d, Visit&& visit) {
  CompiledFormula cf = compile_set(d, m.signature());
  auto env = cf.fresh_env();
  const std::size_t k = d.solution_vars.size();
  for (std::size_t i = 0; i < d.parameters.size(); ++i) {
    const ElemId p = d.parameters[i].second;
    if (p >= m.size()) throw std::out_of_range("parameter " + d.parameters[i].first + " = " + element_name(p) + " not in structure");
    env[k + i] = p;
  }
  const std::vector<ElemId> domain = d.level_cap ? m.v_set(*d.level_cap) : m.universe();
  if (k == 0) {
    if (cf.eval(m, env)) visit(env);
    return;
  }
  // Depth-first with Kleene pruning; visits in lexicographic order.
  std::vector<std::size_t> idx(k, 0);
  std::size_t depth = 0;
  while (true) {
    if (idx[depth] == domain.size()) {
      env[depth] = kUnassigned;
      if (depth == 0) return;
      --depth;
      ++idx[depth];
      continue;
    }
    env[depth] = domain[idx[depth]];
    if (depth + 1 == k) {
      if (cf.eval(m, env)) visit(env);
      ++idx[depth];
      continue;
    }
    if (cf.eval3(m, env) == Truth::False) {
      ++idx[depth];
      continue;
    }
    ++depth;
    idx[depth] = 0;
  }
}

}  // namespace detail

inline std::vector<Tuple> solutions(const FinStructure& m, const DefinableSet& d) {
  std::vector<Tuple> out;
  const std::size_t k = d.solution_vars.size();
  detail::enumerate_solutions(m, d, [&](const std::vector<ElemId>& env) { out.emplace_back(env.begin(), env.begin() + static_cast<std::ptrdiff_t>(k)); });
  return out;
}

inline std::uint64_t count(const FinStructure& m, const DefinableSet& d) {
  std::uint64_t n = 0;
  detail::enumerate_solutions(m, d, [&](const std::vector<ElemId>&) { ++n; });
  return n;
}

// Atomic diagrams of a b and a b# agree under the map fixing a pointwise and
// sending b_i to b#_i (equality included).
inline bool qf_type_equal(const FinStructure& m, std::span<const ElemId> b, std::span<const ElemId> b_sharp,
                          std::span<const ElemId> a) {
  if (b.size() != b_sharp.size()) throw std::invalid_argument("qf_type_equal: tuple length mismatch");
  std::vector<ElemId> lhs(a.begin(), a.end()), rhs(a.begin(), a.end());
  lhs.insert(lhs.end(), b.begin(), b.end());
  rhs.insert(rhs.end(), b_sharp.begin(), b_sharp.end());
  for (ElemId e : lhs)
    if (e >= m.size()) throw std::out_of_range("qf_type_equal: unknown element");
  for (ElemId e : rhs)
    if (e >= m.size()) throw std::out_of_range("qf_type_equal: unknown element");
  const std::size_t n = lhs.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if ((lhs[i] == lhs[j]) != (rhs[i] == rhs[j])) return false;
  Tuple tl, tr;
  for (std::size_t r = 0; r < m.signature().size(); ++r) {
    const std::size_t arity = m.signature().relations()[r].arity;
    if (n == 0 && arity > 0) continue;
    std::vector<std::size_t> pick(arity, 0);
    tl.resize(arity);
    tr.resize(arity);
    while (true) {
      for (std::size_t i = 0; i < arity; ++i) {
        tl[i] = lhs[pick[i]];
        tr[i] = rhs[pick[i]];
      }
      if (m.holds(r, tl) != m.holds(r, tr)) return false;
      std::size_t pos = 0;
      while (pos < arity && ++pick[pos] == n) pick[pos++] = 0;
      if (pos == arity) break;
    }
  }
  return true;
}

}  // namespace pseudofin

#endif  // PSEUDOFIN_EVALUATOR_HPP
