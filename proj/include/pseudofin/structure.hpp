#ifndef PSEUDOFIN_STRUCTURE_HPP
#define PSEUDOFIN_STRUCTURE_HPP

#include <algorithm>
#include <cstdint>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pseudofin/formula.hpp"
#include "pseudofin/level.hpp"

namespace pseudofin {

using ElemId = std::uint32_t;
using Tuple = std::vector<ElemId>;

struct TupleLess {
  using is_transparent = void;
  template <class A, class B>
  bool operator()(const A& a, const B& b) const {
    return std::lexicographical_compare(std::begin(a), std::end(a), std::begin(b), std::end(b));
  }
};

using TupleSet = std::set<Tuple, TupleLess>;

struct DeltaError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// New elements receive ids base, base+1, ... in order; every tuple mentions at
// least one of them. `base` must equal the size of the structure it applies to.
struct ExtensionDelta {
  std::size_t base = 0;
  std::vector<LevelOrdinal> new_levels;
  std::vector<std::pair<std::size_t, Tuple>> tuples;  // (relation index, tuple)

  bool empty() const { return new_levels.empty() && tuples.empty(); }
  friend bool operator==(const ExtensionDelta&, const ExtensionDelta&) = default;
};

// Finite relational structure over a fixed signature, together with the
// least-level map realizing the V_alpha chain: x is in V_alpha iff level(x) <= alpha.
// Element ids are 0..size()-1 and are never renamed by extensions.
class FinStructure {
 public:
  FinStructure() = default;
  explicit FinStructure(Signature sig) : sig_(std::move(sig)), relations_(sig_.size()) {}

  const Signature& signature() const { return sig_; }
  std::size_t size() const { return levels_.size(); }
  const std::vector<LevelOrdinal>& levels() const { return levels_; }
  LevelOrdinal level(ElemId e) const { return levels_.at(e); }
  const TupleSet& relation(std::size_t rel) const { return relations_.at(rel); }

  bool holds(std::size_t rel, std::span<const ElemId> args) const {
    const TupleSet& r = relations_[rel];
    return r.find(args) != r.end();
  }

  bool in_level(ElemId e, LevelOrdinal alpha) const { return levels_[e] <= alpha; }

  std::vector<ElemId> v_set(LevelOrdinal alpha) const {
    std::vector<ElemId> out;
    for (ElemId e = 0; e < levels_.size(); ++e)
      if (levels_[e] <= alpha) out.push_back(e);
    return out;
  }

  std::vector<ElemId> universe() const {
    std::vector<ElemId> out(levels_.size());
    for (ElemId e = 0; e < out.size(); ++e) out[e] = e;
    return out;
  }

  // Building primitives. Used while a structure is private to its builder.
  ElemId add_element(LevelOrdinal level) {
    levels_.push_back(level);
    return static_cast<ElemId>(levels_.size() - 1);
  }

  void add_tuple(std::size_t rel, Tuple t) {
    if (rel >= relations_.size()) throw std::out_of_range("relation index out of range");
    if (t.size() != sig_.relations()[rel].arity) throw DeltaError("tuple arity mismatch for " + sig_.relations()[rel].name);
    for (ElemId e : t)
      if (e >= size()) throw DeltaError("tuple mentions unknown element e" + std::to_string(e));
    relations_[rel].insert(std::move(t));
  }

  void apply_in_place(const ExtensionDelta& d) {
    check_delta(d);
    for (LevelOrdinal lv : d.new_levels) add_element(lv);
    for (const auto& [rel, t] : d.tuples) add_tuple(rel, t);
  }

  void check_delta(const ExtensionDelta& d) const {
    if (d.base != size())
      throw DeltaError("delta built for a structure of size " + std::to_string(d.base) + ", applied to size " +
                       std::to_string(size()));
    const std::size_t limit = size() + d.new_levels.size();
    for (const auto& [rel, t] : d.tuples) {
      if (rel >= sig_.size()) throw DeltaError("delta relation index out of range");
      if (t.size() != sig_.relations()[rel].arity) throw DeltaError("delta tuple arity mismatch");
      bool mentions_new = false;
      for (ElemId e : t) {
        if (e >= limit) throw DeltaError("delta references unknown element e" + std::to_string(e));
        if (e >= size()) mentions_new = true;
      }
      if (!mentions_new) throw DeltaError("delta tuple among existing elements would change the old diagram");
    }
  }

  // Substructure on ids 0..n-1.
  FinStructure restrict_to_prefix(std::size_t n) const {
    if (n > size()) throw std::out_of_range("prefix longer than universe");
    FinStructure out(sig_);
    out.levels_.assign(levels_.begin(), levels_.begin() + static_cast<std::ptrdiff_t>(n));
    for (std::size_t r = 0; r < relations_.size(); ++r)
      for (const Tuple& t : relations_[r])
        if (std::all_of(t.begin(), t.end(), [n](ElemId e) { return e < n; })) out.relations_[r].insert(t);
    return out;
  }

  friend bool operator==(const FinStructure&, const FinStructure&) = default;

 private:
  Signature sig_;
  std::vector<LevelOrdinal> levels_;
  std::vector<TupleSet> relations_;
};

inline std::vector<ElemId> v_set(const FinStructure& m, LevelOrdinal alpha) { return m.v_set(alpha); }

// Pure extension: the input is untouched.
inline FinStructure apply_delta(const FinStructure& m, const ExtensionDelta& d) {
  FinStructure out = m;
  out.apply_in_place(d);
  return out;
}

// True iff `big` restricted to the universe of `small` equals `small` (levels included).
inline bool is_substructure(const FinStructure& small, const FinStructure& big) {
  if (small.size() > big.size() || !(small.signature() == big.signature())) return false;
  return big.restrict_to_prefix(small.size()) == small;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::ordered_json level_to_json(LevelOrdinal lv) {
  return nlohmann::ordered_json::array({lv.is_finite() ? "Fin" : "OmegaPlus", lv.index});
}

inline LevelOrdinal level_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_string() || !j[1].is_number_unsigned())
    throw std::invalid_argument("bad level encoding");
  const std::string tag = j[0].get<std::string>();
  const auto index = j[1].get<std::uint32_t>();
  if (tag == "Fin") return LevelOrdinal::fin(index);
  if (tag == "OmegaPlus") return LevelOrdinal::omega_plus(index);
  throw std::invalid_argument("bad level tag " + tag);
}

inline nlohmann::ordered_json signature_to_json(const Signature& sig) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& r : sig.relations()) out.push_back(nlohmann::ordered_json::array({r.name, r.arity}));
  return out;
}

inline Signature signature_from_json(const nlohmann::ordered_json& j) {
  std::vector<RelationSymbol> rels;
  for (const auto& r : j) rels.push_back({r.at(0).get<std::string>(), r.at(1).get<std::size_t>()});
  return Signature(std::move(rels));
}

inline nlohmann::ordered_json structure_to_json(const FinStructure& m) {
  nlohmann::ordered_json j;
  j["signature"] = signature_to_json(m.signature());
  j["universe"] = m.universe();
  auto levels = nlohmann::ordered_json::array();
  for (LevelOrdinal lv : m.levels()) levels.push_back(level_to_json(lv));
  j["levels"] = std::move(levels);
  nlohmann::ordered_json rels = nlohmann::ordered_json::object();
  for (std::size_t r = 0; r < m.signature().size(); ++r) {
    auto tuples = nlohmann::ordered_json::array();
    for (const Tuple& t : m.relation(r)) tuples.push_back(t);
    rels[m.signature().relations()[r].name] = std::move(tuples);
  }
  j["relations"] = std::move(rels);
  return j;
}

inline FinStructure structure_from_json(const nlohmann::ordered_json& j) {
  FinStructure m(signature_from_json(j.at("signature")));
  const auto& universe = j.at("universe");
  const auto& levels = j.at("levels");
  if (universe.size() != levels.size()) throw std::invalid_argument("universe/levels length mismatch");
  for (std::size_t i = 0; i < universe.size(); ++i) {
    if (universe[i].get<std::size_t>() != i) throw std::invalid_argument("element ids must be 0..n-1 in order");
    m.add_element(level_from_json(levels[i]));
  }
  const auto& rels = j.at("relations");
  for (std::size_t r = 0; r < m.signature().size(); ++r) {
    const auto& name = m.signature().relations()[r].name;
    if (!rels.contains(name)) continue;
    for (const auto& t : rels.at(name)) m.add_tuple(r, t.get<Tuple>());
  }
  return m;
}

inline std::string element_name(ElemId e) { return "e" + std::to_string(e); }

}  // namespace pseudofin

#endif  // PSEUDOFIN_STRUCTURE_HPP
