#ifndef PSEUDOFIN_THEORY_HPP
#define PSEUDOFIN_THEORY_HPP

#include <algorithm>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pseudofin/evaluator.hpp"
#include "pseudofin/formula.hpp"
#include "pseudofin/structure.hpp"

namespace pseudofin {

// forall x exists y matrix(x, y). An empty y list encodes a universal axiom.
struct Axiom {
  std::string label;
  Formula matrix;
  std::vector<std::string> x;
  std::vector<std::string> y;
};

struct Violation {
  std::string axiom;
  Tuple tuple;
  friend bool operator==(const Violation&, const Violation&) = default;
};

struct OracleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Attachments are built one new element at a time. After element s has its
// relations to the anchors and to new elements 0..s-1 fixed, the visitor sees
// the partial delta with decided = s + 1; decided == fresh means complete.
enum class Step { Prune, Continue, Stop };
using DeltaVisitor = std::function<Step(const ExtensionDelta&, std::size_t decided)>;

// A model-complete theory in a finite relational signature, given by its
// forall-exists axioms, a validity test for T_forall, and the family of ways to
// attach fresh elements to a finite model of T_forall.
//
// Every bundled theory has the amalgamation property and every finite model of
// T_forall embeds in a model of T, so "some model of T extending M realizes
// phi(a, y)" reduces to a search over one-step extensions of M.
class TheoryPlugin {
 public:
  virtual ~TheoryPlugin() = default;

  virtual std::string name() const = 0;
  virtual const Signature& signature() const = 0;

  // The axiom list is infinite; axiom(i) is its i-th member.
  virtual Axiom axiom(std::size_t i) const = 0;

  virtual std::vector<Violation> validate_t_forall(const FinStructure& m) const = 0;

  // Enumerates extensions of `m` by `fresh` new elements (all at `level`)
  // that keep T_forall, depth first in a fixed order of per-element choices.
  // Only the relations between new elements and `anchors` are varied; the rest
  // of each delta is the least completion the theory forces, so deltas with
  // the same choices agree on every fact over anchors plus new elements.
  virtual void attachments(const FinStructure& m, std::span<const ElemId> anchors, std::size_t fresh, LevelOrdinal level,
                           const DeltaVisitor& visit) const = 0;

  // Binary relations that are symmetric in every model of T_forall.
  virtual std::vector<std::string> symmetric_relations() const { return {}; }

  // Truth of R(e,...,e) in every model of T, per relation, when T decides it.
  virtual std::vector<std::optional<bool>> diagonal() const { return std::vector<std::optional<bool>>(signature().size()); }

  std::vector<Axiom> axioms(std::size_t count) const {
    std::vector<Axiom> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(axiom(i));
    return out;
  }
};

// ---------------------------------------------------------------------------
// Oracle

struct Witness {
  ExtensionDelta delta;
  Tuple b;  // values of the witness variables in the extended structure
  friend bool operator==(const Witness&, const Witness&) = default;
};

struct OracleQuery {
  const Formula& phi;
  const std::vector<std::string>& x;  // parameter variables, bound to `a`
  const std::vector<std::string>& y;  // witness variables
  std::span<const ElemId> a;
  LevelOrdinal level_for_new = LevelOrdinal::fin(0);
  // Old elements the witness may reuse; nullptr means the whole universe.
  const std::vector<ElemId>* reuse_pool = nullptr;
  bool check_precondition = true;
};

namespace detail {

// The base plus a delta whose first `decided` new elements are settled; facts
// touching a later new element are open unless fixed by `diagonal`.
class DeltaPartialView {
 public:
  DeltaPartialView(const FinStructure& base, const ExtensionDelta& d, std::size_t decided,
                   const std::vector<std::optional<bool>>& diagonal)
      : base_(base), d_(d), limit_(static_cast<ElemId>(base.size() + decided)), diagonal_(diagonal) {}

  std::size_t size() const { return base_.size() + d_.new_levels.size(); }
  const Signature& signature() const { return base_.signature(); }
  Truth holds3(std::size_t rel, std::span<const ElemId> args) const {
    bool fresh = false, open = false, same = true;
    for (ElemId e : args) {
      if (e >= base_.size()) fresh = true;
      if (e >= limit_) open = true;
      if (e != args[0]) same = false;
    }
    if (!fresh) return base_.holds(rel, args) ? Truth::True : Truth::False;
    if (same && rel < diagonal_.size() && diagonal_[rel]) return *diagonal_[rel] ? Truth::True : Truth::False;
    if (open) return Truth::Unknown;
    for (const auto& [r, t] : d_.tuples)
      if (r == rel && std::equal(t.begin(), t.end(), args.begin(), args.end())) return Truth::True;
    return Truth::False;
  }

 private:
  const FinStructure& base_;
  const ExtensionDelta& d_;
  ElemId limit_;
  const std::vector<std::optional<bool>>& diagonal_;
};

class OracleSearch {
 public:
  OracleSearch(const TheoryPlugin& plugin, const FinStructure& m, const OracleQuery& q, const CompiledFormula& cf,
               std::span<const ElemId> pool)
      : plugin_(plugin), m_(m), q_(q), cf_(cf), pool_(pool), diagonal_(plugin.diagonal()),
        view_(m, q.y.size(), diagonal_),
        after_(interchangeable_chain(q.phi, q.y, plugin.symmetric_relations())) {}

  std::optional<Witness> run(const std::vector<std::uint32_t>* twins, std::size_t node_limit) {
    twins_ = twins;
    node_limit_ = node_limit;
    nodes_ = 0;
    exhausted_ = false;
    for (std::size_t w = 0; w <= q_.y.size(); ++w) {
      fresh_ = w;
      env_ = cf_.fresh_env();
      for (std::size_t i = 0; i < q_.a.size(); ++i) env_[i] = q_.a[i];
      mapping_.assign(q_.y.size(), kUnassigned);
      best_.reset();
      if (dfs(0, 0)) return best_;
      if (exhausted_) return std::nullopt;
    }
    return std::nullopt;
  }

  bool exhausted() const { return exhausted_; }

 private:
  const TheoryPlugin& plugin_;
  const FinStructure& m_;
  const OracleQuery& q_;
  const CompiledFormula& cf_;
  std::span<const ElemId> pool_;
  const std::vector<std::uint32_t>* twins_ = nullptr;
  std::size_t node_limit_ = 0;
  std::size_t nodes_ = 0;
  bool exhausted_ = false;
  std::size_t fresh_ = 0;
  std::vector<ElemId> env_;
  Tuple mapping_;
  std::optional<Witness> best_;
  std::vector<std::optional<bool>> diagonal_;
  PartialView view_;
  std::vector<std::size_t> after_;  // interchangeable witness positions take sorted values

  std::size_t y_slot(std::size_t pos) const { return q_.x.size() + pos; }

  bool fixed(ElemId e, std::size_t pos) const {
    if (std::find(q_.a.begin(), q_.a.end(), e) != q_.a.end()) return true;
    for (std::size_t i = 0; i < pos; ++i)
      if (mapping_[i] == e) return true;
    return false;
  }

  // New slot s is the virtual element base + s; its facts stay undecided
  // until the leaf, so pruning only uses what every attachment agrees on.
  bool dfs(std::size_t pos, std::size_t created) {
    if (created + (q_.y.size() - pos) < fresh_) return false;
    if (pos == q_.y.size()) return created == fresh_ && leaf();
    const ElemId base = static_cast<ElemId>(m_.size());
    const std::size_t slot = y_slot(pos);
    const ElemId floor = after_[pos] == kNoBoundPos ? 0 : mapping_[after_[pos]];
    std::vector<std::uint32_t> tried;
    for (ElemId c : pool_) {
      if (c < floor) continue;
      if (node_limit_ && ++nodes_ > node_limit_) {
        exhausted_ = true;
        return false;
      }
      if (twins_ && !fixed(c, pos)) {
        const std::uint32_t cls = (*twins_)[c];
        if (std::find(tried.begin(), tried.end(), cls) != tried.end()) continue;
        tried.push_back(cls);
      }
      if (try_value(pos, c, created)) return true;
      if (exhausted_) return false;
    }
    for (std::size_t s = 0; s < created; ++s) {
      if (base + s < floor) continue;
      if (try_value(pos, base + static_cast<ElemId>(s), created)) return true;
      if (exhausted_) return false;
    }
    if (created < fresh_ && try_value(pos, base + static_cast<ElemId>(created), created + 1)) return true;
    mapping_[pos] = kUnassigned;
    env_[slot] = kUnassigned;
    return false;
  }

  bool try_value(std::size_t pos, ElemId value, std::size_t created) {
    mapping_[pos] = value;
    env_[y_slot(pos)] = value;
    if (cf_.eval3(view_, env_) == Truth::False) return false;
    return dfs(pos + 1, created);
  }

  bool leaf() {
    const ElemId base = static_cast<ElemId>(m_.size());
    std::vector<ElemId> anchors(q_.a.begin(), q_.a.end());
    for (ElemId e : mapping_)
      if (e < base) anchors.push_back(e);
    std::sort(anchors.begin(), anchors.end());
    anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());
    std::vector<ElemId> env = env_;
    std::optional<ExtensionDelta> chosen;
    if (fresh_ == 0) {
      if (cf_.eval(m_, env)) chosen = ExtensionDelta{m_.size(), {}, {}};
    } else {
      // First attachment in the plugin's order; partial ones are pruned by
      // Kleene evaluation with the undecided facts left open.
      plugin_.attachments(m_, anchors, fresh_, q_.level_for_new, [&](const ExtensionDelta& d, std::size_t decided) {
        if (decided < fresh_) {
          DeltaPartialView view(m_, d, decided, diagonal_);
          return cf_.eval3(view, env) == Truth::False ? Step::Prune : Step::Continue;
        }
        OverlayView view(m_, d);
        if (!cf_.eval(view, env)) return Step::Prune;
        chosen = d;
        std::sort(chosen->tuples.begin(), chosen->tuples.end());
        return Step::Stop;
      });
    }
    if (!chosen) return false;
    best_ = Witness{std::move(*chosen), mapping_};
    return true;
  }
};

inline constexpr std::size_t kOracleNodeLimit = 200000;

}  // namespace detail

// Decides whether some model of T extending M realizes phi(a, y). On success
// returns the witness with the fewest new elements, ties broken by the
// lexicographically least (b, tuples) encoding. New elements get
// `level_for_new`; old elements in b come from `reuse_pool`.
inline std::optional<Witness> extends_with_witness(const TheoryPlugin& plugin, const FinStructure& m, const OracleQuery& q) {
  if (!is_quantifier_free(q.phi)) throw OracleError("extends_with_witness: formula is not quantifier-free");
  if (q.a.size() != q.x.size()) throw OracleError("extends_with_witness: parameter tuple has wrong length");
  for (ElemId e : q.a)
    if (e >= m.size()) throw OracleError("extends_with_witness: parameter " + element_name(e) + " not in structure");
  if (q.check_precondition) {
    auto v = plugin.validate_t_forall(m);
    if (!v.empty()) throw OracleError("extends_with_witness: structure violates T_forall (" + v.front().axiom + ")");
  }
  std::vector<std::string> order = q.x;
  order.insert(order.end(), q.y.begin(), q.y.end());
  for (const auto& v : free_variables(q.phi))
    if (std::find(order.begin(), order.end(), v) == order.end())
      throw OracleError("extends_with_witness: free variable " + v + " not in the split");
  CompiledFormula cf(q.phi, m.signature(), order);
  std::vector<ElemId> universe;
  std::span<const ElemId> pool;
  if (q.reuse_pool) {
    pool = *q.reuse_pool;
  } else {
    universe = m.universe();
    pool = universe;
  }
  detail::OracleSearch search(plugin, m, q, cf, pool);
  auto result = search.run(nullptr, detail::kOracleNodeLimit);
  if (!search.exhausted()) return result;
  const auto twins = twin_classes(m);
  return search.run(&twins, 0);
}

inline std::optional<Witness> extends_with_witness(const TheoryPlugin& plugin, const FinStructure& m, const Formula& phi,
                                                   const std::vector<std::string>& x, const std::vector<std::string>& y,
                                                   std::span<const ElemId> a, LevelOrdinal level_for_new) {
  return extends_with_witness(plugin, m, OracleQuery{phi, x, y, a, level_for_new});
}

// A constraint phi(x; p) with its parameter variables bound to elements.
struct Constraint {
  Formula phi;
  std::vector<std::pair<std::string, ElemId>> parameters;
};

// True iff some model of T extending M has one tuple for `shared` satisfying every constraint.
inline bool jointly_realizable(const TheoryPlugin& plugin, const FinStructure& m, const std::vector<Constraint>& constraints,
                               const std::vector<std::string>& shared, bool check_precondition = true) {
  if (constraints.empty()) return true;
  std::vector<Formula> parts;
  std::vector<std::string> params;
  Tuple values;
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    const auto& c = constraints[i];
    if (!is_quantifier_free(c.phi)) throw OracleError("jointly_realizable: formula is not quantifier-free");
    std::vector<std::pair<std::string, std::string>> renaming;
    for (const auto& [name, value] : c.parameters) {
      if (std::find(shared.begin(), shared.end(), name) != shared.end())
        throw OracleError("jointly_realizable: parameter " + name + " clashes with a shared variable");
      std::string fresh = "_p" + std::to_string(i) + "_" + name;
      renaming.emplace_back(name, fresh);
      params.push_back(fresh);
      values.push_back(value);
    }
    Formula renamed = rename_variables(c.phi, renaming);
    for (const auto& v : free_variables(renamed))
      if (std::find(shared.begin(), shared.end(), v) == shared.end() &&
          std::find(params.begin(), params.end(), v) == params.end())
        throw OracleError("jointly_realizable: free variable " + v + " is neither shared nor a parameter");
    parts.push_back(std::move(renamed));
  }
  Formula conj = Formula::conj_all(std::move(parts));
  OracleQuery q{conj, params, shared, values, LevelOrdinal::fin(0)};
  q.check_precondition = check_precondition;
  return extends_with_witness(plugin, m, q).has_value();
}

// Existential-type refinement of qf_type_equal for theories without quantifier
// elimination: additionally requires that every probe formula theta(a, b; y)
// is realizable over (a, b) exactly when it is over (a, b#).
inline bool existential_type_equal(const TheoryPlugin& plugin, const FinStructure& m, std::span<const ElemId> b,
                                   std::span<const ElemId> b_sharp, std::span<const ElemId> a,
                                   const std::vector<Axiom>& probes) {
  if (!qf_type_equal(m, b, b_sharp, a)) return false;
  std::vector<ElemId> lhs(a.begin(), a.end()), rhs(a.begin(), a.end());
  lhs.insert(lhs.end(), b.begin(), b.end());
  rhs.insert(rhs.end(), b_sharp.begin(), b_sharp.end());
  for (const auto& probe : probes) {
    if (probe.x.size() != lhs.size()) continue;
    OracleQuery ql{probe.matrix, probe.x, probe.y, lhs, LevelOrdinal::fin(0)};
    OracleQuery qr{probe.matrix, probe.x, probe.y, rhs, LevelOrdinal::fin(0)};
    ql.check_precondition = qr.check_precondition = false;
    if (extends_with_witness(plugin, m, ql).has_value() != extends_with_witness(plugin, m, qr).has_value()) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Bundled theories

namespace detail {

inline std::vector<std::string> numbered(const char* stem, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

// x_i = x_j for some i < j; nullopt when fewer than two variables.
inline std::optional<Formula> some_pair_equal(const std::vector<std::string>& xs) {
  std::optional<Formula> acc;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      Formula eq = Formula::equal(xs[i], xs[j]);
      acc = acc ? Formula::disj(std::move(*acc), std::move(eq)) : std::move(eq);
    }
  return acc;
}

inline void push_symmetric(ExtensionDelta& d, std::size_t rel, ElemId u, ElemId v) {
  d.tuples.emplace_back(rel, Tuple{u, v});
  if (u != v) d.tuples.emplace_back(rel, Tuple{v, u});
}

inline void sort_delta(ExtensionDelta& d) {
  std::sort(d.tuples.begin(), d.tuples.end());
  d.tuples.erase(std::unique(d.tuples.begin(), d.tuples.end()), d.tuples.end());
}

// One-point extension axiom of a graph: every k distinct vertices (with the
// `adjacent` subset independent when `independent_only`) have a common new
// vertex adjacent to exactly that subset.
inline Axiom graph_extension_axiom(std::size_t k, std::size_t mask, bool independent_only) {
  auto xs = numbered("x", k);
  std::vector<Formula> parts;
  for (std::size_t i = 0; i < k; ++i) parts.push_back(Formula::negate(Formula::equal("y", xs[i])));
  for (std::size_t i = 0; i < k; ++i) {
    Formula edge = Formula::atom("R", {xs[i], "y"});
    parts.push_back((mask >> i) & 1u ? std::move(edge) : Formula::negate(std::move(edge)));
  }
  Formula ext = parts.empty() ? Formula::equal("y", "y") : Formula::conj_all(std::move(parts));
  std::optional<Formula> escape = some_pair_equal(xs);
  if (independent_only)
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j)
        if (((mask >> i) & 1u) && ((mask >> j) & 1u)) {
          Formula edge = Formula::atom("R", {xs[i], xs[j]});
          escape = escape ? Formula::disj(std::move(*escape), std::move(edge)) : std::move(edge);
        }
  Formula matrix = escape ? Formula::disj(std::move(*escape), std::move(ext)) : std::move(ext);
  std::string label = "ext" + std::to_string(k) + "_";
  for (std::size_t i = 0; i < k; ++i) label += ((mask >> i) & 1u) ? '1' : '0';
  return Axiom{label, std::move(matrix), xs, {"y"}};
}

// Enumerates graph extension axioms by k = 1, 2, ... and then adjacency mask.
inline Axiom graph_extension_axiom_at(std::size_t i, bool independent_only) {
  std::size_t k = 1;
  while (i >= (std::size_t{1} << k)) {
    i -= std::size_t{1} << k;
    ++k;
  }
  return graph_extension_axiom(k, i, independent_only);
}

}  // namespace detail

// Pure equality; T says the universe is infinite.
class InfiniteSet final : public TheoryPlugin {
 public:
  std::string name() const override { return "infinite_set"; }
  const Signature& signature() const override { return sig_; }

  Axiom axiom(std::size_t i) const override {
    auto xs = detail::numbered("x", i + 1);
    std::vector<Formula> parts;
    for (const auto& x : xs) parts.push_back(Formula::negate(Formula::equal("y", x)));
    return Axiom{"new" + std::to_string(i + 1), Formula::conj_all(std::move(parts)), xs, {"y"}};
  }

  std::vector<Violation> validate_t_forall(const FinStructure&) const override { return {}; }

  void attachments(const FinStructure& m, std::span<const ElemId>, std::size_t fresh, LevelOrdinal level,
                   const DeltaVisitor& visit) const override {
    ExtensionDelta d{m.size(), std::vector<LevelOrdinal>(fresh, level), {}};
    for (std::size_t s = 1; s <= fresh; ++s)
      if (visit(d, s) != Step::Continue) return;
  }

 private:
  Signature sig_;
};

// The random graph: irreflexive symmetric R with all one-point extension axioms.
class RandomGraph : public TheoryPlugin {
 public:
  RandomGraph() : sig_({{"R", 2}}) {}

  std::string name() const override { return "random_graph"; }
  std::vector<std::optional<bool>> diagonal() const override { return {false}; }
  std::vector<std::string> symmetric_relations() const override { return {"R"}; }
  const Signature& signature() const override { return sig_; }

  Axiom axiom(std::size_t i) const override {
    if (i == 0) return Axiom{"irreflexive", Formula::negate(Formula::atom("R", {"x0", "x0"})), {"x0"}, {}};
    if (i == 1)
      return Axiom{"symmetric",
                   Formula::disj(Formula::negate(Formula::atom("R", {"x0", "x1"})), Formula::atom("R", {"x1", "x0"})),
                   {"x0", "x1"},
                   {}};
    return detail::graph_extension_axiom_at(i - 2, false);
  }

  std::vector<Violation> validate_t_forall(const FinStructure& m) const override {
    std::vector<Violation> out;
    for (const Tuple& t : m.relation(0)) {
      if (t[0] == t[1]) out.push_back({"irreflexive", t});
      else if (!m.holds(0, Tuple{t[1], t[0]})) out.push_back({"symmetric", t});
    }
    return out;
  }

  // Per new element s: a bitmask over (anchors, new elements 0..s-1), ascending.
  void attachments(const FinStructure& m, std::span<const ElemId> anchors, std::size_t fresh, LevelOrdinal level,
                   const DeltaVisitor& visit) const override {
    const ElemId base = static_cast<ElemId>(m.size());
    ExtensionDelta d{m.size(), std::vector<LevelOrdinal>(fresh, level), {}};
    std::vector<ElemId> targets(anchors.begin(), anchors.end());
    bool stop = false;
    std::function<void(std::size_t)> rec = [&](std::size_t s) {
      const ElemId self = base + static_cast<ElemId>(s);
      const std::size_t bits = targets.size();
      if (bits >= 63) throw OracleError("attachment space too large");
      const std::size_t mark = d.tuples.size();
      for (std::uint64_t code = 0; code < (std::uint64_t{1} << bits) && !stop; ++code) {
        d.tuples.resize(mark);
        std::vector<ElemId> nbrs;
        for (std::size_t b = 0; b < bits; ++b)
          if ((code >> b) & 1u) {
            detail::push_symmetric(d, 0, targets[b], self);
            nbrs.push_back(targets[b]);
          }
        if (!admissible(m, d, nbrs)) continue;
        const Step step = visit(d, s + 1);
        if (step == Step::Stop) stop = true;
        if (step != Step::Continue || s + 1 == fresh) continue;
        targets.push_back(self);
        rec(s + 1);
        targets.pop_back();
      }
      d.tuples.resize(mark);
    };
    if (fresh > 0) rec(0);
  }

 protected:
  RandomGraph(Signature sig) : sig_(std::move(sig)) {}
  // Whether giving the newest element the neighbours `nbrs` keeps T_forall.
  virtual bool admissible(const FinStructure&, const ExtensionDelta&, const std::vector<ElemId>&) const { return true; }

  Signature sig_;
};

// The generic triangle-free graph (Henson graph).
class HensonTriangleFree final : public RandomGraph {
 public:
  HensonTriangleFree() : RandomGraph(Signature({{"R", 2}})) {}

  std::string name() const override { return "henson_triangle_free"; }

  Axiom axiom(std::size_t i) const override {
    if (i < 2) return RandomGraph::axiom(i);
    if (i == 2)
      return Axiom{"triangle_free",
                   Formula::negate(Formula::conj_all({Formula::atom("R", {"x0", "x1"}), Formula::atom("R", {"x1", "x2"}),
                                                      Formula::atom("R", {"x0", "x2"})})),
                   {"x0", "x1", "x2"},
                   {}};
    return detail::graph_extension_axiom_at(i - 3, true);
  }

  std::vector<Violation> validate_t_forall(const FinStructure& m) const override {
    auto out = RandomGraph::validate_t_forall(m);
    for (const Tuple& t : m.relation(0)) {
      if (t[0] >= t[1]) continue;
      for (auto it = m.relation(0).lower_bound(Tuple{t[1], 0}); it != m.relation(0).end() && (*it)[0] == t[1]; ++it) {
        const ElemId c = (*it)[1];
        if (c > t[1] && m.holds(0, Tuple{t[0], c})) out.push_back({"triangle_free", {t[0], t[1], c}});
      }
    }
    return out;
  }

 protected:
  bool admissible(const FinStructure& m, const ExtensionDelta& d, const std::vector<ElemId>& nbrs) const override {
    OverlayView view(m, d);
    for (std::size_t i = 0; i < nbrs.size(); ++i)
      for (std::size_t j = i + 1; j < nbrs.size(); ++j)
        if (view.holds(0, Tuple{nbrs[i], nbrs[j]})) return false;
    return true;
  }
};

// An equivalence relation E with infinitely many classes, all infinite.
class GenericEquivalence final : public TheoryPlugin {
 public:
  static constexpr std::size_t kFirstClasses = 12;

  GenericEquivalence() : sig_({{"E", 2}}) {}

  std::string name() const override { return "generic_equivalence"; }
  std::vector<std::optional<bool>> diagonal() const override { return {true}; }
  std::vector<std::string> symmetric_relations() const override { return {"E"}; }
  const Signature& signature() const override { return sig_; }

  Axiom axiom(std::size_t i) const override;

  std::vector<Violation> validate_t_forall(const FinStructure& m) const override {
    std::vector<Violation> out;
    const auto& e = m.relation(0);
    for (ElemId x = 0; x < m.size(); ++x)
      if (!m.holds(0, Tuple{x, x})) out.push_back({"reflexive", {x}});
    for (const Tuple& t : e) {
      if (!m.holds(0, Tuple{t[1], t[0]})) out.push_back({"symmetric", t});
      for (auto it = e.lower_bound(Tuple{t[1], 0}); it != e.end() && (*it)[0] == t[1]; ++it)
        if (!m.holds(0, Tuple{t[0], (*it)[1]})) out.push_back({"transitive", {t[0], t[1], (*it)[1]}});
    }
    return out;
  }

  void attachments(const FinStructure& m, std::span<const ElemId> anchors, std::size_t fresh, LevelOrdinal level,
                   const DeltaVisitor& visit) const override {
    // Distinct anchor classes, each as its full member list in m.
    std::vector<std::vector<ElemId>> classes;
    for (ElemId a : anchors) {
      std::vector<ElemId> cls = class_of(m, a);
      if (std::find(classes.begin(), classes.end(), cls) == classes.end()) classes.push_back(std::move(cls));
    }
    // Per new element: join an anchor class (in anchor order), join the group
    // of an earlier new element, or open a new group.
    std::vector<std::size_t> choice(fresh, 0);
    const ElemId base = static_cast<ElemId>(m.size());
    ExtensionDelta d{m.size(), std::vector<LevelOrdinal>(fresh, level), {}};
    bool stop = false;
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t s, std::size_t groups) {
      const ElemId self = base + static_cast<ElemId>(s);
      const std::size_t mark = d.tuples.size();
      for (std::size_t c = 0; c < classes.size() + groups + 1 && !stop; ++c) {
        d.tuples.resize(mark);
        choice[s] = c;
        if (c < classes.size())
          for (ElemId e : classes[c]) detail::push_symmetric(d, 0, e, self);
        for (std::size_t j = 0; j <= s; ++j)
          if (choice[j] == c) detail::push_symmetric(d, 0, base + static_cast<ElemId>(j), self);
        const Step step = visit(d, s + 1);
        if (step == Step::Stop) stop = true;
        if (step != Step::Continue || s + 1 == fresh) continue;
        rec(s + 1, c == classes.size() + groups ? groups + 1 : groups);
      }
      d.tuples.resize(mark);
    };
    if (fresh > 0) rec(0, 0);
  }

  static std::vector<ElemId> class_of(const FinStructure& m, ElemId a) {
    std::vector<ElemId> out;
    const auto& e = m.relation(0);
    for (auto it = e.lower_bound(Tuple{a, 0}); it != e.end() && (*it)[0] == a; ++it) out.push_back((*it)[1]);
    if (std::find(out.begin(), out.end(), a) == out.end()) out.insert(std::lower_bound(out.begin(), out.end(), a), a);
    return out;
  }

 private:
  Signature sig_;
};

inline Axiom GenericEquivalence::axiom(std::size_t i) const {
  const Formula e01 = Formula::atom("E", {"x0", "x1"});
  if (i == 0) return Axiom{"reflexive", Formula::atom("E", {"x0", "x0"}), {"x0"}, {}};
  if (i == 1) return Axiom{"symmetric", Formula::disj(Formula::negate(e01), Formula::atom("E", {"x1", "x0"})), {"x0", "x1"}, {}};
  if (i == 2)
    return Axiom{"transitive",
                 Formula::disj(Formula::disj(Formula::negate(e01), Formula::negate(Formula::atom("E", {"x1", "x2"}))),
                               Formula::atom("E", {"x0", "x2"})),
                 {"x0", "x1", "x2"},
                 {}};
  // Then alternately: every element has m further distinct classmates, and
  // kFirstClasses + m - 1 pairwise inequivalent elements exist; m = 1, 2, ...
  const std::size_t j = i - 3;
  const std::size_t m = j / 2 + 1;
  auto ys = detail::numbered("y", j % 2 == 1 ? kFirstClasses + m - 1 : m);
  std::vector<Formula> parts;
  if (j % 2 == 1) {
    for (std::size_t a = 0; a < ys.size(); ++a)
      for (std::size_t b = a + 1; b < ys.size(); ++b) parts.push_back(Formula::negate(Formula::atom("E", {ys[a], ys[b]})));
    return Axiom{"classes" + std::to_string(ys.size()), Formula::conj_all(std::move(parts)), {}, ys};
  }
  for (std::size_t a = 0; a < ys.size(); ++a) {
    parts.push_back(Formula::atom("E", {"x0", ys[a]}));
    parts.push_back(Formula::negate(Formula::equal(ys[a], "x0")));
  }
  for (std::size_t a = 0; a < ys.size(); ++a)
    for (std::size_t b = a + 1; b < ys.size(); ++b) parts.push_back(Formula::negate(Formula::equal(ys[a], ys[b])));
  return Axiom{"classmates" + std::to_string(ys.size()), Formula::conj_all(std::move(parts)), {"x0"}, ys};
}

inline std::vector<std::string> plugin_names() {
  return {"infinite_set", "random_graph", "generic_equivalence", "henson_triangle_free"};
}

inline std::unique_ptr<TheoryPlugin> make_plugin(const std::string& name) {
  if (name == "infinite_set") return std::make_unique<InfiniteSet>();
  if (name == "random_graph") return std::make_unique<RandomGraph>();
  if (name == "generic_equivalence") return std::make_unique<GenericEquivalence>();
  if (name == "henson_triangle_free") return std::make_unique<HensonTriangleFree>();
  return nullptr;
}

}  // namespace pseudofin

#endif  // PSEUDOFIN_THEORY_HPP
