#ifndef PSEUDOFIN_CONSTRUCTION_HPP
#define PSEUDOFIN_CONSTRUCTION_HPP

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pseudofin/evaluator.hpp"
#include "pseudofin/schedule.hpp"
#include "pseudofin/structure.hpp"
#include "pseudofin/theory.hpp"

namespace pseudofin {

struct InvariantViolation : std::logic_error {
  using std::logic_error::logic_error;
};

struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The theory's forall-exists axioms with a non-empty witness block, as a
// priority stream for the schedule. Universal axioms hold in every model of
// T_forall, so scheduling them would never add anything.
inline PriorityStream axiom_stream(const TheoryPlugin& plugin) {
  auto picked = std::make_shared<std::vector<std::size_t>>();
  auto scanned = std::make_shared<std::size_t>(0);
  return [&plugin, picked, scanned](std::size_t p) -> std::optional<CatalogueItem> {
    while (picked->size() <= p) {
      Axiom ax = plugin.axiom((*scanned)++);
      if (!ax.y.empty()) picked->push_back(*scanned - 1);
    }
    Axiom ax = plugin.axiom((*picked)[p]);
    return CatalogueItem{std::move(ax.matrix), std::move(ax.x), std::move(ax.y), std::move(ax.label), true};
  };
}

inline std::vector<ScheduleEntry> plugin_schedule(const TheoryPlugin& plugin, std::size_t count) {
  return enumerate_schedule(plugin.signature(), count, axiom_stream(plugin));
}

// One schedule entry processed at one stage. `cases` has one character per
// tuple a in V_alpha^|x| (lexicographic): '1' witness already in V_{alpha+1},
// '2' witness adjoined by the oracle, '3' no extension realizes it.
struct AuditEntry {
  std::size_t stage = 0;
  std::size_t position = 0;
  LevelOrdinal level;
  std::size_t vset_before = 0;
  std::size_t vset_after = 0;
  std::size_t universe_before = 0;
  std::size_t universe_after = 0;
  std::string cases;
  friend bool operator==(const AuditEntry&, const AuditEntry&) = default;
};

// M_0 ... M_n. Stages only ever append elements, so M_i is the final
// structure restricted to its first stage_sizes[i] ids.
struct StageChain {
  std::string plugin;
  std::vector<ScheduleEntry> schedule;
  FinStructure final;
  std::vector<std::size_t> stage_sizes;
  std::vector<AuditEntry> audit;

  std::size_t stages() const { return stage_sizes.size(); }
  FinStructure stage(std::size_t i) const { return final.restrict_to_prefix(stage_sizes.at(i)); }
  friend bool operator==(const StageChain&, const StageChain&) = default;
};

struct BuildOptions {
  std::size_t max_universe = 0;  // 0 = unlimited
  bool check_determinism = true;
};

inline FinStructure build_m0(const TheoryPlugin& plugin) {
  FinStructure m(plugin.signature());
  m.add_element(LevelOrdinal::fin(0));
  const auto diag = plugin.diagonal();
  for (std::size_t r = 0; r < plugin.signature().size(); ++r)
    if (r < diag.size() && diag[r] && *diag[r]) m.add_tuple(r, Tuple(plugin.signature().relations()[r].arity, 0));
  if (!plugin.validate_t_forall(m).empty()) throw InvariantViolation(plugin.name() + " forbids one-element substructures");
  return m;
}

namespace detail {

// Calls visit(tuple) for every tuple over `domain` of length k, lexicographically.
template <class Visit>
void for_each_tuple(const std::vector<ElemId>& domain, std::size_t k, Visit&& visit) {
  if (k == 0) {
    visit(Tuple{});
    return;
  }
  if (domain.empty()) return;
  std::vector<std::size_t> idx(k, 0);
  Tuple t(k);
  while (true) {
    for (std::size_t i = 0; i < k; ++i) t[i] = domain[idx[i]];
    visit(t);
    std::size_t pos = k;
    while (pos > 0 && ++idx[pos - 1] == domain.size()) idx[--pos] = 0;
    if (pos == 0) return;
  }
}

inline constexpr std::size_t kInternalNodeLimit = 100000;

// Is there b in `pool` with M |= phi(a, b)? Falls back to twin pruning on large searches.
class InternalWitness {
 public:
  InternalWitness(const FinStructure& m, const CompiledFormula& cf, std::size_t x_count, std::size_t y_count,
                  std::vector<std::size_t> after = {})
      : m_(m), cf_(cf), x_count_(x_count), after_(std::move(after)) {
    for (std::size_t i = 0; i < y_count; ++i) slots_.push_back(x_count + i);
  }

  void invalidate() { twins_.reset(); }

  bool find(const Tuple& a, const std::vector<ElemId>& pool) {
    auto env = cf_.fresh_env();
    for (std::size_t i = 0; i < x_count_; ++i) env[i] = a[i];
    if (!twins_) {
      WitnessSearch<FinStructure> ws{m_, cf_, slots_, pool, nullptr, kInternalNodeLimit, after_};
      const bool found = ws.run(env);
      if (!ws.exhausted) return found;
      twins_ = twin_classes(m_);
      std::fill(env.begin() + static_cast<std::ptrdiff_t>(x_count_), env.end(), kUnassigned);
    }
    WitnessSearch<FinStructure> ws{m_, cf_, slots_, pool, &*twins_, 0, after_};
    return ws.run(env);
  }

 private:
  const FinStructure& m_;
  const CompiledFormula& cf_;
  std::size_t x_count_;
  std::vector<std::size_t> after_;
  std::vector<std::size_t> slots_;
  std::optional<std::vector<std::uint32_t>> twins_;
};

inline std::vector<std::string> split_order(const ScheduleEntry& e) {
  std::vector<std::string> order = e.x;
  order.insert(order.end(), e.y.begin(), e.y.end());
  return order;
}

}  // namespace detail

// M strongly satisfies (phi, alpha): every a in V_alpha with a witness in
// some model of T extending M has one in V_{alpha+1}^M.
inline bool strongly_satisfies(const FinStructure& m, const ScheduleEntry& sigma, const TheoryPlugin& plugin) {
  CompiledFormula cf(sigma.formula, m.signature(), detail::split_order(sigma));
  detail::InternalWitness internal(m, cf, sigma.x.size(), sigma.y.size(),
                                   interchangeable_chain(sigma.formula, sigma.y, plugin.symmetric_relations()));
  const auto domain = m.v_set(sigma.level);
  const auto pool = m.v_set(sigma.level.successor());
  bool ok = true;
  detail::for_each_tuple(domain, sigma.x.size(), [&](const Tuple& a) {
    if (!ok || internal.find(a, pool)) return;
    OracleQuery q{sigma.formula, sigma.x, sigma.y, a, sigma.level.successor()};
    q.check_precondition = false;
    if (extends_with_witness(plugin, m, q)) ok = false;
  });
  return ok;
}

// Processes `entries` (sorted stably by level) on top of `prev`. Returns the
// new stage; audit entries are appended to `audit` when given.
inline FinStructure build_stage(const FinStructure& prev, const std::vector<ScheduleEntry>& entries, const TheoryPlugin& plugin,
                                std::vector<AuditEntry>* audit = nullptr, std::size_t stage = 0,
                                const BuildOptions& opts = {}) {
  if (auto v = plugin.validate_t_forall(prev); !v.empty())
    throw InvariantViolation("build_stage: previous stage violates T_forall (" + v.front().axiom + ")");
  FinStructure m = prev;
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return entries[a].level < entries[b].level; });

  for (std::size_t idx : order) {
    const ScheduleEntry& sigma = entries[idx];
    const LevelOrdinal alpha = sigma.level;
    const LevelOrdinal next = alpha.successor();
    // V_alpha is frozen while this entry runs: new elements go to alpha + 1.
    const std::vector<ElemId> domain = m.v_set(alpha);
    std::vector<ElemId> pool = m.v_set(next);
    AuditEntry rec{stage, sigma.position, alpha, domain.size(), 0, m.size(), 0, {}};
    CompiledFormula cf(sigma.formula, m.signature(), detail::split_order(sigma));
    detail::InternalWitness internal(m, cf, sigma.x.size(), sigma.y.size(),
                                     interchangeable_chain(sigma.formula, sigma.y, plugin.symmetric_relations()));

    detail::for_each_tuple(domain, sigma.x.size(), [&](const Tuple& a) {
      if (internal.find(a, pool)) {
        rec.cases += '1';
        return;
      }
      OracleQuery q{sigma.formula, sigma.x, sigma.y, a, next, &pool};
      q.check_precondition = false;
      auto w = extends_with_witness(plugin, m, q);
      if (w) {
        if (opts.check_determinism && extends_with_witness(plugin, m, q) != w)
          throw InvariantViolation("extension oracle returned different witnesses for identical calls");
        m.apply_in_place(w->delta);
        for (std::size_t i = 0; i < w->delta.new_levels.size(); ++i) pool.push_back(static_cast<ElemId>(w->delta.base + i));
        internal.invalidate();
        rec.cases += '2';
        if (opts.max_universe && m.size() > opts.max_universe)
          throw BudgetExceeded("universe exceeded " + std::to_string(opts.max_universe) + " elements at stage " +
                               std::to_string(stage));
        return;
      }
      OracleQuery unrestricted{sigma.formula, sigma.x, sigma.y, a, next};
      unrestricted.check_precondition = false;
      if (extends_with_witness(plugin, m, unrestricted))
        throw InvariantViolation("a witness exists only by reusing elements above level " + next.to_string());
      rec.cases += '3';
    });

    rec.vset_after = m.v_set(alpha).size();
    rec.universe_after = m.size();
    if (rec.vset_after != rec.vset_before)
      throw InvariantViolation("V_" + alpha.to_string() + " changed while processing its own entry");
    if (audit) audit->push_back(std::move(rec));
  }
  return m;
}

inline StageChain build_chain(const TheoryPlugin& plugin, std::size_t n_stages, const BuildOptions& opts = {}) {
  StageChain chain{plugin.name(), plugin_schedule(plugin, n_stages), build_m0(plugin), {}, {}};
  chain.stage_sizes.push_back(chain.final.size());
  for (std::size_t n = 1; n <= n_stages; ++n) {
    std::vector<ScheduleEntry> prefix(chain.schedule.begin(), chain.schedule.begin() + static_cast<std::ptrdiff_t>(n));
    chain.final = build_stage(chain.final, prefix, plugin, &chain.audit, n, opts);
    chain.stage_sizes.push_back(chain.final.size());
  }
  if (auto v = plugin.validate_t_forall(chain.final); !v.empty())
    throw InvariantViolation("final stage violates T_forall (" + v.front().axiom + ")");
  return chain;
}

// ---------------------------------------------------------------------------
// Relativized axioms

struct AxiomFailure {
  std::string axiom;
  LevelOrdinal level;
  Tuple tuple;
};

struct ProcessedAxiom {
  Axiom axiom;
  LevelOrdinal level;
};

// Axiom entries among the first `processed` schedule positions.
inline std::vector<ProcessedAxiom> processed_axioms(const StageChain& chain, std::optional<std::size_t> processed = {}) {
  std::vector<ProcessedAxiom> out;
  const std::size_t n = std::min(processed.value_or(chain.schedule.size()), chain.schedule.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = chain.schedule[i];
    if (e.axiom) out.push_back({Axiom{e.label, e.formula, e.x, e.y}, e.level});
  }
  return out;
}

// Brute-force check of M |= forall x in V_alpha exists y in V_{alpha+1} phi.
inline std::vector<AxiomFailure> verify_axioms_on_levels(const FinStructure& m, const std::vector<ProcessedAxiom>& processed) {
  std::vector<AxiomFailure> out;
  for (const auto& [ax, alpha] : processed) {
    std::vector<std::string> order = ax.x;
    order.insert(order.end(), ax.y.begin(), ax.y.end());
    CompiledFormula cf(ax.matrix, m.signature(), order);
    std::vector<std::size_t> slots;
    for (std::size_t i = 0; i < ax.y.size(); ++i) slots.push_back(ax.x.size() + i);
    const auto pool = m.v_set(alpha.successor());
    detail::for_each_tuple(m.v_set(alpha), ax.x.size(), [&](const Tuple& a) {
      auto env = cf.fresh_env();
      std::copy(a.begin(), a.end(), env.begin());
      WitnessSearch<FinStructure> ws{m, cf, slots, pool};
      if (!ws.run(env)) out.push_back({ax.label, alpha, a});
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Embedding

namespace detail {

// Literal diagram of y := a_i over x_0..x_{i-1} := a_0..a_{i-1} in A.
inline Formula diagram_of_next(const FinStructure& a, std::size_t i) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < i; ++j) names.push_back("x" + std::to_string(j));
  names.push_back("y");
  std::vector<Formula> lits;
  for (std::size_t j = 0; j < i; ++j) lits.push_back(Formula::negate(Formula::equal("y", names[j])));
  const auto& rels = a.signature().relations();
  for (std::size_t r = 0; r < rels.size(); ++r) {
    const std::size_t k = rels[r].arity;
    std::vector<std::size_t> pick(k, 0);
    while (true) {
      if (std::find(pick.begin(), pick.end(), i) != pick.end()) {
        Tuple t;
        std::vector<std::string> args;
        for (std::size_t p : pick) {
          t.push_back(static_cast<ElemId>(p));
          args.push_back(names[p]);
        }
        Formula atom = Formula::atom(rels[r].name, args);
        lits.push_back(a.holds(r, t) ? std::move(atom) : Formula::negate(std::move(atom)));
      }
      if (k == 0) break;
      std::size_t pos = k;
      while (pos > 0 && ++pick[pos - 1] == i + 1) pick[--pos] = 0;
      if (pos == 0) break;
    }
  }
  if (lits.empty()) return Formula::equal("y", "y");
  return Formula::conj_all(std::move(lits));
}

}  // namespace detail

struct Embedding {
  std::vector<ElemId> image;  // a_i -> image[i]
  StageChain chain;
};

// Embeds A (elements in id order) so that a_i lands at level <= Fin(i+1) with
// every initial segment keeping its atomic type. Missing images are added to
// the final stage through the oracle.
inline std::optional<Embedding> embed_model(const TheoryPlugin& plugin, const FinStructure& a, const StageChain& chain) {
  if (!(a.signature() == plugin.signature())) throw std::invalid_argument("embed_model: signature mismatch");
  if (auto v = plugin.validate_t_forall(a); !v.empty())
    throw std::invalid_argument("embed_model: A violates T_forall (" + v.front().axiom + ")");
  Embedding out{{}, chain};
  FinStructure& m = out.chain.final;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const LevelOrdinal cap = LevelOrdinal::fin(static_cast<std::uint32_t>(i + 1));
    Formula diag = detail::diagram_of_next(a, i);
    std::vector<std::string> xs;
    for (std::size_t j = 0; j < i; ++j) xs.push_back("x" + std::to_string(j));
    std::vector<std::string> order = xs;
    order.push_back("y");
    CompiledFormula cf(diag, m.signature(), order);
    auto env = cf.fresh_env();
    std::copy(out.image.begin(), out.image.end(), env.begin());
    std::optional<ElemId> chosen;
    for (ElemId c : m.v_set(cap)) {
      env[i] = c;
      if (cf.eval(m, env)) {
        chosen = c;
        break;
      }
    }
    if (!chosen) {
      const auto pool = m.v_set(cap);
      OracleQuery q{diag, xs, {"y"}, out.image, cap, &pool};
      q.check_precondition = false;
      auto w = extends_with_witness(plugin, m, q);
      if (!w) return std::nullopt;
      m.apply_in_place(w->delta);
      chosen = w->b[0];
    }
    out.image.push_back(*chosen);
  }
  out.chain.stage_sizes.back() = m.size();
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json chain_to_json(const StageChain& chain) {
  using J = nlohmann::ordered_json;
  J j;
  j["plugin"] = chain.plugin;
  j["stages"] = chain.stages() - 1;
  j["stage_sizes"] = chain.stage_sizes;
  J sched = J::array();
  for (const auto& e : chain.schedule)
    sched.push_back(J{{"position", e.position},
                      {"catalogue", e.catalogue_index},
                      {"formula", to_string(e.formula)},
                      {"x", e.x},
                      {"y", e.y},
                      {"level", level_to_json(e.level)},
                      {"label", e.label},
                      {"axiom", e.axiom}});
  j["schedule"] = std::move(sched);
  j["structure"] = structure_to_json(chain.final);
  J audit = J::array();
  for (const auto& a : chain.audit)
    audit.push_back(J{{"stage", a.stage},
                      {"position", a.position},
                      {"level", level_to_json(a.level)},
                      {"vset_before", a.vset_before},
                      {"vset_after", a.vset_after},
                      {"universe_before", a.universe_before},
                      {"universe_after", a.universe_after},
                      {"cases", a.cases}});
  j["audit"] = std::move(audit);
  return j;
}

inline StageChain chain_from_json(const nlohmann::ordered_json& j) {
  StageChain chain;
  chain.plugin = j.at("plugin").get<std::string>();
  chain.final = structure_from_json(j.at("structure"));
  chain.stage_sizes = j.at("stage_sizes").get<std::vector<std::size_t>>();
  if (chain.stage_sizes.empty() || chain.stage_sizes.back() != chain.final.size())
    throw std::invalid_argument("chain: stage sizes do not match the structure");
  for (std::size_t i = 1; i < chain.stage_sizes.size(); ++i)
    if (chain.stage_sizes[i] < chain.stage_sizes[i - 1]) throw std::invalid_argument("chain: stage sizes decrease");
  for (const auto& e : j.at("schedule")) {
    ScheduleEntry s{parse_formula(e.at("formula").get<std::string>(), chain.final.signature()),
                    e.at("x").get<std::vector<std::string>>(),
                    e.at("y").get<std::vector<std::string>>(),
                    level_from_json(e.at("level")),
                    e.at("position").get<std::size_t>(),
                    e.at("catalogue").get<std::size_t>(),
                    e.at("label").get<std::string>(),
                    e.at("axiom").get<bool>()};
    chain.schedule.push_back(std::move(s));
  }
  for (const auto& a : j.at("audit"))
    chain.audit.push_back(AuditEntry{a.at("stage").get<std::size_t>(), a.at("position").get<std::size_t>(),
                                     level_from_json(a.at("level")), a.at("vset_before").get<std::size_t>(),
                                     a.at("vset_after").get<std::size_t>(), a.at("universe_before").get<std::size_t>(),
                                     a.at("universe_after").get<std::size_t>(), a.at("cases").get<std::string>()});
  return chain;
}

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace pseudofin

#endif  // PSEUDOFIN_CONSTRUCTION_HPP
