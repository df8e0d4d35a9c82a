// Shared test helpers: independent checkers, brute-force extension search, and
// hand-rolled generators. Nothing here calls the library's oracle.
#ifndef PSEUDOFIN_TEST_SUPPORT_HPP
#define PSEUDOFIN_TEST_SUPPORT_HPP

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "pseudofin/construction.hpp"
#include "pseudofin/evaluator.hpp"
#include "pseudofin/formula.hpp"
#include "pseudofin/structure.hpp"

namespace testsupport {

using namespace pseudofin;

inline bool edge(const FinStructure& m, ElemId u, ElemId v) { return m.holds(0, std::vector<ElemId>{u, v}); }

// T_forall written out again, per theory.
inline bool t_forall_ok(const std::string& plugin, const FinStructure& m) {
  const auto n = static_cast<ElemId>(m.size());
  if (plugin == "infinite_set") return true;
  if (plugin == "generic_equivalence") {
    for (ElemId u = 0; u < n; ++u) {
      if (!edge(m, u, u)) return false;
      for (ElemId v = 0; v < n; ++v) {
        if (edge(m, u, v) != edge(m, v, u)) return false;
        for (ElemId w = 0; w < n; ++w)
          if (edge(m, u, v) && edge(m, v, w) && !edge(m, u, w)) return false;
      }
    }
    return true;
  }
  for (ElemId u = 0; u < n; ++u) {
    if (edge(m, u, u)) return false;
    for (ElemId v = 0; v < n; ++v)
      if (edge(m, u, v) != edge(m, v, u)) return false;
  }
  if (plugin == "henson_triangle_free")
    for (ElemId u = 0; u < n; ++u)
      for (ElemId v = u + 1; v < n; ++v)
        for (ElemId w = v + 1; w < n; ++w)
          if (edge(m, u, v) && edge(m, v, w) && edge(m, u, w)) return false;
  return true;
}

inline void add_sym(FinStructure& m, ElemId u, ElemId v) {
  m.add_tuple(0, {u, v});
  if (u != v) m.add_tuple(0, {v, u});
}

// Structure on n elements from a class labelling (equivalence) or an edge mask
// over pairs i<j in lexicographic order (graphs).
inline FinStructure graph_from_mask(const Signature& sig, std::size_t n, std::uint64_t mask) {
  FinStructure m(sig);
  for (std::size_t i = 0; i < n; ++i) m.add_element(LevelOrdinal::fin(0));
  std::size_t bit = 0;
  for (ElemId u = 0; u < n; ++u)
    for (ElemId v = u + 1; v < n; ++v, ++bit)
      if (mask >> bit & 1u) add_sym(m, u, v);
  return m;
}

inline FinStructure partition_structure(const Signature& sig, const std::vector<std::size_t>& cls) {
  FinStructure m(sig);
  for (std::size_t i = 0; i < cls.size(); ++i) m.add_element(LevelOrdinal::fin(0));
  for (ElemId u = 0; u < cls.size(); ++u)
    for (ElemId v = 0; v < cls.size(); ++v)
      if (cls[u] == cls[v]) m.add_tuple(0, {u, v});
  return m;
}

// Restricted growth strings of length n: every set partition once.
inline std::vector<std::vector<std::size_t>> all_partitions(std::size_t n) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> cur;
  std::function<void(std::size_t)> rec = [&](std::size_t top) {
    if (cur.size() == n) {
      out.push_back(cur);
      return;
    }
    for (std::size_t c = 0; c <= top; ++c) {
      cur.push_back(c);
      rec(std::max(top, c + 1));
      cur.pop_back();
    }
  };
  rec(0);
  return out;
}

// Every labelled T_forall structure of the plugin on exactly n elements.
inline std::vector<FinStructure> all_structures(const std::string& plugin, const Signature& sig, std::size_t n) {
  std::vector<FinStructure> out;
  if (plugin == "infinite_set") {
    FinStructure m(sig);
    for (std::size_t i = 0; i < n; ++i) m.add_element(LevelOrdinal::fin(0));
    out.push_back(m);
  } else if (plugin == "generic_equivalence") {
    for (const auto& p : all_partitions(n)) out.push_back(partition_structure(sig, p));
  } else {
    const std::size_t pairs = n * (n - (n ? 1 : 0)) / 2;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << pairs); ++mask) {
      auto m = graph_from_mask(sig, n, mask);
      if (t_forall_ok(plugin, m)) out.push_back(std::move(m));
    }
  }
  return out;
}

inline FinStructure random_structure(const std::string& plugin, const Signature& sig, std::size_t n, std::mt19937_64& rng) {
  if (plugin == "generic_equivalence") {
    std::vector<std::size_t> cls(n);
    std::uniform_int_distribution<std::size_t> pick(0, n ? n - 1 : 0);
    for (auto& c : cls) c = pick(rng);
    return partition_structure(sig, cls);
  }
  FinStructure m(sig);
  for (std::size_t i = 0; i < n; ++i) m.add_element(LevelOrdinal::fin(0));
  if (plugin == "infinite_set") return m;
  std::bernoulli_distribution coin(0.5);
  for (ElemId u = 0; u < n; ++u)
    for (ElemId v = u + 1; v < n; ++v) {
      if (!coin(rng)) continue;
      FinStructure t = m;
      add_sym(t, u, v);
      if (t_forall_ok(plugin, t)) m = std::move(t);
    }
  return m;
}

// Same facts, random levels in {0, 1, 2, w}.
inline void randomize_levels(FinStructure& m, std::mt19937_64& rng) {
  FinStructure out(m.signature());
  std::uniform_int_distribution<int> pick(0, 3);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const int r = pick(rng);
    out.add_element(r < 3 ? LevelOrdinal::fin(static_cast<std::uint32_t>(r)) : LevelOrdinal::omega());
  }
  for (std::size_t r = 0; r < m.signature().size(); ++r)
    for (const auto& t : m.relation(r)) out.add_tuple(r, t);
  m = std::move(out);
}

// Random quantifier-free formula over `vars`.
inline Formula random_qf(const Signature& sig, const std::vector<std::string>& vars, std::size_t depth, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> var(0, vars.size() - 1);
  std::uniform_int_distribution<int> kind(0, depth == 0 ? 1 : 4);
  switch (kind(rng)) {
    case 0:
      if (sig.size() > 0) {
        const auto& rel = sig.relations()[std::uniform_int_distribution<std::size_t>(0, sig.size() - 1)(rng)];
        std::vector<std::string> args;
        for (std::size_t i = 0; i < rel.arity; ++i) args.push_back(vars[var(rng)]);
        return Formula::atom(rel.name, args);
      }
      [[fallthrough]];
    case 1: return Formula::equal(vars[var(rng)], vars[var(rng)]);
    case 2: return Formula::negate(random_qf(sig, vars, depth - 1, rng));
    case 3: return Formula::conj(random_qf(sig, vars, depth - 1, rng), random_qf(sig, vars, depth - 1, rng));
    default: return Formula::disj(random_qf(sig, vars, depth - 1, rng), random_qf(sig, vars, depth - 1, rng));
  }
}

// ---------------------------------------------------------------------------
// Brute-force extension search.
//
// Least w <= max_new such that some T_forall extension of m by w new elements
// has y with phi(a, y). For the graph theories only edges between a new element
// and the elements of a, y or the new block are tried: T_forall there is closed under deleting edges, and
// edges elsewhere do not affect phi. For the equivalence relation every class
// choice of every new element is tried.
inline std::optional<std::size_t> brute_force_min_new(const std::string& plugin, const FinStructure& m, const Formula& phi,
                                                      const std::vector<std::string>& x, const std::vector<std::string>& y,
                                                      const Tuple& a, std::size_t max_new) {
  std::vector<std::string> order = x;
  order.insert(order.end(), y.begin(), y.end());
  CompiledFormula cf(phi, m.signature(), order);
  const auto n = static_cast<ElemId>(m.size());

  for (std::size_t w = 0; w <= max_new; ++w) {
    std::vector<FinStructure> exts;
    FinStructure base = m;
    for (std::size_t i = 0; i < w; ++i) base.add_element(LevelOrdinal::fin(0));
    if (plugin == "infinite_set") {
      exts.push_back(base);
    } else if (plugin == "generic_equivalence") {
      // class of each old element, by smallest member
      std::vector<ElemId> rep(n);
      for (ElemId u = 0; u < n; ++u) {
        rep[u] = u;
        for (ElemId v = 0; v < u; ++v)
          if (edge(m, u, v)) {
            rep[u] = rep[v];
            break;
          }
      }
      std::vector<ElemId> reps(rep.begin(), rep.end());
      std::sort(reps.begin(), reps.end());
      reps.erase(std::unique(reps.begin(), reps.end()), reps.end());
      const std::size_t options = reps.size() + w;  // an old class or one of w fresh groups
      std::vector<std::size_t> choice(w, 0);
      while (true) {
        FinStructure e = base;
        std::vector<std::size_t> label(n + w);
        for (ElemId u = 0; u < n; ++u) label[u] = std::lower_bound(reps.begin(), reps.end(), rep[u]) - reps.begin();
        for (std::size_t i = 0; i < w; ++i) label[n + i] = choice[i];
        for (ElemId u = 0; u < n + w; ++u)
          for (ElemId v = 0; v < n + w; ++v)
            if ((u >= n || v >= n) && label[u] == label[v]) e.add_tuple(0, {u, v});
        exts.push_back(std::move(e));
        std::size_t pos = 0;
        while (pos < w && ++choice[pos] == options) choice[pos++] = 0;
        if (pos == w) break;
      }
    } else {
      exts.push_back(base);  // edges are chosen per witness below
    }

    // y values: old elements or new ones
    std::vector<ElemId> domain(n + w);
    std::iota(domain.begin(), domain.end(), 0);
    for (const auto& e0 : exts) {
      bool found = false;
      detail::for_each_tuple(domain, y.size(), [&](const Tuple& b) {
        if (found) return;
        // with w minimal every new element is used; take them in order of first use
        ElemId next_new = n;
        for (ElemId e : b)
          if (e >= n) {
            if (e > next_new) return;
            if (e == next_new) ++next_new;
          }
        if (next_new != n + w) return;
        std::vector<ElemId> env = cf.fresh_env();
        std::copy(a.begin(), a.end(), env.begin());
        std::copy(b.begin(), b.end(), env.begin() + static_cast<std::ptrdiff_t>(x.size()));
        if (plugin == "random_graph" || plugin == "henson_triangle_free") {
          std::set<ElemId> rel(a.begin(), a.end());
          rel.insert(b.begin(), b.end());
          for (ElemId i = n; i < n + w; ++i) rel.insert(i);
          std::vector<std::pair<ElemId, ElemId>> pairs;
          for (ElemId u : rel)
            for (ElemId v : rel)
              if (u < v && v >= n) pairs.emplace_back(u, v);
          for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << pairs.size()) && !found; ++mask) {
            FinStructure e = e0;
            for (std::size_t k = 0; k < pairs.size(); ++k)
              if (mask >> k & 1u) add_sym(e, pairs[k].first, pairs[k].second);
            if (t_forall_ok(plugin, e) && cf.eval(e, env)) found = true;
          }
        } else if (t_forall_ok(plugin, e0) && cf.eval(e0, env)) {
          found = true;
        }
      });
      if (found) return w;
    }
  }
  return std::nullopt;
}

}  // namespace testsupport

#endif  // PSEUDOFIN_TEST_SUPPORT_HPP
