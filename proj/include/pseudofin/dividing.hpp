#ifndef PSEUDOFIN_DIVIDING_HPP
#define PSEUDOFIN_DIVIDING_HPP

#include <algorithm>
#include <bit>
#include <functional>
#include <numeric>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pseudofin/construction.hpp"
#include "pseudofin/dimension.hpp"
#include "pseudofin/theory.hpp"

namespace pseudofin {

// phi(x; y) over parameters a, instantiated at y = b.
struct DividingQuery {
  Formula phi;
  std::vector<std::string> x;
  std::vector<std::string> y;
  std::vector<std::pair<std::string, ElemId>> a;
  Tuple b;
  std::optional<LevelOrdinal> level_cap;  // for the dimension side only
};

struct DividesWitness {
  DividingQuery query;
  std::size_t k = 0;
  std::vector<Tuple> instances;
  std::vector<bool> same_type;  // per instance, against instances[0]'s type b
  std::vector<std::vector<std::size_t>> subsets;  // every k-subset, by instance index
  std::vector<bool> realizable;  // per subset; all false in a valid certificate
};

struct DividingError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void check_query(const FinStructure& m, const DividingQuery& q) {
  if (!is_quantifier_free(q.phi)) throw DividingError("phi must be quantifier-free");
  if (q.y.size() != q.b.size()) throw DividingError("b has " + std::to_string(q.b.size()) + " entries for " + std::to_string(q.y.size()) + " variables");
  for (ElemId e : q.b)
    if (e >= m.size()) throw DividingError("b mentions " + element_name(e) + ", not in the structure");
  for (const auto& [n, e] : q.a)
    if (e >= m.size()) throw DividingError("parameter " + n + " = " + element_name(e) + " not in the structure");
  std::vector<std::string> known = q.x;
  known.insert(known.end(), q.y.begin(), q.y.end());
  for (const auto& [n, _] : q.a) known.push_back(n);
  for (const auto& v : free_variables(q.phi))
    if (std::find(known.begin(), known.end(), v) == known.end()) throw DividingError("free variable " + v + " is unbound");
}

inline Tuple a_values(const DividingQuery& q) {
  Tuple out;
  for (const auto& p : q.a) out.push_back(p.second);
  return out;
}

// Tuples over `domain` of b's length with the same atomic type as b over a.
// b itself comes first, the rest in lexicographic order.
inline std::vector<Tuple> same_type_tuples(const FinStructure& m, const std::vector<ElemId>& domain, const DividingQuery& q) {
  const Tuple a = a_values(q);
  std::vector<Tuple> out;
  const bool b_in_domain = std::all_of(q.b.begin(), q.b.end(), [&](ElemId e) { return std::binary_search(domain.begin(), domain.end(), e); });
  if (b_in_domain) out.push_back(q.b);
  for_each_tuple(domain, q.b.size(), [&](const Tuple& t) {
    if (t != q.b && qf_type_equal(m, q.b, t, a)) out.push_back(t);
  });
  return out;
}

inline Constraint instance_constraint(const DividingQuery& q, const Tuple& b) {
  Constraint c{q.phi, q.a};
  for (std::size_t i = 0; i < q.y.size(); ++i) c.parameters.emplace_back(q.y[i], b[i]);
  return c;
}

inline void for_each_subset(std::size_t n, std::size_t k, const std::function<void(const std::vector<std::size_t>&)>& f) {
  if (k > n) return;
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    f(idx);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace detail

// Are the instances { phi(x, b) : b in family } jointly realizable in some model of T extending m?
inline bool family_realizable(const TheoryPlugin& plugin, const FinStructure& m, const DividingQuery& q,
                              const std::vector<Tuple>& family) {
  std::vector<Constraint> cs;
  for (const auto& b : family) cs.push_back(detail::instance_constraint(q, b));
  return jointly_realizable(plugin, m, cs, q.x, false);
}

// Backtracking search over the final stage for L same-type instances of b
// whose every k-subset is inconsistent with T.
inline std::optional<DividesWitness> certify_dividing(const TheoryPlugin& plugin, const StageChain& chain, const DividingQuery& q,
                                                      std::size_t k, std::size_t L) {
  const FinStructure& m = chain.final;
  detail::check_query(m, q);
  if (k == 0) throw DividingError("k must be positive");
  if (L < k) return std::nullopt;

  const auto candidates = detail::same_type_tuples(m, m.universe(), q);
  std::map<std::vector<std::size_t>, bool> memo;
  auto realizable = [&](const std::vector<std::size_t>& ids) {
    auto it = memo.find(ids);
    if (it != memo.end()) return it->second;
    std::vector<Tuple> fam;
    for (auto i : ids) fam.push_back(candidates[i]);
    return memo[ids] = family_realizable(plugin, m, q, fam);
  };

  std::vector<std::size_t> chosen;
  // Adding c keeps the family k-inconsistent iff every k-subset through c is.
  auto compatible = [&](std::size_t c) {
    if (chosen.size() + 1 < k) return true;
    bool ok = true;
    detail::for_each_subset(chosen.size(), k - 1, [&](const std::vector<std::size_t>& sub) {
      if (!ok) return;
      std::vector<std::size_t> ids;
      for (auto i : sub) ids.push_back(chosen[i]);
      ids.push_back(c);
      ok = !realizable(ids);
    });
    return ok;
  };
  std::function<bool(std::size_t)> dfs = [&](std::size_t from) {
    if (chosen.size() == L) return true;
    for (std::size_t c = from; c + (L - chosen.size()) <= candidates.size(); ++c) {
      if (!compatible(c)) continue;
      chosen.push_back(c);
      if (dfs(c + 1)) return true;
      chosen.pop_back();
    }
    return false;
  };
  if (!dfs(0)) return std::nullopt;

  DividesWitness w{q, k, {}, {}, {}, {}};
  const Tuple a = detail::a_values(q);
  for (auto c : chosen) {
    w.instances.push_back(candidates[c]);
    w.same_type.push_back(qf_type_equal(m, q.b, candidates[c], a));
  }
  detail::for_each_subset(L, k, [&](const std::vector<std::size_t>& sub) {
    std::vector<Tuple> fam;
    for (auto i : sub) fam.push_back(w.instances[i]);
    w.subsets.push_back(sub);
    w.realizable.push_back(family_realizable(plugin, m, q, fam));
  });
  return w;
}

// Re-checks a certificate inside another structure containing its elements.
inline bool certificate_holds(const TheoryPlugin& plugin, const FinStructure& m, const DividesWitness& w) {
  for (const auto& sub : w.subsets) {
    std::vector<Tuple> fam;
    for (auto i : sub) fam.push_back(w.instances[i]);
    for (const auto& t : fam)
      for (ElemId e : t)
        if (e >= m.size()) return false;
    if (family_realizable(plugin, m, w.query, fam)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Dimension drop

struct DropCandidate {
  Tuple b;
  std::size_t first_stage;
  Verdict verdict;
  std::uint64_t final_count;
};

struct DropReport {
  std::vector<DropCandidate> candidates;
  std::optional<std::size_t> best;  // index of the most negative final log-difference
  std::size_t total_candidates = 0;  // before subsampling
  bool subsampled = false;
  DimTrend psi;

  std::size_t count(VerdictKind v) const {
    return static_cast<std::size_t>(std::count_if(candidates.begin(), candidates.end(), [&](const DropCandidate& c) { return c.verdict.kind == v; }));
  }
};

inline constexpr std::size_t kCandidateLimit = 10000;

inline DefinableSet instance_set(const DividingQuery& q, const Tuple& b) {
  DefinableSet d{q.phi, q.x, q.a, q.level_cap};
  for (std::size_t i = 0; i < q.y.size(); ++i) d.parameters.emplace_back(q.y[i], b[i]);
  return d;
}

// Candidates b# range over V_omega of the final stage; each is compared with
// psi from the first stage containing it.
inline DropReport find_dimension_drop(const StageChain& chain, const DefinableSet& psi, const DividingQuery& q,
                                      std::size_t window = 10, double bound = 2.0, std::uint64_t seed = 0) {
  const FinStructure& m = chain.final;
  detail::check_query(m, q);
  if (psi.solution_vars != q.x) throw DividingError("psi and phi have different solution variables");

  DropReport rep;
  rep.psi = trend(chain, psi, birth_stage(chain, psi));
  auto cands = detail::same_type_tuples(m, m.v_set(LevelOrdinal::omega()), q);
  rep.total_candidates = cands.size();
  if (cands.size() > kCandidateLimit) {
    std::vector<Tuple> pick;
    std::mt19937_64 rng(seed);
    std::sample(cands.begin(), cands.end(), std::back_inserter(pick), kCandidateLimit, rng);
    cands = std::move(pick);
    rep.subsampled = true;
  }

  double best_d = 0;
  bool best_neg_inf = false;
  for (const auto& b : cands) {
    const DefinableSet phi_b = instance_set(q, b);
    const std::size_t from = std::max(birth_stage(chain, phi_b), rep.psi.first_stage);
    // phi(x, b#) must imply psi at every stage where both are defined.
    for (std::size_t s = from; s < chain.stages(); ++s) {
      const FinStructure ms = chain.stage(s);
      auto inner = solutions(ms, phi_b);
      auto outer = solutions(ms, psi);
      std::sort(outer.begin(), outer.end());
      for (const auto& t : inner)
        if (!std::binary_search(outer.begin(), outer.end(), t))
          throw DividingError("phi(x, b#) does not imply psi at stage " + std::to_string(s));
    }
    DimTrend tb = trend(chain, phi_b, from);
    DimTrend tp = rep.psi;
    tp.counts.erase(tp.counts.begin(), tp.counts.begin() + static_cast<std::ptrdiff_t>(from - tp.first_stage));
    tp.first_stage = from;
    DropCandidate c{b, from, {}, tb.counts.back()};
    if (tb.counts.size() < window) {
      c.verdict.window = window;
      c.verdict.bound = bound;
      c.verdict.first_stage = from;
      c.verdict.note = "born too late for the window";
    } else {
      c.verdict = dim_compare(tb, tp, window, bound);
    }
    const LogDiff last = log_diff(tb.counts.back(), tp.counts.back());
    const bool neg_inf = last.kind == LogDiff::Kind::NegInf;
    const bool better = !rep.best || (neg_inf && !best_neg_inf) ||
                        (!best_neg_inf && last.kind == LogDiff::Kind::Finite && last.value < best_d);
    if (better) {
      rep.best = rep.candidates.size();
      best_d = last.value;
      best_neg_inf = neg_inf;
    }
    rep.candidates.push_back(std::move(c));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Covering lemma: L sets, each of size >= ceil(S/K), some k of them share a point.

inline std::size_t covering_bound(std::size_t K, std::size_t k) {
  if (K == 0 || k == 0) throw std::invalid_argument("covering_bound: K and k must be positive");
  return (k - 1) * K + 1;
}

struct CoveringReport {
  std::size_t s_size = 0, K = 0, k = 0, L = 0, min_size = 0;
  bool exhaustive = true;
  bool verified = true;
  std::uint64_t families_checked = 0;
  std::optional<std::vector<std::uint32_t>> counterexample;  // bitmasks
  std::optional<std::vector<std::uint32_t>> sharpness;  // L - 1 sets, no point in k of them
};

namespace detail {

// Minimal sets suffice: shrinking sets only lowers coverage. So enumerate
// multisets of L subsets of exact size min_size, tracking per-point coverage,
// and look for one where every point is covered fewer than k times.
class CoveringSearch {
 public:
  CoveringSearch(std::size_t s, std::size_t min_size, std::size_t L, std::size_t k) : s_(s), min_size_(min_size), L_(L), k_(k), cover_(s, 0) {
    for (std::uint32_t mask = 0; mask < (1u << s); ++mask)
      if (static_cast<std::size_t>(std::popcount(mask)) == min_size) sets_.push_back(mask);
  }

  // Returns a bad family if one exists.
  std::optional<std::vector<std::uint32_t>> run(std::uint64_t& checked) {
    checked_ = &checked;
    if (dfs(0)) return family_;
    return std::nullopt;
  }

 private:
  // Canonical order: points are symmetric, so the first set can be fixed to the
  // lowest mask; later sets are non-decreasing in index.
  bool dfs(std::size_t from) {
    if (family_.size() == L_) {
      ++*checked_;
      return true;
    }
    // Each point takes at most k-1 more memberships in total.
    std::size_t room = 0;
    for (std::size_t p = 0; p < s_; ++p) room += k_ - 1 - cover_[p];
    if (room < (L_ - family_.size()) * min_size_) return false;
    const std::size_t end = family_.empty() ? std::min<std::size_t>(1, sets_.size()) : sets_.size();
    for (std::size_t i = from; i < end; ++i) {
      const std::uint32_t mask = sets_[i];
      bool ok = true;
      for (std::size_t p = 0; p < s_ && ok; ++p)
        if ((mask >> p & 1u) && cover_[p] + 1 >= k_) ok = false;
      if (!ok) continue;
      for (std::size_t p = 0; p < s_; ++p) cover_[p] += mask >> p & 1u;
      family_.push_back(mask);
      if (dfs(i)) return true;
      family_.pop_back();
      for (std::size_t p = 0; p < s_; ++p) cover_[p] -= mask >> p & 1u;
      ++*checked_;
    }
    return false;
  }

  std::size_t s_, min_size_, L_, k_;
  std::vector<std::uint32_t> sets_;
  std::vector<std::size_t> cover_;
  std::vector<std::uint32_t> family_;
  std::uint64_t* checked_ = nullptr;
};

inline bool family_has_k_cover(const std::vector<std::uint32_t>& family, std::size_t s, std::size_t k) {
  for (std::size_t p = 0; p < s; ++p) {
    std::size_t c = 0;
    for (auto m : family) c += m >> p & 1u;
    if (c >= k) return true;
  }
  return false;
}

}  // namespace detail

inline constexpr std::size_t kExhaustiveCoveringLimit = 12;

inline CoveringReport covering_check(std::size_t s_size, std::size_t K, std::size_t k, std::uint64_t seed = 0,
                                     std::size_t samples = 100000) {
  if (K == 0 || k == 0) throw std::invalid_argument("covering_check: K and k must be positive");
  if (s_size < K) throw std::invalid_argument("covering_check: S must have at least K points");
  if (s_size > 31) throw std::invalid_argument("covering_check: S is limited to 31 points");
  CoveringReport r;
  r.s_size = s_size;
  r.K = K;
  r.k = k;
  r.L = covering_bound(K, k);
  r.min_size = (s_size + K - 1) / K;

  if (s_size <= kExhaustiveCoveringLimit) {
    detail::CoveringSearch search(s_size, r.min_size, r.L, k);
    r.counterexample = search.run(r.families_checked);
  } else {
    r.exhaustive = false;
    std::mt19937_64 rng(seed);
    std::vector<std::uint32_t> points(s_size);
    std::iota(points.begin(), points.end(), 0u);
    for (std::size_t t = 0; t < samples && !r.counterexample; ++t) {
      std::vector<std::uint32_t> fam;
      for (std::size_t i = 0; i < r.L; ++i) {
        std::shuffle(points.begin(), points.end(), rng);
        std::uint32_t mask = 0;
        for (std::size_t j = 0; j < r.min_size; ++j) mask |= 1u << points[j];
        fam.push_back(mask);
      }
      ++r.families_checked;
      if (!detail::family_has_k_cover(fam, s_size, k)) r.counterexample = fam;
    }
  }
  r.verified = !r.counterexample.has_value();

  // k-1 copies of a partition into K blocks: every point lies in exactly k-1 sets.
  if (s_size % K == 0) {
    const std::size_t block = s_size / K;
    std::vector<std::uint32_t> fam;
    for (std::size_t copy = 0; copy + 1 < k; ++copy)
      for (std::size_t b = 0; b < K; ++b) fam.push_back(((1u << block) - 1u) << (b * block));
    if (!detail::family_has_k_cover(fam, s_size, k)) r.sharpness = fam;
  }
  return r;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::ordered_json tuple_to_json(const Tuple& t) {
  auto j = nlohmann::ordered_json::array();
  for (ElemId e : t) j.push_back(e);
  return j;
}

inline nlohmann::ordered_json witness_to_json(const DividesWitness& w) {
  nlohmann::ordered_json j;
  j["phi"] = to_string(w.query.phi);
  j["x"] = w.query.x;
  j["y"] = w.query.y;
  j["b"] = tuple_to_json(w.query.b);
  j["k"] = w.k;
  j["instances"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < w.instances.size(); ++i)
    j["instances"].push_back({{"b", tuple_to_json(w.instances[i])}, {"same_type", static_cast<bool>(w.same_type[i])}});
  j["subsets"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < w.subsets.size(); ++i)
    j["subsets"].push_back({{"members", w.subsets[i]}, {"realizable", static_cast<bool>(w.realizable[i])}});
  return j;
}

inline nlohmann::ordered_json drop_to_json(const DropReport& r) {
  nlohmann::ordered_json j;
  j["total_candidates"] = r.total_candidates;
  j["subsampled"] = r.subsampled;
  j["candidates"] = nlohmann::ordered_json::array();
  for (const auto& c : r.candidates) {
    nlohmann::ordered_json cj;
    cj["b"] = tuple_to_json(c.b);
    cj["first_stage"] = c.first_stage;
    cj["final_count"] = c.final_count;
    cj["comparison"] = verdict_to_json(c.verdict);
    j["candidates"].push_back(cj);
  }
  if (r.best) j["best"] = *r.best;
  else j["best"] = nullptr;
  return j;
}

}  // namespace pseudofin

#endif  // PSEUDOFIN_DIVIDING_HPP
