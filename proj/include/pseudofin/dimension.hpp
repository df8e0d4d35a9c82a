#ifndef PSEUDOFIN_DIMENSION_HPP
#define PSEUDOFIN_DIMENSION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pseudofin/construction.hpp"
#include "pseudofin/evaluator.hpp"

namespace pseudofin {

// log|X| with a separate marker for the empty set instead of a float -inf.
struct LogCount {
  bool neg_inf = true;
  double value = 0.0;

  static LogCount of(std::uint64_t c) { return c == 0 ? LogCount{} : LogCount{false, std::log(static_cast<double>(c))}; }
  friend bool operator==(const LogCount&, const LogCount&) = default;
};

inline std::string to_string(const LogCount& l) {
  if (l.neg_inf) return "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << l.value;
  return os.str();
}

struct DimTrend {
  DefinableSet set;
  std::size_t first_stage = 0;
  std::vector<std::uint64_t> counts;  // counts[i] belongs to stage first_stage + i

  std::size_t last_stage() const { return first_stage + counts.size() - 1; }
  LogCount log_at(std::size_t i) const { return LogCount::of(counts.at(i)); }
};

struct TrendError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// First stage containing every parameter of d.
inline std::size_t birth_stage(const StageChain& chain, const DefinableSet& d) {
  ElemId top = 0;
  bool any = false;
  for (const auto& [name, e] : d.parameters) {
    if (e >= chain.final.size()) throw TrendError("parameter " + name + " = " + element_name(e) + " is not in the chain");
    top = std::max(top, e);
    any = true;
  }
  if (!any) return 0;
  for (std::size_t s = 0; s < chain.stages(); ++s)
    if (chain.stage_sizes[s] > top) return s;
  throw TrendError("parameter outside every stage");
}

inline DimTrend trend(const StageChain& chain, const DefinableSet& d, std::size_t first_stage = 0) {
  if (chain.stages() == 0) throw TrendError("empty chain");
  if (first_stage >= chain.stages()) throw TrendError("first stage beyond the chain");
  if (birth_stage(chain, d) > first_stage)
    throw TrendError("parameters missing from stage " + std::to_string(first_stage));
  DimTrend t{d, first_stage, {}};
  for (std::size_t s = first_stage; s < chain.stages(); ++s) t.counts.push_back(count(chain.stage(s), d));
  return t;
}

// Synthetic trend, used for comparator experiments without a chain.
inline DimTrend trend_from_counts(std::vector<std::uint64_t> counts, std::size_t first_stage = 0) {
  if (counts.empty()) throw TrendError("empty trend");
  DimTrend t;
  t.first_stage = first_stage;
  t.counts = std::move(counts);
  return t;
}

// ---------------------------------------------------------------------------
// Comparator

enum class VerdictKind { Bounded, DivergesPos, DivergesNeg, Inconclusive };

inline const char* to_string(VerdictKind v) {
  switch (v) {
    case VerdictKind::Bounded: return "Bounded";
    case VerdictKind::DivergesPos: return "DivergesPos";
    case VerdictKind::DivergesNeg: return "DivergesNeg";
    case VerdictKind::Inconclusive: return "Inconclusive";
  }
  return "?";
}

inline VerdictKind verdict_from_string(const std::string& s) {
  for (auto v : {VerdictKind::Bounded, VerdictKind::DivergesPos, VerdictKind::DivergesNeg, VerdictKind::Inconclusive})
    if (s == to_string(v)) return v;
  throw std::invalid_argument("unknown verdict " + s);
}

// One log-difference; infinite when exactly one side is empty.
struct LogDiff {
  enum class Kind { Finite, PosInf, NegInf } kind = Kind::Finite;
  double value = 0.0;
  friend bool operator==(const LogDiff&, const LogDiff&) = default;
};

inline LogDiff log_diff(std::uint64_t c1, std::uint64_t c2) {
  if (c1 == 0 && c2 == 0) return {};
  if (c2 == 0) return {LogDiff::Kind::PosInf, 0.0};
  if (c1 == 0) return {LogDiff::Kind::NegInf, 0.0};
  return {LogDiff::Kind::Finite, std::log(static_cast<double>(c1)) - std::log(static_cast<double>(c2))};
}

struct Verdict {
  VerdictKind kind = VerdictKind::Inconclusive;
  std::size_t window = 0;
  std::size_t first_stage = 0;  // first stage of the evidence window
  double bound = 0.0;
  std::vector<LogDiff> d;
  double max_abs = 0.0;  // over finite entries
  double spread = 0.0;
  double slope = 0.0;  // least squares, finite windows only
  std::string note;
};

inline Verdict dim_compare(const DimTrend& t1, const DimTrend& t2, std::size_t window = 10, double bound = 2.0) {
  if (t1.first_stage != t2.first_stage || t1.counts.size() != t2.counts.size())
    throw TrendError("dim_compare: trends cover different stage ranges");
  if (window == 0) throw TrendError("dim_compare: window must be positive");
  if (t1.counts.size() < window)
    throw TrendError("dim_compare: " + std::to_string(t1.counts.size()) + " stages is shorter than the window");
  if (!(bound > 0.0)) throw TrendError("dim_compare: bound must be positive");

  Verdict v;
  v.window = window;
  v.bound = bound;
  const std::size_t start = t1.counts.size() - window;
  v.first_stage = t1.first_stage + start;
  bool pos_inf = false, neg_inf = false;
  for (std::size_t i = start; i < t1.counts.size(); ++i) {
    v.d.push_back(log_diff(t1.counts[i], t2.counts[i]));
    pos_inf |= v.d.back().kind == LogDiff::Kind::PosInf;
    neg_inf |= v.d.back().kind == LogDiff::Kind::NegInf;
  }
  if (pos_inf && neg_inf) {
    v.note = "empty on both sides at different stages";
    return v;
  }
  if (pos_inf || neg_inf) {
    v.kind = pos_inf ? VerdictKind::DivergesPos : VerdictKind::DivergesNeg;
    v.note = "one side empty";
    return v;
  }

  double lo = v.d.front().value, hi = lo;
  for (const auto& x : v.d) {
    lo = std::min(lo, x.value);
    hi = std::max(hi, x.value);
    v.max_abs = std::max(v.max_abs, std::abs(x.value));
  }
  v.spread = hi - lo;
  {
    const double n = static_cast<double>(window);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < window; ++i) {
      const double x = static_cast<double>(i), y = v.d[i].value;
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double den = n * sxx - sx * sx;
    v.slope = den == 0.0 ? 0.0 : (n * sxy - sx * sy) / den;
  }

  if (v.max_abs <= bound && v.spread <= bound / 2) {
    v.kind = VerdictKind::Bounded;
    return v;
  }
  bool nonincreasing = true, nondecreasing = true, below = true, above = true;
  for (std::size_t i = 0; i < window; ++i) {
    below &= v.d[i].value < -bound;
    above &= v.d[i].value > bound;
    if (i > 0) {
      nonincreasing &= v.d[i].value <= v.d[i - 1].value;
      nondecreasing &= v.d[i].value >= v.d[i - 1].value;
    }
  }
  if (below && nonincreasing && v.d.back().value < v.d.front().value) {
    v.kind = VerdictKind::DivergesNeg;
  } else if (above && nondecreasing && v.d.back().value > v.d.front().value) {
    v.kind = VerdictKind::DivergesPos;
  } else {
    v.note = below || above ? "beyond the bound but flat or not monotone" : "neither bounded nor monotone beyond the bound";
  }
  return v;
}

inline nlohmann::ordered_json log_diff_to_json(const LogDiff& d) {
  switch (d.kind) {
    case LogDiff::Kind::PosInf: return "+inf";
    case LogDiff::Kind::NegInf: return "-inf";
    case LogDiff::Kind::Finite: break;
  }
  return d.value;
}

inline LogDiff log_diff_from_json(const nlohmann::ordered_json& j) {
  if (j.is_string()) {
    if (j == "+inf") return {LogDiff::Kind::PosInf, 0.0};
    if (j == "-inf") return {LogDiff::Kind::NegInf, 0.0};
    throw std::invalid_argument("bad log difference " + j.dump());
  }
  return {LogDiff::Kind::Finite, j.get<double>()};
}

inline nlohmann::ordered_json verdict_to_json(const Verdict& v) {
  nlohmann::ordered_json j;
  j["verdict"] = to_string(v.kind);
  j["window"] = v.window;
  j["first_stage"] = v.first_stage;
  j["bound"] = v.bound;
  j["max_abs"] = v.max_abs;
  j["spread"] = v.spread;
  j["slope"] = v.slope;
  j["d"] = nlohmann::ordered_json::array();
  for (const auto& x : v.d) j["d"].push_back(log_diff_to_json(x));
  if (!v.note.empty()) j["note"] = v.note;
  return j;
}

inline Verdict verdict_from_json(const nlohmann::ordered_json& j) {
  Verdict v;
  v.kind = verdict_from_string(j.at("verdict").get<std::string>());
  v.window = j.at("window").get<std::size_t>();
  v.first_stage = j.at("first_stage").get<std::size_t>();
  v.bound = j.at("bound").get<double>();
  v.max_abs = j.at("max_abs").get<double>();
  v.spread = j.at("spread").get<double>();
  v.slope = j.at("slope").get<double>();
  for (const auto& x : j.at("d")) v.d.push_back(log_diff_from_json(x));
  if (j.contains("note")) v.note = j["note"].get<std::string>();
  return v;
}

// ---------------------------------------------------------------------------
// Quasi-dimension axioms at finite stages

struct UnionRow {
  std::size_t stage, left, right;
  std::uint64_t c_left, c_right, c_union;
  bool ok;
};

struct FiberRow {
  std::size_t stage;
  std::uint64_t c_domain, max_fiber, c_base, unmapped;
  bool ok;
};

// Domain X fibred over base Z by map(x, z); the fiber over z is {x in X : map(x, z)}.
struct Fibering {
  DefinableSet domain;
  DefinableSet base;
  Formula map;
};

struct QuasiAxiomReport {
  std::vector<DimTrend> trends;
  std::vector<UnionRow> unions;
  std::vector<FiberRow> fibers;
  std::size_t violations = 0;
};

inline QuasiAxiomReport quasi_axiom_report(const StageChain& chain, const std::vector<DefinableSet>& sets,
                                           const std::optional<Fibering>& fibered = {}) {
  QuasiAxiomReport rep;
  std::size_t first = 0;
  for (const auto& s : sets) first = std::max(first, birth_stage(chain, s));
  if (fibered) first = std::max({first, birth_stage(chain, fibered->domain), birth_stage(chain, fibered->base)});
  for (std::size_t i = 0; i < sets.size(); ++i)
    for (std::size_t j = i + 1; j < sets.size(); ++j)
      if (sets[i].solution_vars.size() != sets[j].solution_vars.size())
        throw TrendError("quasi_axiom_report: sets " + std::to_string(i) + " and " + std::to_string(j) + " have different arity");

  for (const auto& s : sets) rep.trends.push_back(trend(chain, s, first));

  std::optional<CompiledFormula> map_cf;
  if (fibered) {
    std::vector<std::string> order = fibered->domain.solution_vars;
    for (const auto& z : fibered->base.solution_vars) {
      if (std::find(order.begin(), order.end(), z) != order.end())
        throw TrendError("quasi_axiom_report: domain and base share variable " + z);
      order.push_back(z);
    }
    for (const auto& v : free_variables(fibered->map))
      if (std::find(order.begin(), order.end(), v) == order.end())
        throw TrendError("quasi_axiom_report: map variable " + v + " is not a domain or base variable");
    map_cf.emplace(fibered->map, chain.final.signature(), order);
  }

  for (std::size_t s = first; s < chain.stages(); ++s) {
    const FinStructure m = chain.stage(s);
    std::vector<std::set<Tuple>> sols;
    for (const auto& d : sets) {
      auto v = solutions(m, d);
      sols.emplace_back(v.begin(), v.end());
    }
    for (std::size_t i = 0; i < sets.size(); ++i)
      for (std::size_t j = i + 1; j < sets.size(); ++j) {
        std::set<Tuple> u = sols[i];
        u.insert(sols[j].begin(), sols[j].end());
        UnionRow row{s, i, j, sols[i].size(), sols[j].size(), u.size(), false};
        row.ok = std::max(row.c_left, row.c_right) <= row.c_union && row.c_union <= row.c_left + row.c_right;
        rep.violations += !row.ok;
        rep.unions.push_back(row);
      }
    if (fibered) {
      const auto xs = solutions(m, fibered->domain);
      const auto zs = solutions(m, fibered->base);
      std::vector<std::uint64_t> fiber(zs.size(), 0);
      std::uint64_t unmapped = 0;
      auto env = map_cf->fresh_env();
      const std::size_t kx = fibered->domain.solution_vars.size();
      for (const auto& x : xs) {
        bool mapped = false;
        std::copy(x.begin(), x.end(), env.begin());
        for (std::size_t zi = 0; zi < zs.size(); ++zi) {
          std::copy(zs[zi].begin(), zs[zi].end(), env.begin() + static_cast<std::ptrdiff_t>(kx));
          if (map_cf->eval(m, env)) {
            ++fiber[zi];
            mapped = true;
          }
        }
        unmapped += !mapped;
      }
      FiberRow row{s, xs.size(), fiber.empty() ? 0 : *std::max_element(fiber.begin(), fiber.end()), zs.size(), unmapped, false};
      row.ok = row.c_domain <= row.max_fiber * row.c_base;
      rep.violations += !row.ok;
      rep.fibers.push_back(row);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Measure

struct Rational {
  std::uint64_t num = 0, den = 1;

  static Rational make(std::uint64_t n, std::uint64_t d) {
    if (d == 0) throw std::domain_error("rational with zero denominator");
    const std::uint64_t g = std::gcd(n, d);
    return {n / g, d / g};
  }
  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
  std::string to_string() const { return std::to_string(num) + "/" + std::to_string(den); }
  friend bool operator==(const Rational&, const Rational&) = default;
};

// |Y| / |X| at one stage.
inline Rational mu(const FinStructure& m, const DefinableSet& x, const DefinableSet& y) {
  const std::uint64_t cx = count(m, x);
  if (cx == 0) throw std::domain_error("mu: X is empty");
  return Rational::make(count(m, y), cx);
}

inline std::vector<Rational> mu_trend(const StageChain& chain, const DefinableSet& x, const DefinableSet& y,
                                      std::size_t first_stage = 0) {
  const DimTrend tx = trend(chain, x, first_stage), ty = trend(chain, y, first_stage);
  std::vector<Rational> out;
  for (std::size_t i = 0; i < tx.counts.size(); ++i) {
    if (tx.counts[i] == 0) throw std::domain_error("mu: X is empty at stage " + std::to_string(first_stage + i));
    out.push_back(Rational::make(ty.counts[i], tx.counts[i]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV: stage,count,log_count

inline void write_trend_csv(std::ostream& os, const DimTrend& t) {
  os << "stage,count,log_count\n";
  for (std::size_t i = 0; i < t.counts.size(); ++i)
    os << t.first_stage + i << ',' << t.counts[i] << ',' << to_string(t.log_at(i)) << '\n';
}

struct CsvError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline DimTrend read_trend_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "stage,count,log_count") throw CsvError("trend csv: bad header");
  DimTrend t;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[3];
    for (int k = 0; k < 3; ++k)
      if (!std::getline(ls, f[k], ',')) throw CsvError("trend csv: short row at line " + std::to_string(lineno));
    std::size_t stage;
    std::uint64_t c;
    try {
      stage = std::stoull(f[0]);
      c = std::stoull(f[1]);
    } catch (const std::exception&) {
      throw CsvError("trend csv: bad number at line " + std::to_string(lineno));
    }
    if (t.counts.empty()) t.first_stage = stage;
    else if (stage != t.first_stage + t.counts.size()) throw CsvError("trend csv: stages not consecutive at line " + std::to_string(lineno));
    const LogCount expect = LogCount::of(c);
    if (expect.neg_inf ? f[2] != "-inf" : (f[2] == "-inf" || std::abs(std::stod(f[2]) - expect.value) > 1e-12))
      throw CsvError("trend csv: log_count disagrees with count at line " + std::to_string(lineno));
    t.counts.push_back(c);
  }
  if (t.counts.empty()) throw CsvError("trend csv: no rows");
  return t;
}

}  // namespace pseudofin

#endif  // PSEUDOFIN_DIMENSION_HPP
