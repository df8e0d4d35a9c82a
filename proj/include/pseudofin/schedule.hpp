#ifndef PSEUDOFIN_SCHEDULE_HPP
#define PSEUDOFIN_SCHEDULE_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pseudofin/formula.hpp"
#include "pseudofin/level.hpp"

namespace pseudofin {

// A pair (phi(x; y), alpha): M strongly satisfies it when every a in V_alpha
// that gets a phi-witness in some extension model already has one in V_{alpha+1}.
struct ScheduleEntry {
  Formula formula;
  std::vector<std::string> x;
  std::vector<std::string> y;
  LevelOrdinal level;
  std::size_t position = 0;
  std::size_t catalogue_index = 0;  // identifies (formula, split); same index, same pair
  std::string label;
  bool axiom = false;  // drawn from the theory's axiom list
  friend bool operator==(const ScheduleEntry&, const ScheduleEntry&) = default;
};

struct CatalogueItem {
  Formula formula;
  std::vector<std::string> x;
  std::vector<std::string> y;
  std::string label;
  bool axiom = false;
};

inline constexpr std::uint64_t kPairingBase = 4;

// j + 1 = B^hi * m with B not dividing m, and lo = rank of m among the
// non-multiples of B. A bijection N -> N x N in which `lo` takes (B-1)/B of
// all positions, so fresh values of `lo` arrive fast and `hi` grows slowly.
inline std::pair<std::uint64_t, std::uint64_t> unpair(std::uint64_t j) {
  std::uint64_t m = j + 1, hi = 0;
  while (m % kPairingBase == 0) {
    m /= kPairingBase;
    ++hi;
  }
  return {m - 1 - m / kPairingBase, hi};
}

inline std::uint64_t pair(std::uint64_t lo, std::uint64_t hi) {
  std::uint64_t v = lo + lo / (kPairingBase - 1) + 1;
  for (std::uint64_t k = 0; k < hi; ++k) v *= kPairingBase;
  return v - 1;
}

// Cantor: t -> (a, b) along the diagonals a + b = 0, 1, 2, ...
inline std::pair<std::uint64_t, std::uint64_t> cantor_unpair(std::uint64_t t) {
  std::uint64_t s = 0;
  while ((s + 1) * (s + 2) / 2 <= t) ++s;
  const std::uint64_t b = t - s * (s + 1) / 2;
  return {s - b, b};
}

inline std::uint64_t cantor_pair(std::uint64_t a, std::uint64_t b) { return (a + b) * (a + b + 1) / 2 + b; }

// Position i of the schedule decodes as
//   level tag  = i even ? Fin : OmegaPlus
//   i/2        -> (t, repetition)              by unpair
//   t          -> (catalogue c, level index n) by cantor_unpair
// so each (catalogue item, level) pair recurs at repetition r = 0, 1, 2, ...
struct Coordinates {
  std::uint64_t catalogue = 0;
  std::uint64_t level_index = 0;
  std::uint64_t repetition = 0;
  bool omega_plus = false;
};

inline Coordinates decode_position(std::uint64_t i) {
  Coordinates c;
  c.omega_plus = (i % 2) == 1;
  auto [t, r] = unpair(i / 2);
  auto [cat, n] = cantor_unpair(t);
  c.catalogue = cat;
  c.level_index = n;
  c.repetition = r;
  return c;
}

inline std::uint64_t encode_position(const Coordinates& c) {
  return 2 * pair(cantor_pair(c.catalogue, c.level_index), c.repetition) + (c.omega_plus ? 1 : 0);
}

// Every pair first seen before position N recurs before fairness_horizon(N):
// the next repetition of position i = 2j + tag sits at 2(B(j+1) - 1) + tag.
inline std::uint64_t fairness_horizon(std::uint64_t n) { return kPairingBase * (n + 2); }

namespace detail {

// Canonical quantifier-free formulas: variables v0, v1, ... in order of first
// occurrence, listed by (variables + nodes) and then by node count.
class GenericFormulas {
 public:
  explicit GenericFormulas(Signature sig) : sig_(std::move(sig)) {}

  const Formula& at(std::size_t i) {
    while (items_.size() <= i) grow();
    return items_[i].first;
  }
  std::size_t variable_count(std::size_t i) {
    at(i);
    return items_[i].second;
  }

 private:
  Signature sig_;
  std::vector<std::pair<Formula, std::size_t>> items_;
  std::size_t diagonal_ = 1;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<Formula>> by_shape_;  // (var bound, nodes)

  // All formulas with exactly `nodes` nodes over variables v0..v_{vars-1}.
  const std::vector<Formula>& shapes(std::size_t vars, std::size_t nodes) {
    auto key = std::make_pair(vars, nodes);
    if (auto it = by_shape_.find(key); it != by_shape_.end()) return it->second;
    std::vector<Formula> out;
    if (nodes == 1) {
      for (const auto& rel : sig_.relations()) {
        std::vector<std::size_t> pick(rel.arity, 0);
        while (true) {
          std::vector<std::string> args;
          for (std::size_t p : pick) args.push_back("v" + std::to_string(p));
          out.push_back(Formula::atom(rel.name, args));
          std::size_t pos = rel.arity;
          while (pos > 0 && ++pick[pos - 1] == vars) pick[--pos] = 0;
          if (pos == 0) break;
        }
      }
      for (std::size_t a = 0; a < vars; ++a)
        for (std::size_t b = a; b < vars; ++b) out.push_back(Formula::equal("v" + std::to_string(a), "v" + std::to_string(b)));
    } else {
      for (const Formula& f : shapes(vars, nodes - 1)) out.push_back(Formula::negate(f));
      for (std::size_t left = 1; left + 1 < nodes; ++left) {
        const auto lhs = shapes(vars, left);
        const auto rhs = shapes(vars, nodes - 1 - left);
        for (const Formula& l : lhs)
          for (const Formula& r : rhs) out.push_back(Formula::conj(l, r));
        for (const Formula& l : lhs)
          for (const Formula& r : rhs) out.push_back(Formula::disj(l, r));
      }
    }
    return by_shape_[key] = std::move(out);
  }

  static bool canonical(const Formula& f, std::size_t vars) {
    auto fv = free_variables(f);
    if (fv.size() != vars) return false;
    for (std::size_t i = 0; i < fv.size(); ++i)
      if (fv[i] != "v" + std::to_string(i)) return false;
    return true;
  }

  void grow() {
    // Diagonal d holds formulas with v variables and d - v nodes.
    while (true) {
      ++diagonal_;
      bool any = false;
      for (std::size_t nodes = 1; nodes < diagonal_; ++nodes) {
        const std::size_t vars = diagonal_ - nodes;
        for (const Formula& f : shapes(vars, nodes))
          if (canonical(f, vars)) {
            items_.emplace_back(f, vars);
            any = true;
          }
      }
      if (any) return;
    }
  }
};

}  // namespace detail

// Priority stream: item p, or nullopt once the stream has ended.
using PriorityStream = std::function<std::optional<CatalogueItem>(std::size_t)>;

inline PriorityStream priority_list(std::vector<CatalogueItem> items) {
  return [items = std::move(items)](std::size_t p) -> std::optional<CatalogueItem> {
    if (p < items.size()) return items[p];
    return std::nullopt;
  };
}

// The formula catalogue: positions c with c % 4 != 3 take the priority stream
// (while it lasts), the rest the generic enumeration of every quantifier-free
// formula with every split of its variables.
class Catalogue {
 public:
  explicit Catalogue(const Signature& sig, PriorityStream priority = {}) : generic_(sig), priority_(std::move(priority)) {}

  const CatalogueItem& at(std::size_t c) {
    while (items_.size() <= c) {
      const std::size_t next = items_.size();
      std::optional<CatalogueItem> p;
      if (next % 4 != 3 && priority_ && !ended_) {
        p = priority_(next - next / 4);
        ended_ = !p;
      }
      items_.push_back(p ? std::move(*p) : next_generic());
    }
    return items_[c];
  }

 private:
  detail::GenericFormulas generic_;
  PriorityStream priority_;
  bool ended_ = false;
  std::vector<CatalogueItem> items_;
  std::size_t formula_ = 0;
  std::size_t mask_ = 0;

  CatalogueItem next_generic() {
    const Formula& f = generic_.at(formula_);
    const std::size_t vars = generic_.variable_count(formula_);
    CatalogueItem item{f, {}, {}, "", false};
    for (std::size_t v = 0; v < vars; ++v) ((mask_ >> v) & 1u ? item.y : item.x).push_back("v" + std::to_string(v));
    item.label = to_string(f) + " ; y=" + std::to_string(mask_);
    if (++mask_ == (std::size_t{1} << vars)) {
      mask_ = 0;
      ++formula_;
    }
    return item;
  }
};

inline ScheduleEntry schedule_entry(Catalogue& cat, std::uint64_t i) {
  const Coordinates c = decode_position(i);
  const CatalogueItem& item = cat.at(c.catalogue);
  const auto n = static_cast<std::uint32_t>(c.level_index);
  return ScheduleEntry{item.formula, item.x, item.y,
                       c.omega_plus ? LevelOrdinal::omega_plus(n) : LevelOrdinal::fin(n), i, c.catalogue,
                       item.label, item.axiom};
}

inline std::vector<ScheduleEntry> enumerate_schedule(const Signature& sig, std::size_t count, PriorityStream priority = {}) {
  Catalogue cat(sig, std::move(priority));
  std::vector<ScheduleEntry> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(schedule_entry(cat, i));
  return out;
}

}  // namespace pseudofin

#endif  // PSEUDOFIN_SCHEDULE_HPP
