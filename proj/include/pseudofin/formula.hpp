#ifndef PSEUDOFIN_FORMULA_HPP
#define PSEUDOFIN_FORMULA_HPP

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pseudofin/level.hpp"

namespace pseudofin {

struct RelationSymbol {
  std::string name;
  std::size_t arity = 0;
  friend bool operator==(const RelationSymbol&, const RelationSymbol&) = default;
};

// A finite relational signature. Relation order is significant: it fixes the
// order of the generic formula enumeration and of serialized relations.
class Signature {
 public:
  Signature() = default;
  explicit Signature(std::vector<RelationSymbol> relations) : relations_(std::move(relations)) {
    for (std::size_t i = 0; i < relations_.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (relations_[i].name == relations_[j].name)
          throw std::invalid_argument("duplicate relation symbol " + relations_[i].name);
  }

  const std::vector<RelationSymbol>& relations() const { return relations_; }
  std::size_t size() const { return relations_.size(); }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < relations_.size(); ++i)
      if (relations_[i].name == name) return i;
    return std::nullopt;
  }

  friend bool operator==(const Signature&, const Signature&) = default;

 private:
  std::vector<RelationSymbol> relations_;
};

class Formula {
 public:
  enum class Kind { Atom, Equal, Not, And, Or, Exists };

  Kind kind = Kind::Equal;
  std::string symbol;                 // Atom
  std::vector<std::string> vars;      // Atom arguments, Equal operands, Exists bound variables
  std::vector<Formula> children;      // Not: 1, And/Or: 2, Exists: 1
  std::optional<LevelOrdinal> guard;  // Exists only: bound variables range over V_guard

  static Formula atom(std::string symbol, std::vector<std::string> args) {
    Formula f;
    f.kind = Kind::Atom;
    f.symbol = std::move(symbol);
    f.vars = std::move(args);
    return f;
  }
  static Formula equal(std::string lhs, std::string rhs) {
    Formula f;
    f.kind = Kind::Equal;
    f.vars = {std::move(lhs), std::move(rhs)};
    return f;
  }
  static Formula negate(Formula body) {
    Formula f;
    f.kind = Kind::Not;
    f.children.push_back(std::move(body));
    return f;
  }
  static Formula conj(Formula lhs, Formula rhs) { return binary(Kind::And, std::move(lhs), std::move(rhs)); }
  static Formula disj(Formula lhs, Formula rhs) { return binary(Kind::Or, std::move(lhs), std::move(rhs)); }
  static Formula exists(std::vector<std::string> bound, Formula body,
                        std::optional<LevelOrdinal> guard = std::nullopt) {
    Formula f;
    f.kind = Kind::Exists;
    f.vars = std::move(bound);
    f.children.push_back(std::move(body));
    f.guard = guard;
    return f;
  }

  // Left-nested conjunction; an empty list is rejected since there is no "true" node.
  static Formula conj_all(std::vector<Formula> parts) {
    if (parts.empty()) throw std::invalid_argument("empty conjunction");
    Formula acc = std::move(parts.front());
    for (std::size_t i = 1; i < parts.size(); ++i) acc = conj(std::move(acc), std::move(parts[i]));
    return acc;
  }

  friend bool operator==(const Formula&, const Formula&) = default;

 private:
  static Formula binary(Kind kind, Formula lhs, Formula rhs) {
    Formula f;
    f.kind = kind;
    f.children.push_back(std::move(lhs));
    f.children.push_back(std::move(rhs));
    return f;
  }
};

struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what + " at position " + std::to_string(position)), position(position) {}
  std::size_t position;
};

struct SignatureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void collect_free(const Formula& f, std::vector<std::string>& bound, std::vector<std::string>& out) {
  auto note = [&](const std::string& v) {
    if (std::find(bound.begin(), bound.end(), v) != bound.end()) return;
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  };
  switch (f.kind) {
    case Formula::Kind::Atom:
    case Formula::Kind::Equal:
      for (const auto& v : f.vars) note(v);
      break;
    case Formula::Kind::Not:
    case Formula::Kind::And:
    case Formula::Kind::Or:
      for (const auto& c : f.children) collect_free(c, bound, out);
      break;
    case Formula::Kind::Exists: {
      const std::size_t mark = bound.size();
      bound.insert(bound.end(), f.vars.begin(), f.vars.end());
      collect_free(f.children.front(), bound, out);
      bound.resize(mark);
      break;
    }
  }
}

}  // namespace detail

// Free variables in order of first occurrence.
inline std::vector<std::string> free_variables(const Formula& f) {
  std::vector<std::string> bound, out;
  detail::collect_free(f, bound, out);
  return out;
}

inline bool is_quantifier_free(const Formula& f) {
  if (f.kind == Formula::Kind::Exists) return false;
  return std::all_of(f.children.begin(), f.children.end(), [](const Formula& c) { return is_quantifier_free(c); });
}

// A (possibly empty) prefix of Exists nodes over a quantifier-free matrix.
inline bool is_existential(const Formula& f) {
  const Formula* cur = &f;
  while (cur->kind == Formula::Kind::Exists) cur = &cur->children.front();
  return is_quantifier_free(*cur);
}

inline std::size_t formula_size(const Formula& f) {
  std::size_t n = 1;
  for (const auto& c : f.children) n += formula_size(c);
  return n;
}

inline void check_signature(const Formula& f, const Signature& sig) {
  if (f.kind == Formula::Kind::Atom) {
    auto idx = sig.find(f.symbol);
    if (!idx) throw SignatureError("unknown relation symbol " + f.symbol);
    if (sig.relations()[*idx].arity != f.vars.size())
      throw SignatureError("arity mismatch for " + f.symbol + ": expected " +
                           std::to_string(sig.relations()[*idx].arity) + ", got " + std::to_string(f.vars.size()));
  }
  for (const auto& c : f.children) check_signature(c, sig);
}

// ---------------------------------------------------------------------------
// Text syntax
//
//   formula := disj
//   disj    := conj ('|' conj)*
//   conj    := unary ('&' unary)*
//   unary   := '!' unary
//            | 'exists' var (',' var)* ['in' 'V' '[' level ']'] '.' formula
//            | '(' formula ')' | REL '(' [var (',' var)*] ')' | var '=' var | var '!=' var
//
// '&' and '|' associate to the left; an exists body extends as far right as possible.

namespace detail {

class Parser {
 public:
  Parser(std::string_view text, const Signature& sig) : text_(text), sig_(sig) {}

  Formula parse() {
    Formula f = parse_disj();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return f;
  }

 private:
  std::string_view text_;
  const Signature& sig_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  bool peek_str(std::string_view s) {
    skip_ws();
    return text_.substr(pos_, s.size()) == s;
  }

  void expect(char c) {
    if (!peek(c)) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  static bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
  static bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

  std::string peek_ident() {
    skip_ws();
    std::size_t p = pos_;
    if (p >= text_.size() || !ident_start(text_[p])) return {};
    while (p < text_.size() && ident_char(text_[p])) ++p;
    return std::string(text_.substr(pos_, p - pos_));
  }

  std::string ident(const char* what) {
    std::string id = peek_ident();
    if (id.empty()) fail(std::string("expected ") + what);
    pos_ += id.size();
    return id;
  }

  std::string variable() {
    const std::size_t at = (skip_ws(), pos_);
    std::string v = ident("variable");
    if (v == "exists" || v == "in") {
      pos_ = at;
      fail("keyword '" + v + "' used as variable");
    }
    return v;
  }

  Formula parse_disj() {
    Formula lhs = parse_conj();
    while (peek('|')) {
      ++pos_;
      lhs = Formula::disj(std::move(lhs), parse_conj());
    }
    return lhs;
  }

  Formula parse_conj() {
    Formula lhs = parse_unary();
    while (peek('&')) {
      ++pos_;
      lhs = Formula::conj(std::move(lhs), parse_unary());
    }
    return lhs;
  }

  Formula parse_unary() {
    if (peek('!') && !peek_str("!=")) {
      ++pos_;
      return Formula::negate(parse_unary());
    }
    if (peek_ident() == "exists") return parse_exists();
    return parse_primary();
  }

  Formula parse_exists() {
    pos_ += std::string_view("exists").size();
    std::vector<std::string> bound{variable()};
    while (peek(',')) {
      ++pos_;
      bound.push_back(variable());
    }
    std::optional<LevelOrdinal> guard;
    if (peek_ident() == "in") {
      pos_ += 2;
      if (peek_ident() != "V") fail("expected 'V' in level guard");
      pos_ += 1;
      expect('[');
      const std::size_t start = pos_;
      while (pos_ < text_.size() && text_[pos_] != ']') ++pos_;
      if (pos_ >= text_.size()) fail("unterminated level guard");
      std::string lv(text_.substr(start, pos_ - start));
      lv.erase(std::remove_if(lv.begin(), lv.end(), [](unsigned char c) { return std::isspace(c); }), lv.end());
      try {
        guard = LevelOrdinal::parse(lv);
      } catch (const std::invalid_argument&) {
        pos_ = start;
        fail("bad level '" + lv + "'");
      }
      ++pos_;
    }
    expect('.');
    return Formula::exists(std::move(bound), parse_disj(), guard);
  }

  Formula parse_primary() {
    skip_ws();
    if (peek('(')) {
      ++pos_;
      Formula f = parse_disj();
      expect(')');
      return f;
    }
    const std::size_t at = pos_;
    std::string name = peek_ident();
    if (name.empty()) fail("expected formula");
    pos_ += name.size();
    if (peek('(')) {
      ++pos_;
      std::vector<std::string> args;
      if (!peek(')')) {
        args.push_back(variable());
        while (peek(',')) {
          ++pos_;
          args.push_back(variable());
        }
      }
      expect(')');
      auto idx = sig_.find(name);
      if (!idx) {
        pos_ = at;
        fail("unknown relation symbol '" + name + "'");
      }
      if (sig_.relations()[*idx].arity != args.size()) {
        pos_ = at;
        fail("arity mismatch for '" + name + "': expected " + std::to_string(sig_.relations()[*idx].arity) +
             ", got " + std::to_string(args.size()));
      }
      return Formula::atom(std::move(name), std::move(args));
    }
    if (name == "exists" || name == "in") {
      pos_ = at;
      fail("keyword '" + name + "' used as variable");
    }
    if (peek_str("!=")) {
      pos_ += 2;
      return Formula::negate(Formula::equal(std::move(name), variable()));
    }
    if (peek('=')) {
      ++pos_;
      return Formula::equal(std::move(name), variable());
    }
    fail("expected '(' or '=' after '" + name + "'");
  }
};

inline int precedence(const Formula& f) {
  switch (f.kind) {
    case Formula::Kind::Exists: return 0;
    case Formula::Kind::Or: return 1;
    case Formula::Kind::And: return 2;
    default: return 3;
  }
}

inline void print_into(const Formula& f, std::string& out);

inline void print_child(const Formula& child, bool parens, std::string& out) {
  if (parens) out += '(';
  print_into(child, out);
  if (parens) out += ')';
}

inline void print_into(const Formula& f, std::string& out) {
  switch (f.kind) {
    case Formula::Kind::Atom:
      out += f.symbol;
      out += '(';
      for (std::size_t i = 0; i < f.vars.size(); ++i) {
        if (i) out += ',';
        out += f.vars[i];
      }
      out += ')';
      break;
    case Formula::Kind::Equal:
      out += f.vars[0] + "=" + f.vars[1];
      break;
    case Formula::Kind::Not: {
      const Formula& body = f.children.front();
      if (body.kind == Formula::Kind::Equal) {
        out += body.vars[0] + " != " + body.vars[1];
      } else {
        out += '!';
        print_child(body, precedence(body) < 3, out);
      }
      break;
    }
    case Formula::Kind::And:
    case Formula::Kind::Or: {
      const int p = precedence(f);
      print_child(f.children[0], precedence(f.children[0]) < p, out);
      out += f.kind == Formula::Kind::And ? " & " : " | ";
      print_child(f.children[1], precedence(f.children[1]) <= p, out);
      break;
    }
    case Formula::Kind::Exists:
      out += "exists ";
      for (std::size_t i = 0; i < f.vars.size(); ++i) {
        if (i) out += ", ";
        out += f.vars[i];
      }
      if (f.guard) out += " in V[" + f.guard->to_string() + "]";
      out += ". ";
      print_into(f.children.front(), out);
      break;
  }
}

}  // namespace detail

inline Formula parse_formula(std::string_view text, const Signature& sig) { return detail::Parser(text, sig).parse(); }

inline std::string to_string(const Formula& f) {
  std::string out;
  detail::print_into(f, out);
  return out;
}

// Renames free and bound occurrences alike; callers use it on fresh names only.
// Renames free occurrences only. Capture by an inner quantifier is not avoided.
inline Formula rename_variables(const Formula& f, const std::vector<std::pair<std::string, std::string>>& mapping) {
  Formula g = f;
  if (f.kind == Formula::Kind::Exists) {
    std::vector<std::pair<std::string, std::string>> inner;
    for (const auto& m : mapping)
      if (std::find(f.vars.begin(), f.vars.end(), m.first) == f.vars.end()) inner.push_back(m);
    g.children[0] = rename_variables(f.children[0], inner);
    return g;
  }
  for (auto& v : g.vars)
    for (const auto& [from, to] : mapping)
      if (v == from) {
        v = to;
        break;
      }
  for (auto& c : g.children) c = rename_variables(c, mapping);
  return g;
}

// Printed normal form up to commutativity of &, | and =, and of the argument
// order of the listed binary relations. Equal strings mean equivalent formulas.
inline std::string canonical_string(const Formula& f, const std::vector<std::string>& symmetric) {
  switch (f.kind) {
    case Formula::Kind::Atom: {
      std::vector<std::string> args = f.vars;
      if (args.size() == 2 && std::find(symmetric.begin(), symmetric.end(), f.symbol) != symmetric.end() && args[1] < args[0])
        std::swap(args[0], args[1]);
      std::string out = f.symbol + "(";
      for (std::size_t i = 0; i < args.size(); ++i) out += (i ? "," : "") + args[i];
      return out + ")";
    }
    case Formula::Kind::Equal:
      return std::min(f.vars[0], f.vars[1]) + "=" + std::max(f.vars[0], f.vars[1]);
    case Formula::Kind::Not:
      return "!" + canonical_string(f.children[0], symmetric);
    case Formula::Kind::And:
    case Formula::Kind::Or: {
      std::vector<std::string> parts;
      std::vector<const Formula*> stack{&f};
      while (!stack.empty()) {
        const Formula* g = stack.back();
        stack.pop_back();
        if (g->kind == f.kind) {
          stack.push_back(&g->children[0]);
          stack.push_back(&g->children[1]);
        } else {
          parts.push_back(canonical_string(*g, symmetric));
        }
      }
      std::sort(parts.begin(), parts.end());
      parts.erase(std::unique(parts.begin(), parts.end()), parts.end());
      std::string out = f.kind == Formula::Kind::And ? "&[" : "|[";
      for (const auto& p : parts) out += p + ";";
      return out + "]";
    }
    case Formula::Kind::Exists: {
      std::string out = "E" + (f.guard ? f.guard->to_string() : std::string()) + "[";
      for (const auto& v : f.vars) out += v + ",";
      return out + "]" + canonical_string(f.children[0], symmetric);
    }
  }
  return {};
}

// For each position k of `vars`, the previous position interchangeable with it
// (swapping the two variables leaves the canonical form unchanged), or
// kNoBoundPos. Interchangeability is closed under composition, so each block
// carries the full symmetric group and its values can be taken in sorted order.
inline constexpr std::size_t kNoBoundPos = static_cast<std::size_t>(-1);

inline std::vector<std::size_t> interchangeable_chain(const Formula& f, const std::vector<std::string>& vars,
                                                      const std::vector<std::string>& symmetric) {
  const std::string base = canonical_string(f, symmetric);
  const std::size_t n = vars.size();
  std::vector<std::size_t> block(n);
  for (std::size_t i = 0; i < n; ++i) block[i] = i;
  for (std::size_t j = 1; j < n; ++j)
    for (std::size_t i = 0; i < j; ++i) {
      if (block[i] != i) continue;  // compare against block representatives only
      if (canonical_string(rename_variables(f, {{vars[i], vars[j]}, {vars[j], vars[i]}}), symmetric) == base) {
        block[j] = i;
        break;
      }
    }
  std::vector<std::size_t> prev(n, kNoBoundPos);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = j; i-- > 0;)
      if ((block[i] == i ? i : block[i]) == (block[j] == j ? j : block[j])) {
        prev[j] = i;
        break;
      }
  return prev;
}

}  // namespace pseudofin

#endif  // PSEUDOFIN_FORMULA_HPP
