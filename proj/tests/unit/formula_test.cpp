#include <gtest/gtest.h>

#include <random>

#include "pseudofin/formula.hpp"
#include "support.hpp"

using namespace pseudofin;

namespace {

Signature sig_e() { return Signature({{"E", 2}}); }
Signature sig_mixed() { return Signature({{"E", 2}, {"P", 1}, {"T", 3}}); }

// random formula with quantifiers, for round trips
Formula random_formula(const Signature& sig, std::size_t depth, std::mt19937_64& rng) {
  std::vector<std::string> vars{"x0", "x1", "y", "z_1"};
  if (depth > 0 && std::uniform_int_distribution<int>(0, 5)(rng) == 0) {
    std::optional<LevelOrdinal> guard;
    switch (std::uniform_int_distribution<int>(0, 3)(rng)) {
      case 0: guard = LevelOrdinal::fin(2); break;
      case 1: guard = LevelOrdinal::omega(); break;
      case 2: guard = LevelOrdinal::omega_plus(3); break;
      default: break;
    }
    return Formula::exists({"y"}, random_formula(sig, depth - 1, rng), guard);
  }
  return testsupport::random_qf(sig, vars, depth, rng);
}

}  // namespace

TEST(Level, OrderAndSuccessor) {
  EXPECT_LT(LevelOrdinal::fin(0), LevelOrdinal::fin(1));
  EXPECT_LT(LevelOrdinal::fin(1000), LevelOrdinal::omega());
  EXPECT_LT(LevelOrdinal::omega(), LevelOrdinal::omega_plus(1));
  EXPECT_EQ(LevelOrdinal::fin(3).successor(), LevelOrdinal::fin(4));
  EXPECT_EQ(LevelOrdinal::omega().successor(), LevelOrdinal::omega_plus(1));
}

TEST(Level, ParsePrintRoundTrip) {
  for (auto lv : {LevelOrdinal::fin(0), LevelOrdinal::fin(17), LevelOrdinal::omega(), LevelOrdinal::omega_plus(5)})
    EXPECT_EQ(LevelOrdinal::parse(lv.to_string()), lv);
  EXPECT_EQ(LevelOrdinal::omega().to_string(), "w");
  EXPECT_EQ(LevelOrdinal::omega_plus(2).to_string(), "w+2");
  EXPECT_THROW(LevelOrdinal::parse(""), std::invalid_argument);
  EXPECT_THROW(LevelOrdinal::parse("w2"), std::invalid_argument);
  EXPECT_THROW(LevelOrdinal::parse("3a"), std::invalid_argument);
  EXPECT_THROW(LevelOrdinal::parse("99999999999"), std::invalid_argument);
}

TEST(Parse, ConjunctionOfAtomAndEquality) {
  const Formula f = parse_formula("E(x0,x1) & x0=x1", sig_e());
  const Formula want = Formula::conj(Formula::atom("E", {"x0", "x1"}), Formula::equal("x0", "x1"));
  EXPECT_EQ(f, want);
}

TEST(Parse, PrecedenceAndParentheses) {
  const auto sig = sig_e();
  // & binds tighter than |
  EXPECT_EQ(parse_formula("x=y | x=z & y=z", sig),
            Formula::disj(Formula::equal("x", "y"), Formula::conj(Formula::equal("x", "z"), Formula::equal("y", "z"))));
  EXPECT_EQ(parse_formula("(x=y | x=z) & y=z", sig),
            Formula::conj(Formula::disj(Formula::equal("x", "y"), Formula::equal("x", "z")), Formula::equal("y", "z")));
  EXPECT_EQ(parse_formula("!E(x,y)", sig), Formula::negate(Formula::atom("E", {"x", "y"})));
  EXPECT_EQ(parse_formula("x != y", sig), Formula::negate(Formula::equal("x", "y")));
}

TEST(Parse, ExistsWithGuard) {
  const Formula f = parse_formula("exists y in V[w+1]. E(x, y)", sig_e());
  ASSERT_EQ(f.kind, Formula::Kind::Exists);
  EXPECT_EQ(f.vars, std::vector<std::string>{"y"});
  ASSERT_TRUE(f.guard.has_value());
  EXPECT_EQ(*f.guard, LevelOrdinal::omega_plus(1));
  EXPECT_EQ(free_variables(f), std::vector<std::string>{"x"});
  EXPECT_FALSE(is_quantifier_free(f));
  EXPECT_TRUE(is_existential(f));
}

TEST(Parse, ArityMismatch) {
  try {
    parse_formula("E(x0)", sig_e());
    FAIL() << "no error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("arity"), std::string::npos);
    EXPECT_EQ(e.position, 0u);
  }
}

TEST(Parse, UnknownSymbolAndSyntaxPositions) {
  try {
    parse_formula("x=y & Q(x)", sig_e());
    FAIL() << "no error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown relation"), std::string::npos);
    EXPECT_EQ(e.position, 6u);
  }
  try {
    parse_formula("x=y &", sig_e());
    FAIL() << "no error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position, 5u);
  }
  EXPECT_THROW(parse_formula("E(x,y) E(x,y)", sig_e()), ParseError);
  EXPECT_THROW(parse_formula("exists . x=x", sig_e()), ParseError);
  EXPECT_THROW(parse_formula("exists y in V[q]. x=y", sig_e()), ParseError);
  EXPECT_THROW(parse_formula("(x=y", sig_e()), ParseError);
}

TEST(Parse, RoundTripOnRandomFormulas) {
  std::mt19937_64 rng(11);
  const auto sig = sig_mixed();
  for (int i = 0; i < 3000; ++i) {
    const Formula f = random_formula(sig, 4, rng);
    const std::string text = to_string(f);
    const Formula g = parse_formula(text, sig);
    ASSERT_EQ(g, f) << text;
    ASSERT_EQ(to_string(g), text);
  }
}

TEST(Formula, FreeVariablesInFirstOccurrenceOrder) {
  const auto sig = sig_e();
  EXPECT_EQ(free_variables(parse_formula("E(b,a) & exists c. E(a,c) & c=d", sig)), (std::vector<std::string>{"b", "a", "d"}));
  EXPECT_EQ(formula_size(parse_formula("!(x=y) & E(x,y)", sig)), 4u);
}

TEST(Formula, CheckSignature) {
  const Formula f = Formula::atom("E", {"x"});
  EXPECT_THROW(check_signature(f, sig_e()), SignatureError);
  EXPECT_THROW(check_signature(Formula::atom("F", {"x", "y"}), sig_e()), SignatureError);
  EXPECT_NO_THROW(check_signature(Formula::atom("E", {"x", "y"}), sig_e()));
}

TEST(Formula, DuplicateRelationRejected) {
  EXPECT_THROW(Signature({{"E", 2}, {"E", 1}}), std::invalid_argument);
}

TEST(Formula, RenameRespectsBinding) {
  const auto sig = sig_e();
  const Formula f = parse_formula("E(x,y) & exists y. E(x,y)", sig);
  const Formula g = rename_variables(f, {{"y", "u"}, {"x", "v"}});
  EXPECT_EQ(g, parse_formula("E(v,u) & exists y. E(v,y)", sig));
}

TEST(Formula, CanonicalFormIgnoresOrderAndSymmetry) {
  const auto sig = sig_e();
  const std::vector<std::string> sym{"E"};
  EXPECT_EQ(canonical_string(parse_formula("E(x,y) & y=x", sig), sym), canonical_string(parse_formula("x=y & E(y,x)", sig), sym));
  EXPECT_NE(canonical_string(parse_formula("E(x,y)", sig), {}), canonical_string(parse_formula("E(y,x)", sig), {}));
}

TEST(Formula, InterchangeableChain) {
  const auto sig = sig_e();
  const std::vector<std::string> sym{"E"};
  // y0, y1 interchangeable; y2 is not
  const Formula f = parse_formula("E(x,y0) & E(x,y1) & !E(x,y2)", sig);
  const auto prev = interchangeable_chain(f, {"y0", "y1", "y2"}, sym);
  EXPECT_EQ(prev[0], kNoBoundPos);
  EXPECT_EQ(prev[1], 0u);
  EXPECT_EQ(prev[2], kNoBoundPos);
  // asymmetric relation: no swap allowed
  const auto none = interchangeable_chain(parse_formula("E(y0,y1)", sig), {"y0", "y1"}, {});
  EXPECT_EQ(none[1], kNoBoundPos);
}
