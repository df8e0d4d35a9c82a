#include <gtest/gtest.h>

#include <random>

#include "pseudofin/construction.hpp"
#include "support.hpp"

using namespace pseudofin;
namespace ts = testsupport;

namespace {

ScheduleEntry entry(const TheoryPlugin& p, const std::string& phi, std::vector<std::string> x, std::vector<std::string> y,
                    LevelOrdinal lv = LevelOrdinal::fin(0), std::size_t position = 0) {
  return ScheduleEntry{parse_formula(phi, p.signature()), std::move(x), std::move(y), lv, position, 0, phi, false};
}

const StageChain& chain_of(const std::string& name, std::size_t n = 8) {
  static std::map<std::pair<std::string, std::size_t>, StageChain> cache;
  auto key = std::make_pair(name, n);
  if (!cache.count(key)) cache.emplace(key, build_chain(*make_plugin(name), n));
  return cache.at(key);
}

FinStructure relevel(const FinStructure& m, std::size_t from, LevelOrdinal lv) {
  FinStructure out(m.signature());
  for (ElemId e = 0; e < m.size(); ++e) out.add_element(e >= from ? lv : m.level(e));
  for (std::size_t r = 0; r < m.signature().size(); ++r)
    for (const auto& t : m.relation(r)) out.add_tuple(r, t);
  return out;
}

}  // namespace

TEST(M0, GenericEquivalenceIsReflexivePoint) {
  auto p = make_plugin("generic_equivalence");
  const FinStructure m = build_m0(*p);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.level(0), LevelOrdinal::fin(0));
  EXPECT_TRUE(ts::edge(m, 0, 0));
  EXPECT_TRUE(p->validate_t_forall(m).empty());
}

TEST(M0, RandomGraphHasNoLoop) {
  auto p = make_plugin("random_graph");
  const FinStructure m = build_m0(*p);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_TRUE(m.relation(0).empty());
}

TEST(M0, InfiniteSetSinglePoint) {
  auto p = make_plugin("infinite_set");
  const FinStructure m = build_m0(*p);
  EXPECT_EQ(m.size(), 1u);
  EXPECT_EQ(m.signature().size(), 0u);
}

TEST(StrongSatisfaction, ReflexiveWitnessInsideM0) {
  auto p = make_plugin("generic_equivalence");
  EXPECT_TRUE(strongly_satisfies(build_m0(*p), entry(*p, "E(x,y)", {"x"}, {"y"}), *p));
}

TEST(StrongSatisfaction, UnrealizableIsVacuous) {
  auto p = make_plugin("random_graph");
  EXPECT_TRUE(strongly_satisfies(build_m0(*p), entry(*p, "R(y,y)", {}, {"y"}), *p));
}

TEST(StrongSatisfaction, MissingClassmateFails) {
  auto p = make_plugin("generic_equivalence");
  EXPECT_FALSE(strongly_satisfies(build_m0(*p), entry(*p, "E(x,y) & !(y=x)", {"x"}, {"y"}), *p));
}

TEST(BuildStage, AddsClassmateAtNextLevel) {
  auto p = make_plugin("generic_equivalence");
  const auto sigma = entry(*p, "E(x,y) & !(y=x)", {"x"}, {"y"});
  std::vector<AuditEntry> audit;
  const FinStructure m1 = build_stage(build_m0(*p), {sigma}, *p, &audit, 1);
  ASSERT_EQ(m1.size(), 2u);
  EXPECT_EQ(m1.level(1), LevelOrdinal::fin(1));
  EXPECT_TRUE(ts::edge(m1, 0, 1));
  EXPECT_TRUE(ts::edge(m1, 1, 0));
  ASSERT_EQ(audit.size(), 1u);
  EXPECT_EQ(audit[0].cases, "2");
  EXPECT_TRUE(strongly_satisfies(m1, sigma, *p));

  // again: the witness is already there
  audit.clear();
  const FinStructure m2 = build_stage(m1, {sigma}, *p, &audit, 2);
  EXPECT_EQ(m2, m1);
  EXPECT_EQ(audit[0].cases, "1");
}

TEST(BuildStage, UnrealizableEntryIsCaseThree) {
  auto p = make_plugin("random_graph");
  FinStructure m = build_m0(*p);
  m.add_element(LevelOrdinal::fin(0));
  std::vector<AuditEntry> audit;
  const FinStructure out = build_stage(m, {entry(*p, "R(x,y) & R(y,y)", {"x"}, {"y"})}, *p, &audit);
  EXPECT_EQ(out, m);
  EXPECT_EQ(audit[0].cases, "33");
}

TEST(BuildStage, ProcessesEntriesByLevel) {
  auto p = make_plugin("infinite_set");
  // the w entry comes first in the list but runs last
  const std::vector<ScheduleEntry> entries{entry(*p, "!(y=x)", {"x"}, {"y"}, LevelOrdinal::omega(), 0),
                                           entry(*p, "!(y=x)", {"x"}, {"y"}, LevelOrdinal::fin(0), 1)};
  std::vector<AuditEntry> audit;
  build_stage(build_m0(*p), entries, *p, &audit);
  ASSERT_EQ(audit.size(), 2u);
  EXPECT_EQ(audit[0].position, 1u);
  EXPECT_EQ(audit[1].position, 0u);
}

TEST(BuildStage, RejectsInvalidPrevious) {
  auto p = make_plugin("random_graph");
  FinStructure m(p->signature());
  m.add_element(LevelOrdinal::fin(0));
  m.add_tuple(0, {0, 0});
  EXPECT_THROW(build_stage(m, {}, *p), InvariantViolation);
}

TEST(BuildChain, ZeroStages) {
  auto p = make_plugin("generic_equivalence");
  const StageChain c = build_chain(*p, 0);
  EXPECT_EQ(c.stages(), 1u);
  EXPECT_EQ(c.final, build_m0(*p));
  EXPECT_TRUE(c.audit.empty());
}

TEST(BuildChain, StrongSatisfactionOfProcessedEntries) {
  for (const auto& name : plugin_names()) {
    auto p = make_plugin(name);
    const StageChain& c = chain_of(name);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_TRUE(strongly_satisfies(c.final, c.schedule[i], *p)) << name << " " << i;
    // every stage also satisfies the entries it processed
    for (std::size_t n = 1; n < c.stages(); ++n)
      for (std::size_t i = 0; i < n; ++i) ASSERT_TRUE(strongly_satisfies(c.stage(n), c.schedule[i], *p)) << name;
  }
}

TEST(BuildChain, StagesAreSubstructuresAndValid) {
  for (const auto& name : plugin_names()) {
    auto p = make_plugin(name);
    const StageChain& c = chain_of(name);
    for (std::size_t n = 0; n < c.stages(); ++n) {
      const FinStructure m = c.stage(n);
      ASSERT_TRUE(p->validate_t_forall(m).empty());
      ASSERT_TRUE(ts::t_forall_ok(name, m));
      if (n > 0) { ASSERT_TRUE(is_substructure(c.stage(n - 1), m)); }
    }
  }
}

TEST(BuildChain, LevelFreezeInAudit) {
  for (const auto& name : plugin_names()) {
    const StageChain& c = chain_of(name);
    ASSERT_FALSE(c.audit.empty());
    for (const auto& a : c.audit) ASSERT_EQ(a.vset_before, a.vset_after) << name;
    // audit levels are sorted within each stage
    for (std::size_t i = 1; i < c.audit.size(); ++i)
      if (c.audit[i].stage == c.audit[i - 1].stage) { ASSERT_LE(c.audit[i - 1].level, c.audit[i].level); }
  }
}

TEST(BuildChain, NewWitnessesSitOneLevelUp) {
  const StageChain& c = chain_of("generic_equivalence");
  for (const auto& a : c.audit)
    for (ElemId e = static_cast<ElemId>(a.universe_before); e < a.universe_after; ++e) ASSERT_EQ(c.final.level(e), a.level.successor());
}

TEST(BuildChain, Deterministic) {
  for (const auto& name : plugin_names()) {
    auto p = make_plugin(name);
    EXPECT_EQ(chain_to_json(build_chain(*p, 6)).dump(), chain_to_json(build_chain(*p, 6)).dump()) << name;
  }
}

TEST(BuildChain, JsonRoundTrip) {
  for (const auto& name : plugin_names()) {
    const StageChain& c = chain_of(name);
    const StageChain back = chain_from_json(nlohmann::ordered_json::parse(chain_to_json(c).dump()));
    EXPECT_EQ(back, c) << name;
  }
}

TEST(BuildChain, JsonRejectsInconsistentSizes) {
  auto j = chain_to_json(chain_of("random_graph"));
  j["stage_sizes"].back() = 1000;
  EXPECT_THROW(chain_from_json(j), std::invalid_argument);
}

TEST(BuildChain, BudgetEnforced) {
  auto p = make_plugin("generic_equivalence");
  BuildOptions opts;
  opts.max_universe = 3;
  EXPECT_THROW(build_chain(*p, 8, opts), BudgetExceeded);
}

TEST(BuildChain, ExistentialFormulasPersist) {
  std::mt19937_64 rng(7);
  for (const auto& name : {"random_graph", "generic_equivalence"}) {
    const StageChain& c = chain_of(name);
    const Signature& sig = c.final.signature();
    for (int t = 0; t < 40; ++t) {
      const Formula f = Formula::exists({"z"}, ts::random_qf(sig, {"x", "z"}, 2, rng));
      const std::size_t i = static_cast<std::size_t>(t) % c.stages();
      const FinStructure mi = c.stage(i);
      for (const auto& s : solutions(mi, {f, {"x"}, {}, {}}))
        for (std::size_t j = i; j < c.stages(); ++j) ASSERT_TRUE(eval(c.stage(j), f, {{"x", s[0]}}));
    }
  }
}

TEST(Axioms, NothingProcessedNothingReported) {
  EXPECT_TRUE(verify_axioms_on_levels(build_m0(*make_plugin("random_graph")), {}).empty());
}

TEST(Axioms, HoldOnLevelsAfterProcessing) {
  for (const auto& name : plugin_names()) {
    const StageChain& c = chain_of(name);
    const auto processed = processed_axioms(c, 8);
    EXPECT_TRUE(verify_axioms_on_levels(c.final, processed).empty()) << name;
  }
}

TEST(Axioms, CorruptedLevelsReported) {
  const StageChain& c = chain_of("generic_equivalence");
  auto processed = processed_axioms(c, 8);
  ASSERT_FALSE(processed.empty());
  // push every element after M_0 far out of reach
  const FinStructure bad = relevel(c.final, 1, LevelOrdinal::omega_plus(50));
  EXPECT_FALSE(verify_axioms_on_levels(bad, processed).empty());
}

TEST(Embedding, SinglePoint) {
  auto p = make_plugin("random_graph");
  FinStructure a(p->signature());
  a.add_element(LevelOrdinal::fin(0));
  const auto e = embed_model(*p, a, chain_of("random_graph"));
  ASSERT_TRUE(e);
  ASSERT_EQ(e->image.size(), 1u);
  EXPECT_LE(e->chain.final.level(e->image[0]), LevelOrdinal::fin(1));
}

TEST(Embedding, EdgePreserved) {
  auto p = make_plugin("random_graph");
  FinStructure a(p->signature());
  a.add_element(LevelOrdinal::fin(0));
  a.add_element(LevelOrdinal::fin(0));
  ts::add_sym(a, 0, 1);
  const auto e = embed_model(*p, a, chain_of("random_graph"));
  ASSERT_TRUE(e);
  EXPECT_TRUE(ts::edge(e->chain.final, e->image[0], e->image[1]));
  EXPECT_LE(e->chain.final.level(e->image[1]), LevelOrdinal::fin(2));
  EXPECT_TRUE(is_substructure(chain_of("random_graph").final, e->chain.final));
}

TEST(Embedding, ClassPatternPreserved) {
  auto p = make_plugin("generic_equivalence");
  const FinStructure a = ts::partition_structure(p->signature(), {0, 1, 0});
  const auto e = embed_model(*p, a, chain_of("generic_equivalence"));
  ASSERT_TRUE(e);
  const auto& m = e->chain.final;
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_LE(m.level(e->image[i]), LevelOrdinal::fin(static_cast<std::uint32_t>(i + 1)));
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(ts::edge(m, e->image[i], e->image[j]), ts::edge(a, static_cast<ElemId>(i), static_cast<ElemId>(j)));
  }
  EXPECT_TRUE(p->validate_t_forall(m).empty());
}

TEST(Embedding, RandomSmallModelsKeepAtomicType) {
  std::mt19937_64 rng(9);
  for (const auto& name : plugin_names()) {
    auto p = make_plugin(name);
    for (int t = 0; t < 10; ++t) {
      const FinStructure a = ts::random_structure(name, p->signature(), 4, rng);
      const auto e = embed_model(*p, a, chain_of(name));
      ASSERT_TRUE(e) << name;
      std::set<ElemId> distinct(e->image.begin(), e->image.end());
      ASSERT_EQ(distinct.size(), a.size());
      for (std::size_t r = 0; r < a.signature().size(); ++r)
        for (ElemId u = 0; u < a.size(); ++u)
          for (ElemId v = 0; v < a.size(); ++v)
            ASSERT_EQ(a.holds(r, std::vector<ElemId>{u, v}), e->chain.final.holds(r, std::vector<ElemId>{e->image[u], e->image[v]}));
      ASSERT_TRUE(p->validate_t_forall(e->chain.final).empty());
    }
  }
}
