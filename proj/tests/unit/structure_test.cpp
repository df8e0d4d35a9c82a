#include <gtest/gtest.h>

#include <random>

#include "pseudofin/structure.hpp"
#include "support.hpp"

using namespace pseudofin;
namespace ts = testsupport;

namespace {

Signature sig_e() { return Signature({{"E", 2}}); }

FinStructure two_levels() {
  FinStructure m(sig_e());
  m.add_element(LevelOrdinal::fin(0));
  m.add_element(LevelOrdinal::fin(2));
  return m;
}

}  // namespace

TEST(VSet, SingletonAtLevelZero) {
  FinStructure m(sig_e());
  m.add_element(LevelOrdinal::fin(0));
  EXPECT_EQ(v_set(m, LevelOrdinal::fin(0)), std::vector<ElemId>{0});
}

TEST(VSet, LevelComparison) {
  const auto m = two_levels();
  EXPECT_EQ(v_set(m, LevelOrdinal::fin(1)), std::vector<ElemId>{0});
  EXPECT_EQ(v_set(m, LevelOrdinal::fin(2)), (std::vector<ElemId>{0, 1}));
}

TEST(VSet, MonotoneInLevel) {
  std::mt19937_64 rng(3);
  const std::vector<LevelOrdinal> ladder{LevelOrdinal::fin(0), LevelOrdinal::fin(1), LevelOrdinal::fin(2), LevelOrdinal::fin(50),
                                         LevelOrdinal::omega(), LevelOrdinal::omega_plus(1), LevelOrdinal::omega_plus(4)};
  for (int t = 0; t < 200; ++t) {
    FinStructure m = ts::random_structure("random_graph", sig_e(), 8, rng);
    ts::randomize_levels(m, rng);
    for (std::size_t i = 0; i + 1 < ladder.size(); ++i) {
      const auto lo = v_set(m, ladder[i]), hi = v_set(m, ladder[i + 1]);
      ASSERT_TRUE(std::includes(hi.begin(), hi.end(), lo.begin(), lo.end()));
    }
    // omega contains every finite level
    const auto w = v_set(m, LevelOrdinal::omega());
    for (std::uint32_t n = 0; n < 5; ++n) {
      const auto f = v_set(m, LevelOrdinal::fin(n));
      ASSERT_TRUE(std::includes(w.begin(), w.end(), f.begin(), f.end()));
    }
  }
}

TEST(Delta, EmptyDeltaIsIdentity) {
  const auto m = two_levels();
  EXPECT_EQ(apply_delta(m, ExtensionDelta{m.size(), {}, {}}), m);
}

TEST(Delta, AddsElementAndKeepsOldFacts) {
  FinStructure m = two_levels();
  m.add_tuple(0, {0, 1});
  const FinStructure before = m;
  ExtensionDelta d{2, {LevelOrdinal::fin(1)}, {{0, {0, 2}}}};
  const FinStructure e = apply_delta(m, d);
  EXPECT_EQ(e.size(), 3u);
  EXPECT_EQ(e.level(2), LevelOrdinal::fin(1));
  EXPECT_TRUE(e.holds(0, std::vector<ElemId>{0, 2}));
  EXPECT_TRUE(e.holds(0, std::vector<ElemId>{0, 1}));
  EXPECT_TRUE(is_substructure(m, e));
  EXPECT_EQ(m, before);  // input untouched
}

TEST(Delta, RejectsTupleAmongOldElements) {
  const auto m = two_levels();
  EXPECT_THROW(apply_delta(m, ExtensionDelta{2, {}, {{0, {0, 1}}}}), DeltaError);
}

TEST(Delta, RejectsUnknownElementsAndWrongBase) {
  const auto m = two_levels();
  EXPECT_THROW(apply_delta(m, ExtensionDelta{2, {LevelOrdinal::fin(0)}, {{0, {0, 5}}}}), DeltaError);
  EXPECT_THROW(apply_delta(m, ExtensionDelta{1, {LevelOrdinal::fin(0)}, {}}), DeltaError);
  EXPECT_THROW(apply_delta(m, ExtensionDelta{2, {LevelOrdinal::fin(0)}, {{0, {2}}}}), DeltaError);
  EXPECT_THROW(apply_delta(m, ExtensionDelta{2, {LevelOrdinal::fin(0)}, {{3, {0, 2}}}}), DeltaError);
}

TEST(Delta, RestrictionRecoversOldStructure) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 300; ++t) {
    FinStructure m = ts::random_structure("random_graph", sig_e(), 5, rng);
    ts::randomize_levels(m, rng);
    const FinStructure copy = m;
    ExtensionDelta d{m.size(), {}, {}};
    const std::size_t fresh = std::uniform_int_distribution<std::size_t>(0, 3)(rng);
    for (std::size_t i = 0; i < fresh; ++i) d.new_levels.push_back(LevelOrdinal::fin(static_cast<std::uint32_t>(i)));
    std::bernoulli_distribution coin(0.4);
    for (ElemId u = 0; u < m.size() + fresh; ++u)
      for (ElemId v = static_cast<ElemId>(m.size()); v < m.size() + fresh; ++v)
        if (coin(rng)) d.tuples.push_back({0, {u, v}});
    const FinStructure e = apply_delta(m, d);
    ASSERT_EQ(m, copy);
    ASSERT_EQ(e.restrict_to_prefix(m.size()), m);
    for (ElemId i = 0; i < m.size(); ++i) ASSERT_EQ(e.level(i), m.level(i));
    for (const auto& t : e.relation(0))
      if (t[0] < m.size() && t[1] < m.size()) { ASSERT_TRUE(m.holds(0, t)); }
  }
}

TEST(Structure, AddTupleValidates) {
  FinStructure m = two_levels();
  EXPECT_THROW(m.add_tuple(0, {0}), DeltaError);
  EXPECT_THROW(m.add_tuple(0, {0, 9}), DeltaError);
  EXPECT_THROW(m.add_tuple(4, {0, 1}), std::out_of_range);
  EXPECT_THROW(m.restrict_to_prefix(3), std::out_of_range);
}

TEST(Structure, JsonRoundTrip) {
  std::mt19937_64 rng(8);
  for (const std::string plugin : {"random_graph", "generic_equivalence"}) {
    for (int t = 0; t < 50; ++t) {
      FinStructure m = ts::random_structure(plugin, sig_e(), 7, rng);
      ts::randomize_levels(m, rng);
      const auto j = structure_to_json(m);
      ASSERT_EQ(structure_from_json(nlohmann::ordered_json::parse(j.dump())), m);
    }
  }
}

TEST(Structure, JsonRejectsBadIds) {
  auto j = structure_to_json(two_levels());
  j["universe"] = {1, 0};
  EXPECT_THROW(structure_from_json(j), std::invalid_argument);
}
