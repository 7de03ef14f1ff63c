#include <gtest/gtest.h>

#include <random>

#include "kcm/family.hpp"
#include "support.hpp"

using namespace kcm;

TEST(Range, Examples) {
  EXPECT_EQ(range(families::fa1f()), 1);
  EXPECT_EQ(range(UpdateFamily(2, {{{-2, 1}}})), 2);
  EXPECT_EQ(range(UpdateFamily(2, {{{-1, 0}, {0, -1}}, {{3, 0}}})), 3);
}

TEST(UpdateFamilyCtor, RejectsInvalidRules) {
  EXPECT_THROW(UpdateFamily(2, {}), Error);
  EXPECT_THROW(UpdateFamily(2, {{}}), Error);
  EXPECT_THROW(UpdateFamily(2, {{{0, 0}}}), Error);
  EXPECT_THROW(UpdateFamily(1, {{{1, 1}}}), Error);
  EXPECT_THROW(UpdateFamily(3, {{{1, 0}}}), Error);
}

TEST(IsStable, Examples) {
  EXPECT_TRUE(is_stable(families::east(), Vec{-1, 0}));
  EXPECT_FALSE(is_stable(families::fa1f(), Vec{1, 0}));
  EXPECT_TRUE(is_stable(families::two_neighbour(), Vec{1, 0}));
  EXPECT_THROW(is_stable(families::fa1f(), Vec{0, 0}), Error);
}

TEST(IsStable, TwoNeighbourAgainstRuleByRuleCheck) {
  // No rule of the 2-neighbour family fits in {x : x_1 < 0}: each has an
  // element with nonnegative first coordinate.
  const auto f = families::two_neighbour();
  for (const auto& rule : f.rules())
    EXPECT_TRUE(std::any_of(rule.begin(), rule.end(), [](Vec v) { return v.x >= 0; }));
}

TEST(IsStable, ScaleInvariant) {
  std::mt19937_64 gen(11);
  for (int i = 0; i < 50; ++i) {
    const auto f = testutil::random_family_2d(gen);
    for (Vec u : testutil::test_directions(f, 300))
      for (std::int64_t k : {2, 3, 17}) ASSERT_EQ(is_stable(f, u), is_stable(f, k * u));
  }
}

TEST(StableSet, LeftRuleGivesClosedLeftHalfCircle) {
  const ArcSet s = stable_set_2d(families::left_2d());
  ASSERT_EQ(s.arcs.size(), 1u);
  EXPECT_FALSE(s.full);
  EXPECT_TRUE(s.contains({-1, 0}));
  EXPECT_TRUE(s.contains({0, 1}));
  EXPECT_TRUE(s.contains({0, -1}));
  EXPECT_TRUE(s.contains({-5, 3}));
  EXPECT_FALSE(s.contains({1, 0}));
  EXPECT_FALSE(s.contains({1, 1000}));
}

TEST(StableSet, FourSingletonsGiveEmptySet) {
  const ArcSet s = stable_set_2d(families::fa1f_2d());
  EXPECT_TRUE(s.empty());
}

TEST(StableSet, TwoNeighbourIsTheFourAxes) {
  const ArcSet s = stable_set_2d(families::two_neighbour());
  ASSERT_EQ(s.arcs.size(), 4u);
  for (const Arc& a : s.arcs) EXPECT_TRUE(a.is_point());
  for (Vec u : {Vec{1, 0}, Vec{0, 1}, Vec{-1, 0}, Vec{0, -1}}) EXPECT_TRUE(s.contains(u));
  // dense angular sweep: nothing else is stable
  for (Vec u : testutil::test_directions(families::two_neighbour(), 5000)) {
    const bool axis = u.x == 0 || u.y == 0;
    EXPECT_EQ(s.contains(u), axis) << to_string(u);
    EXPECT_EQ(is_stable(families::two_neighbour(), u), axis) << to_string(u);
  }
}

TEST(StableSet, OppositePairIsFullCircle) {
  EXPECT_TRUE(stable_set_2d(families::opposite_pair_2d()).full);
}

TEST(StableSet, RejectsDimensionOne) { EXPECT_THROW(stable_set_2d(families::fa1f()), Error); }

TEST(StableSet, AgreesWithDirectPredicateOnRandomFamilies) {
  std::mt19937_64 gen(2024);
  for (int i = 0; i < 120; ++i) {
    const auto f = testutil::random_family_2d(gen);
    const ArcSet s = stable_set_2d(f);
    const auto dirs = testutil::test_directions(f, 10000);
    ASSERT_GE(dirs.size(), 10000u);
    for (Vec u : dirs) ASSERT_EQ(s.contains(u), is_stable(f, u)) << "family " << i << " direction " << to_string(u);
  }
}

TEST(StableSet, ArcsAreSortedAndDisjoint) {
  std::mt19937_64 gen(5);
  for (int i = 0; i < 200; ++i) {
    const auto f = testutil::random_family_2d(gen);
    const ArcSet s = stable_set_2d(f);
    for (std::size_t a = 0; a < s.arcs.size(); ++a)
      for (std::size_t b = 0; b < s.arcs.size(); ++b) {
        if (a == b) continue;
        EXPECT_FALSE(s.arcs[b].contains(s.arcs[a].start));
      }
    for (std::size_t a = 0; a + 1 < s.arcs.size(); ++a)
      EXPECT_TRUE(geom::angle_less(s.arcs[a].start, s.arcs[a + 1].start));
  }
}

TEST(StableSet, AddingARuleNeverEnlargesS) {
  std::mt19937_64 gen(77);
  for (int i = 0; i < 100; ++i) {
    const auto f = testutil::random_family_2d(gen);
    const auto extra = testutil::random_family_2d(gen, 1);
    auto rules = f.rules();
    rules.push_back(extra.rules().front());
    const UpdateFamily bigger(2, rules);
    const ArcSet small_s = stable_set_2d(f), big_s = stable_set_2d(bigger);
    for (Vec u : testutil::test_directions(bigger, 2000))
      if (big_s.contains(u)) ASSERT_TRUE(small_s.contains(u));
  }
}

TEST(Classify, GoldenSet) {
  EXPECT_EQ(classify(families::fa1f()).kind, Criticality::Supercritical);
  EXPECT_EQ(classify(families::east()).kind, Criticality::Supercritical);
  EXPECT_EQ(classify(families::left_2d()).kind, Criticality::Supercritical);
  EXPECT_EQ(classify(families::fa1f_2d()).kind, Criticality::Supercritical);
  EXPECT_EQ(classify(families::two_neighbour()).kind, Criticality::Critical);
  EXPECT_EQ(classify(families::opposite_pair_2d()).kind, Criticality::Subcritical);
}

TEST(Classify, OneDimensionIsBinary) {
  EXPECT_EQ(classify(UpdateFamily(1, {{{-1, 0}, {1, 0}}})).kind, Criticality::Subcritical);
  EXPECT_EQ(classify(UpdateFamily(1, {{{-2, 0}, {-1, 0}}})).kind, Criticality::Supercritical);
}

TEST(Classify, WitnessHalfCircleHoldsNoStableDirection) {
  std::mt19937_64 gen(99);
  int seen = 0;
  for (int i = 0; i < 300; ++i) {
    const auto f = testutil::random_family_2d(gen);
    const auto c = classify(f);
    if (c.kind != Criticality::Supercritical) continue;
    ++seen;
    ASSERT_TRUE(c.witness && c.witness_arc);
    const Vec m = c.witness->normal();
    for (Vec u : testutil::test_directions(f, 3000))
      if (dot(u, m) > 0) ASSERT_FALSE(is_stable(f, u)) << to_string(u);
  }
  EXPECT_GT(seen, 10);
}

TEST(Classify, NonSupercriticalHasNoFreeHalfCircleOnSampledMiddles) {
  std::mt19937_64 gen(123);
  for (int i = 0; i < 200; ++i) {
    const auto f = testutil::random_family_2d(gen);
    if (classify(f).kind == Criticality::Supercritical) continue;
    const auto dirs = testutil::test_directions(f, 3000);
    std::vector<Vec> stable;
    for (Vec u : dirs)
      if (is_stable(f, u)) stable.push_back(u);
    for (Vec m : dirs) {
      const bool meets = std::any_of(stable.begin(), stable.end(), [&](Vec u) { return dot(u, m) > 0; });
      ASSERT_TRUE(meets) << "open half-circle around " << to_string(m) << " misses S";
    }
  }
}

TEST(Classify, InvariantUnderSquareSymmetries) {
  std::mt19937_64 gen(31);
  for (int i = 0; i < 150; ++i) {
    const auto f = testutil::random_family_2d(gen);
    const auto kind = classify(f).kind;
    for (auto sym : testutil::square_symmetries()) ASSERT_EQ(classify(f.transformed(sym)).kind, kind);
  }
  for (auto sym : testutil::square_symmetries()) {
    EXPECT_EQ(classify(families::two_neighbour().transformed(sym)).kind, Criticality::Critical);
    EXPECT_EQ(classify(families::left_2d().transformed(sym)).kind, Criticality::Supercritical);
  }
}

TEST(Midpoint, Examples) {
  EXPECT_EQ(unstable_semicircle_midpoint(families::left_2d()).normal(), (Vec{1, 0}));
  EXPECT_EQ(unstable_semicircle_midpoint(families::fa1f_2d()).normal(), (Vec{0, 1}));
  EXPECT_THROW(unstable_semicircle_midpoint(families::two_neighbour()), NotSupercritical);
  EXPECT_EQ(unstable_semicircle_midpoint(families::east()).normal(), (Vec{1, 0}));
}

TEST(Direction, ReducesAndRejectsZero) {
  EXPECT_EQ(Direction({4, -6}).normal(), (Vec{2, -3}));
  EXPECT_THROW(Direction({0, 0}), Error);
}

TEST(Families, ByName) {
  for (const char* n : {"fa1f", "east", "fa1f-2d", "two-neighbour", "left-2d", "opposite-pair-2d"})
    EXPECT_TRUE(families::by_name(n).has_value()) << n;
  EXPECT_FALSE(families::by_name("nope").has_value());
}
