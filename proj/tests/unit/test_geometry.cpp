#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include <cellscope/error.hpp>
#include <cellscope/geometry.hpp>
#include <cellscope/random.hpp>
#include <cellscope/synthetic.hpp>

#include "oracles.hpp"

using namespace cellscope;
using cellscope::testing::all_differences;
using cellscope::testing::max_matching;
using cellscope::testing::score_from_count;
using cellscope::testing::separated_points;

namespace {

constexpr double r = kMatchingRadius;

ViaSet set(std::vector<ViaPoint> pts) { return ViaSet(std::move(pts)); }

}  // namespace

TEST(ViaSet, SortsPointsAndIgnoresSourceInEquality) {
  const ViaSet a({{2, 1}, {0, 5}, {2, 0}}, "left");
  const ViaSet b({{0, 5}, {2, 0}, {2, 1}}, "right");
  EXPECT_EQ(a, b);
  EXPECT_EQ(a[0], (ViaPoint{0, 5}));
  EXPECT_EQ(a[1], (ViaPoint{2, 0}));
  EXPECT_EQ(a.source(), "left");
}

TEST(ViaSet, RejectsNonFiniteCoordinates) {
  EXPECT_THROW(set({{0, std::numeric_limits<double>::quiet_NaN()}}), InputError);
  EXPECT_THROW(set({{std::numeric_limits<double>::infinity(), 0}}), InputError);
}

TEST(ViaSet, MinSeparation) {
  EXPECT_TRUE(std::isinf(ViaSet().min_separation()));
  EXPECT_TRUE(std::isinf(set({{1, 1}}).min_separation()));
  EXPECT_DOUBLE_EQ(set({{0, 0}, {3, 4}, {10, 0}}).min_separation(), 5.0);
}

TEST(ViaSet, Translated) {
  const auto t = set({{1, 2}}).translated({0.5, -1});
  EXPECT_EQ(t, set({{1.5, 1}}));
}

TEST(Orientation, ParseAndPrint) {
  for (auto o : {Orientation::R0, Orientation::R180, Orientation::MX, Orientation::MX_R180}) {
    EXPECT_EQ(parse_orientation(to_string(o)), o);
  }
  EXPECT_THROW(parse_orientation("R90"), InputError);
  EXPECT_THROW(parse_orientation(""), InputError);
}

TEST(Orientation, HandWorkedPlacements) {
  // 10 x 8 box, point near the lower-left corner.
  const ViaPoint p{1, 2};
  EXPECT_EQ(apply_orientation(p, Orientation::R0, 10, 8), (ViaPoint{1, 2}));
  EXPECT_EQ(apply_orientation(p, Orientation::MX, 10, 8), (ViaPoint{1, 6}));
  EXPECT_EQ(apply_orientation(p, Orientation::R180, 10, 8), (ViaPoint{9, 6}));
  EXPECT_EQ(apply_orientation(p, Orientation::MX_R180, 10, 8), (ViaPoint{9, 2}));
}

TEST(Orientation, CanonicalizeUndoesEveryPlacement) {
  Rng rng(11);
  const auto pts = separated_points(rng, 12, 10, 8, 1.0);
  const ViaSet canon(pts);
  for (auto o : {Orientation::R0, Orientation::R180, Orientation::MX, Orientation::MX_R180}) {
    const auto placed = apply_orientation(canon, o, 10, 8);
    const auto back = canonicalize(placed, o, 10, 8);
    ASSERT_EQ(back.size(), canon.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      EXPECT_NEAR(back[i].x, canon[i].x, 1e-12);
      EXPECT_NEAR(back[i].y, canon[i].y, 1e-12);
    }
  }
}

TEST(Orientation, CanonicalizeRejectsPointsFarOutsideTheBox) {
  EXPECT_NO_THROW(canonicalize(set({{-0.4, 2}}), Orientation::R0, 10, 8));
  EXPECT_THROW(canonicalize(set({{-0.6, 2}}), Orientation::R0, 10, 8), InputError);
  EXPECT_THROW(canonicalize(set({{3, 9.2}}), Orientation::MX, 10, 8), InputError);
}

TEST(CandidateTranslations, SmallExample) {
  const auto a = set({{0, 0}, {1, 0}});
  const auto b = set({{0, 0}, {2, 1}});
  const auto got = candidate_translations(a, b, 1e-9);
  const std::vector<Translation> want{{-1, 0}, {0, 0}, {1, 1}, {2, 1}};
  EXPECT_EQ(got, want);
}

TEST(CandidateTranslations, CollapsesNearDuplicatesToTheFirst) {
  const auto a = set({{0, 0}, {0.01, 0}});
  const auto b = set({{1, 0}});
  const auto got = candidate_translations(a, b, 0.125);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0], (Translation{1, 0}));
}

TEST(CandidateTranslations, MatchesBruteForceDifferences) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const ViaSet a(separated_points(rng, 7, 10, 10, 1.0));
    const ViaSet b(separated_points(rng, 9, 10, 10, 1.0));
    auto want = all_differences(a, b);
    std::sort(want.begin(), want.end());
    want.erase(std::unique(want.begin(), want.end()), want.end());
    EXPECT_EQ(candidate_translations(a, b, 1e-9), want);
  }
}

TEST(CandidateTranslations, RejectsNonPositiveCell) {
  EXPECT_THROW(candidate_translations(set({{0, 0}}), set({{0, 0}}), 0.0), InputError);
}

TEST(MatchVias, StrictRadius) {
  const auto a = set({{0, 0}});
  EXPECT_EQ(match_vias(a, set({{0.5, 0}}), {}, r).match_count, 0u);
  EXPECT_EQ(match_vias(a, set({{0.4999, 0}}), {}, r).match_count, 1u);
  EXPECT_EQ(match_vias(a, set({{1.0, 0}}), {0.5, 0}, r).match_count, 0u);
  EXPECT_EQ(match_vias(a, set({{1.0, 0}}), {0.6, 0}, r).match_count, 1u);
}

TEST(MatchVias, OneToOne) {
  // Two a-vias compete for one b-via: the nearer one wins.
  const auto a = set({{0, 0}, {0.3, 0}});
  const auto b = set({{0.25, 0}});
  const auto m = match_vias(a, b, {}, r);
  ASSERT_EQ(m.match_count, 1u);
  EXPECT_EQ(m.matched_pairs[0], (std::pair<std::size_t, std::size_t>{1, 0}));
}

TEST(MatchVias, RecoversPlantedBijection) {
  Rng rng(21);
  const ViaSet a(separated_points(rng, 15, 12, 10, 1.2));
  std::vector<ViaPoint> moved;
  for (const auto& p : a) moved.push_back({p.x + 2.0 + rng.normal(0, 0.05), p.y - 1.0 + rng.normal(0, 0.05)});
  const ViaSet b(moved);
  const auto m = match_vias(a, b, {2.0, -1.0}, r);
  EXPECT_EQ(m.match_count, a.size());
  for (auto [i, j] : m.matched_pairs) {
    EXPECT_NEAR(b[j].x - a[i].x, 2.0, 0.3);
    EXPECT_NEAR(b[j].y - a[i].y, -1.0, 0.3);
  }
}

TEST(MatchVias, GreedyEqualsMaximumOnSeparatedSets) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const ViaSet a(separated_points(rng, 10, 8, 8, 2 * r));
    const ViaSet b(separated_points(rng, 10, 8, 8, 2 * r));
    const Translation t{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    EXPECT_EQ(match_vias(a, b, t, r).match_count, max_matching(a, b, t, r));
  }
}

TEST(MatchVias, MeanResidual) {
  const auto a = set({{0, 0}, {5, 0}});
  const auto b = set({{0.1, 0}, {5, 0.3}});
  const auto m = match_vias(a, b, {}, r);
  EXPECT_NEAR(m.mean_residual(a, b), 0.2, 1e-12);
  EXPECT_EQ(match_vias(a, set({{9, 9}}), {}, r).mean_residual(a, set({{9, 9}})), 0.0);
}

TEST(Align, PureShiftIsRecovered) {
  Rng rng(8);
  const ViaSet a(separated_points(rng, 12, 10, 10, 1.0));
  const auto b = a.translated({3.25, -1.5});
  const auto res = align(a, b, r);
  EXPECT_EQ(res.match_count, a.size());
  EXPECT_NEAR(res.translation.dx, 3.25, 1e-9);
  EXPECT_NEAR(res.translation.dy, -1.5, 1e-9);
}

TEST(Align, SingletonAlwaysMatchesOnce) {
  const auto a = set({{0, 0}});
  const auto b = set({{7, 3}, {-2, 9}, {4, 4}});
  EXPECT_EQ(align(a, b, r).match_count, 1u);
  EXPECT_EQ(align(b, a, r).match_count, 1u);
}

TEST(Align, EmptySets) {
  const auto res = align(ViaSet(), set({{1, 1}}), r);
  EXPECT_EQ(res.match_count, 0u);
  EXPECT_EQ(res.translation, (Translation{}));
  EXPECT_TRUE(res.matched_pairs.empty());
  EXPECT_EQ(align(ViaSet(), ViaSet(), r).match_count, 0u);
}

TEST(Align, TieGoesToSmallestShiftThenLexicographic) {
  const auto a = set({{0, 0}});
  EXPECT_EQ(align(a, set({{3, 0}, {0, 1}}), r).translation, (Translation{0, 1}));
  // {(-1,0),(1,0)} sorts before {(0,0)}, so the lexicographic rule runs in
  // its frame and the answer here is the mirror of (-1, 0).
  const auto b = set({{1, 0}, {-1, 0}});
  EXPECT_EQ(align(b, a, r).translation, (Translation{-1, 0}));
  EXPECT_EQ(align(a, b, r).translation, (Translation{1, 0}));
}

TEST(Align, MirrorSymmetry) {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const ViaSet a(separated_points(rng, 8, 8, 8, 1.0));
    const ViaSet b(separated_points(rng, 6, 8, 8, 1.0));
    const auto ab = align(a, b, r);
    const auto ba = align(b, a, r);
    EXPECT_EQ(ab.match_count, ba.match_count);
    EXPECT_EQ(ab.translation.dx, -ba.translation.dx);
    EXPECT_EQ(ab.translation.dy, -ba.translation.dy);
  }
}

TEST(Align, LensCornerBeatsEveryDifference) {
  // No pairwise difference matches both vias, but the translation (0.4, 0)
  // sits inside both disks.
  const auto a = set({{0, 0}, {3, 0}});
  const auto b = set({{0, 0}, {3.8, 0}});
  for (const auto& t : all_differences(a, b)) EXPECT_LE(max_matching(a, b, t, r), 1u);
  const auto res = align(a, b, r);
  EXPECT_EQ(res.match_count, 2u);
  EXPECT_EQ(max_matching(a, b, res.translation, r), 2u);
}

TEST(Align, BoundedShift) {
  const auto a = set({{0, 0}});
  const auto far = align(a, set({{5, 0}}), r, 1.0);
  EXPECT_EQ(far.match_count, 0u);
  EXPECT_EQ(far.translation, (Translation{}));
  const auto near = align(a, set({{0.7, 0}, {5, 0}}), r, 1.0);
  EXPECT_EQ(near.match_count, 1u);
  EXPECT_LE(std::sqrt(near.translation.norm2()), 1.0);
  const auto unbounded = align(a, set({{5, 0}}), r, std::numeric_limits<double>::infinity());
  EXPECT_EQ(unbounded.match_count, 1u);
}

TEST(Align, BoundedNeverBeatsUnbounded) {
  Rng rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    const ViaSet a(separated_points(rng, 8, 8, 8, 1.0));
    const ViaSet b(separated_points(rng, 8, 8, 8, 1.0));
    const auto bounded = align(a, b, r, 1.0);
    EXPECT_LE(bounded.match_count, align(a, b, r).match_count);
    EXPECT_LE(bounded.translation.norm2(), 1.0 + 1e-12);
    EXPECT_EQ(bounded.match_count, match_vias(a, b, bounded.translation, r).match_count);
  }
}

TEST(Align, AgreesWithBruteForceOracle) {
  Rng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t na = 3 + rng.below(8);
    const std::size_t nb = 3 + rng.below(8);
    const ViaSet a(separated_points(rng, na, 6, 6, 2 * r));
    ViaSet b;
    if (trial % 2 == 0) {
      b = ViaSet(separated_points(rng, nb, 6, 6, 2 * r));
    } else {
      std::vector<ViaPoint> moved;
      for (const auto& p : a) moved.push_back({p.x + 1.3 + rng.normal(0, 0.15), p.y + rng.normal(0, 0.15)});
      b = ViaSet(moved);
    }
    const auto res = align(a, b, r);
    EXPECT_EQ(res.match_count, oracle_align(a, b, r, r / 8)) << "trial " << trial;
    EXPECT_EQ(res.match_count, max_matching(a, b, res.translation, r));
  }
}

TEST(Similarity, EightAndEightWithSixMatches) {
  EXPECT_DOUBLE_EQ(similarity_score(6, 8, 8), 0.25);
  std::vector<ViaPoint> pa;
  std::vector<ViaPoint> pb;
  for (int i = 0; i < 8; ++i) pa.push_back({2.0 * i, 0});
  for (int i = 0; i < 6; ++i) pb.push_back({2.0 * i, 0});
  pb.push_back({1, 5});
  pb.push_back({5, 5});
  EXPECT_DOUBLE_EQ(similarity_score(ViaSet(pa), ViaSet(pb), r), 0.25);
}

TEST(Similarity, EmptyConventions) {
  EXPECT_EQ(similarity_score(0, 0, 0), 0.0);
  EXPECT_EQ(similarity_score(0, 0, 3), 1.0);
  EXPECT_EQ(similarity_score(ViaSet(), set({{1, 1}}), r), 1.0);
  EXPECT_EQ(similarity_score(ViaSet(), ViaSet(), r), 0.0);
}

TEST(Similarity, OneRemovedVia) {
  Rng rng(4);
  for (std::size_t n = 2; n <= 12; ++n) {
    const auto pts = separated_points(rng, n, 10, 10, 1.0);
    ASSERT_EQ(pts.size(), n);
    const ViaSet a(pts);
    const ViaSet b(std::vector<ViaPoint>(pts.begin(), pts.end() - 1));
    EXPECT_NEAR(similarity_score(a, b, r), 1.0 / (2.0 * n - 1.0), 1e-12);
  }
}

TEST(Similarity, SymmetricAndTranslationInvariant) {
  Rng rng(13);
  for (int trial = 0; trial < 40; ++trial) {
    const ViaSet a(separated_points(rng, 7, 8, 8, 1.0));
    const ViaSet b(separated_points(rng, 9, 8, 8, 1.0));
    const double s = similarity_score(a, b, r);
    EXPECT_EQ(s, similarity_score(b, a, r));
    EXPECT_NEAR(s, similarity_score(a.translated({5.5, -2.25}), b, r), 1e-12);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    EXPECT_DOUBLE_EQ(s, score_from_count(align(a, b, r).match_count, a.size(), b.size()));
  }
}

TEST(NodeConfig, Validate) {
  NodeConfig ok{"40nm", 40.0, kMatchingRadius, 8.0};
  EXPECT_NO_THROW(ok.validate());
  auto bad = ok;
  bad.unit_length_nm = 0;
  EXPECT_THROW(bad.validate(), InputError);
  bad = ok;
  bad.pixels_per_unit = -1;
  EXPECT_THROW(bad.validate(), InputError);
  bad = ok;
  bad.matching_radius = 0.4;
  EXPECT_THROW(bad.validate(), InputError);
}
