#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "kcm/auxperc.hpp"

using namespace kcm;

namespace {

std::shared_ptr<const ClockLog> shared(ClockLog log) { return std::make_shared<const ClockLog>(std::move(log)); }

AuxParams params_for(const UpdateFamily& f, double K, double t, double q = 1.0, double qp = 0.0) {
  return AuxParams{find_spread_certificate(f), K, t, q, qp};
}

// Rings of the given label at every multiple of `step` in (0, T].
ClockLog regular_log(const Geometry& g, double T, double step, std::uint8_t label) {
  std::vector<std::vector<Ring>> rings(g.size());
  for (auto& r : rings)
    for (double s = step; s <= T + 1e-12; s += step) r.push_back({s, label});
  return ClockLog(g, T, label == 0 ? 1.0 : 0.0, 0, 0, std::move(rings));
}

// Existential search for 0-rings t_1 < ... < t_m at the listed sites.
bool exists_increasing_zero_rings(const ClockLog& log, const std::vector<std::size_t>& sites, std::size_t i,
                                  double after, double hi) {
  if (i == sites.size()) return true;
  for (const Ring& r : log.rings(sites[i]))
    if (r.time > after && r.time <= hi && r.label == 0 &&
        exists_increasing_zero_rings(log, sites, i + 1, r.time, hi))
      return true;
  return false;
}

bool quiet(const ClockLog& log, std::size_t s, double lo, double hi) {
  for (const Ring& r : log.rings(s))
    if (r.time > lo && r.time <= hi && r.label == 1) return false;
  return true;
}

// Bond states straight from the definitions, scanning full ring lists.
void expect_bonds_match_definition(const OPLattice& lat, const ClockLog& log, const AuxParams& p) {
  const auto& g = log.geometry();
  for (std::int64_t n = 1; n <= lat.depth; ++n) {
    const double lo = p.t - static_cast<double>(lat.k + n) * p.K, hi = lo + p.K;
    for (std::int64_t r = -n; r <= n; r += 2) {
      const Vec base = lat.y + ((r - n) / 2) * p.cert.a1_offset;
      bool rect = true, seq = true;
      for (const Vec& v : p.cert.rectangle) rect = rect && quiet(log, *g.index_in_box(base + v), lo, hi);
      std::vector<std::size_t> seq_sites;
      for (const Vec& v : p.cert.sequence) {
        seq_sites.push_back(*g.index_in_box(base + v));
        seq = seq && quiet(log, seq_sites.back(), lo, hi);
      }
      ASSERT_EQ(lat.vertical_open(r, n), rect) << "n=" << n << " r=" << r;
      ASSERT_EQ(lat.diagonal_open(r, n), rect && seq && exists_increasing_zero_rings(log, seq_sites, 0, lo, hi))
          << "n=" << n << " r=" << r;
    }
  }
}

OPLattice all_bonds(std::int64_t depth, std::uint8_t open) {
  OPLattice lat;
  lat.depth = depth;
  lat.vertical.resize(depth + 1);
  lat.diagonal.resize(depth + 1);
  for (std::int64_t n = 1; n <= depth; ++n) {
    lat.vertical[n].assign(n + 1, open);
    lat.diagonal[n].assign(n + 1, open);
  }
  return lat;
}

}  // namespace

TEST(QThreshold, Examples) {
  EXPECT_NEAR(q_threshold(2.0, 1), 0.9757644, 1e-7);
  EXPECT_NEAR(q_threshold(2.0, 1), 1.0 + std::log(1.0 - std::exp(-2.0)) / 6.0, 1e-15);
  // below 1 in exact arithmetic; doubles round to 1 once e^{-K} / (3K) < 2^{-53}
  for (double K : {0.1, 1.0, 2.0, 16.0}) EXPECT_LT(q_threshold(K, 1), 1.0);
  EXPECT_LE(q_threshold(96.0, 1), 1.0);
  EXPECT_GT(q_threshold(2.0, 2), q_threshold(2.0, 1));
  EXPECT_LT(q_threshold(4.0, 1), q_threshold(8.0, 1));
  EXPECT_THROW(q_threshold(0.0, 1), Error);
  EXPECT_THROW(q_threshold(2.0, 0), Error);
}

TEST(AuxBox, CoversFootprintAndSmallerBoxThrows) {
  for (const auto& f : {families::fa1f(), families::left_2d(), families::fa1f_2d()}) {
    const auto p = params_for(f, 2.0, 12.0);
    const auto box = aux_box(p.cert, p.depth(0));
    const auto log = regular_log(box.geometry, p.t, 0.5, 0);
    EXPECT_NO_THROW(build_bonds(log, p, box.anchor, 0));
    const auto shifted = box.anchor + Vec{-1, 0};
    EXPECT_THROW(build_bonds(log, p, shifted, 0), Error);
  }
}

TEST(Bonds, DenseZeroRingsOpenEverything) {
  const auto p = params_for(families::left_2d(), 2.0, 10.0);
  const auto box = aux_box(p.cert, p.depth(0));
  const auto lat = build_bonds(regular_log(box.geometry, p.t, 0.1, 0), p, box.anchor, 0);
  for (std::int64_t n = 1; n <= lat.depth; ++n)
    for (std::int64_t r = -n; r <= n; r += 2) {
      EXPECT_TRUE(lat.vertical_open(r, n));
      EXPECT_TRUE(lat.diagonal_open(r, n));
    }
}

TEST(Bonds, OneRingInRectangleClosesBoth) {
  const auto p = params_for(families::fa1f(), 2.0, 6.0);
  const auto box = aux_box(p.cert, p.depth(0));
  std::vector<std::vector<Ring>> rings(box.geometry.size());
  for (auto& r : rings)
    for (double s = 0.1; s <= 6.0; s += 0.1) r.push_back({s, 0});
  // node (1, 1) sits at y + 0 * a1; its level interval is (4, 6]
  auto& target = rings[*box.geometry.index_in_box(box.anchor)];
  target.insert(std::upper_bound(target.begin(), target.end(), 5.05, [](double t, const Ring& r) { return t < r.time; }),
                Ring{5.05, 1});
  const ClockLog log(box.geometry, 6.0, 0.5, 0, 0, rings);
  const auto lat = build_bonds(log, p, box.anchor, 0);
  EXPECT_FALSE(lat.vertical_open(1, 1));
  EXPECT_FALSE(lat.diagonal_open(1, 1));
  EXPECT_TRUE(lat.vertical_open(-1, 1));
  expect_bonds_match_definition(lat, log, p);
}

TEST(Bonds, MatchDefinitionAndVerticalClosedImpliesDiagonalClosed) {
  int closed_vertical = 0;
  for (const auto& f : {families::fa1f(), families::east(), families::left_2d(), families::fa1f_2d()}) {
    const auto p = params_for(f, 1.5, 6.0);
    const auto box = aux_box(p.cert, p.depth(0));
    for (std::uint64_t seed = 1; seed <= 250; ++seed) {
      const auto log = sample_clock_log(box.geometry, 0.7, p.t, seed);
      for (std::int64_t k = 0; k < p.blocks(); ++k) {
        const auto lat = build_bonds(log, p, box.anchor, k);
        for (std::int64_t n = 1; n <= lat.depth; ++n)
          for (std::int64_t r = -n; r <= n; r += 2)
            if (!lat.vertical_open(r, n)) {
              ++closed_vertical;
              ASSERT_FALSE(lat.diagonal_open(r, n));
            }
        if (seed <= 40) expect_bonds_match_definition(lat, log, p);
      }
    }
  }
  EXPECT_GT(closed_vertical, 100);
}

TEST(Zeta, AllOpenGivesTriangle) {
  for (std::int64_t depth = 0; depth <= 12; ++depth) {
    const auto z = run_zeta(all_bonds(depth, 1));
    EXPECT_TRUE(z.survives());
    for (std::int64_t n = 0; n <= depth; ++n)
      for (std::int64_t r = -n; r <= n; ++r) EXPECT_EQ(z.occupied(r, n), (r + n) % 2 == 0);
    std::size_t expected = 0;
    for (std::int64_t r = -(depth / 2); r <= depth / 2; ++r) expected += ((r + depth) % 2 == 0);
    EXPECT_EQ(z.survivors.size(), expected) << depth;
  }
  // hand-checked: depth 2 leaves {0}, depth 3 leaves {-1, 1}, depth 4 {-2, 0, 2}
  EXPECT_EQ(run_zeta(all_bonds(2, 1)).survivors, (std::vector<std::int64_t>{0}));
  EXPECT_EQ(run_zeta(all_bonds(3, 1)).survivors, (std::vector<std::int64_t>{-1, 1}));
  EXPECT_EQ(run_zeta(all_bonds(4, 1)).survivors, (std::vector<std::int64_t>{-2, 0, 2}));
}

TEST(Zeta, ClosedFirstLevelDiesAtOne) {
  const auto z = run_zeta(all_bonds(5, 0));
  ASSERT_TRUE(z.tau.has_value());
  EXPECT_EQ(*z.tau, 1);
  EXPECT_TRUE(z.survivors.empty());
}

TEST(Zeta, RandomLatticesMonotoneAndConsistent) {
  std::mt19937_64 gen(17);
  std::bernoulli_distribution open(0.6);
  for (int i = 0; i < 500; ++i) {
    const std::int64_t depth = 1 + i % 10;
    OPLattice lat = all_bonds(depth, 0);
    for (std::int64_t n = 1; n <= depth; ++n)
      for (std::size_t j = 0; j <= static_cast<std::size_t>(n); ++j) {
        lat.vertical[n][j] = open(gen);
        lat.diagonal[n][j] = open(gen);
      }
    const auto z = run_zeta(lat);
    if (z.tau) {
      ASSERT_GE(*z.tau, 1);
      for (std::int64_t n = *z.tau; n <= depth; ++n)
        for (std::int64_t r = -n; r <= n; ++r) ASSERT_FALSE(z.occupied(r, n));
    } else {
      bool any = false;
      for (std::int64_t r = -depth; r <= depth; ++r) any = any || z.occupied(r, depth);
      ASSERT_TRUE(any);
    }
    // opening one more bond never removes occupation
    OPLattice more = lat;
    const std::int64_t n = 1 + static_cast<std::int64_t>(gen() % depth);
    const std::size_t j = gen() % (n + 1);
    (gen() % 2 ? more.vertical : more.diagonal)[n][j] = 1;
    const auto z2 = run_zeta(more);
    for (std::int64_t m = 0; m <= depth; ++m)
      for (std::int64_t r = -m; r <= m; ++r)
        if (z.occupied(r, m)) {
          ASSERT_TRUE(z2.occupied(r, m));
        }
  }
}

TEST(Transfer, HoldsOnRandomRuns) {
  for (const auto& f : {families::fa1f(), families::east(), families::left_2d()}) {
    const auto p = params_for(f, f.dimension() == 1 ? 4.0 : 2.0, f.dimension() == 1 ? 16.0 : 8.0, 0.9, 0.7);
    const auto box = aux_box(p.cert, p.depth(0), Boundary::Torus, 6);
    int holds = 0;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
      const auto log = shared(sample_clock_log(box.geometry, p.q, p.t, seed));
      const auto traj = evolve(f, box.geometry, sample_bernoulli_config(box.geometry, p.q_prime, seed), log);
      for (std::int64_t k = 0; k <= p.blocks(); ++k) {
        const std::int64_t depth = p.depth(k);
        for (std::int64_t r0 = -depth; r0 <= depth; r0 += 2) {
          const auto out = check_transfer(traj, p, box.anchor, k, r0);
          ASSERT_NE(out, TransferOutcome::Violated) << "seed " << seed << " k " << k << " r0 " << r0;
          holds += out == TransferOutcome::Holds;
        }
      }
    }
    EXPECT_GT(holds, 100);
  }
}

TEST(Transfer, DegenerateLevelAndNotApplicable) {
  const auto p = params_for(families::fa1f(), 2.0, 6.0, 0.5, 0.5);
  const auto box = aux_box(p.cert, p.depth(0), Boundary::Torus, 2);
  const auto empty = shared(ClockLog(box.geometry, 6.0, 0.5, 0, 0, std::vector<std::vector<Ring>>(box.geometry.size())));
  const auto zeros = evolve(families::fa1f(), box.geometry, SpinConfig::filled(box.geometry, 0), empty);
  const auto ones = evolve(families::fa1f(), box.geometry, SpinConfig::filled(box.geometry, 1), empty);
  EXPECT_EQ(check_transfer(zeros, p, box.anchor, p.blocks(), 0), TransferOutcome::Holds);
  EXPECT_EQ(check_transfer(ones, p, box.anchor, p.blocks(), 0), TransferOutcome::NotApplicable);
  // no rings: every bond has no 0-ring, so zeta dies and nothing applies
  EXPECT_EQ(check_transfer(zeros, p, box.anchor, 0, 0), TransferOutcome::NotApplicable);
}

TEST(Measurability, BondsAndWDependOnDisjointRingWindows) {
  const auto f = families::fa1f();
  const auto p = params_for(f, 2.0, 9.0, 0.8, 0.4);
  const auto box = aux_box(p.cert, p.depth(0), Boundary::Torus, 4);
  const double base = p.base_time();
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto full = shared(sample_clock_log(box.geometry, p.q, p.t, seed));
    const auto late = full->censored(base, p.t);
    const auto early = shared(full->censored(0.0, base));
    for (std::int64_t k = 0; k < p.blocks(); ++k) {
      const auto a = build_bonds(*full, p, box.anchor, k), b = build_bonds(late, p, box.anchor, k);
      ASSERT_EQ(a.vertical, b.vertical);
      ASSERT_EQ(a.diagonal, b.diagonal);
    }
    const auto init = sample_bernoulli_config(box.geometry, p.q_prime, seed);
    const auto t_full = evolve(f, box.geometry, init, full);
    const auto t_early = evolve(f, box.geometry, init, early);
    const std::int64_t depth = p.depth(0);
    for (std::int64_t r = -(depth / 2); r <= depth / 2; ++r)
      if ((r + depth) % 2 == 0) {
        ASSERT_EQ(event_W(t_full, p, box.anchor, 0, r), event_W(t_early, p, box.anchor, 0, r));
      }
  }
}

TEST(EventW, Examples) {
  const auto p = params_for(families::fa1f(), 2.0, 6.0);
  const auto box = aux_box(p.cert, p.depth(0));
  const auto empty = shared(ClockLog(box.geometry, 6.0, 0.5, 0, 0, std::vector<std::vector<Ring>>(box.geometry.size())));
  const auto zeros = evolve(families::fa1f(), box.geometry, SpinConfig::filled(box.geometry, 0), empty);
  const auto ones = evolve(families::fa1f(), box.geometry, SpinConfig::filled(box.geometry, 1), empty);
  // depth 3: nodes r = -1, 1 of the last level lie in [-1, 1]
  EXPECT_TRUE(event_W(zeros, p, box.anchor, 0, -1));
  EXPECT_TRUE(event_W(zeros, p, box.anchor, 0, 1));
  EXPECT_FALSE(event_W(ones, p, box.anchor, 0, 1));
  EXPECT_THROW(event_W(zeros, p, box.anchor, 0, 3), Error);
  EXPECT_THROW(event_W(zeros, p, box.anchor, 0, 0), Error);
}

TEST(FindKGamma, Examples) {
  const auto p = params_for(families::fa1f(), 2.0, 8.0);
  const auto box = aux_box(p.cert, p.depth(0), Boundary::Torus, 2);
  const Coding gamma{{box.anchor, box.anchor + Vec{1, 0}, box.anchor}, 2.0, 8.0};
  const auto dense = regular_log(box.geometry, 8.0, 0.1, 0);
  const auto kg = find_k_gamma(gamma, dense, p);
  ASSERT_TRUE(kg.has_value());
  EXPECT_EQ(kg->k, 0);
  EXPECT_EQ(kg->y, gamma.sites[0]);
  EXPECT_FALSE(find_k_gamma(gamma, regular_log(box.geometry, 8.0, 0.1, 1), p).has_value());
}

TEST(FindKGamma, InfimumAndActivationChain) {
  const auto f = families::fa1f();
  const double K = 2.0, t = 16.0;
  const AuxParams p{find_spread_certificate(f), K, t, 0.9, 0.5};
  const auto g = Geometry::line(48);
  int used = 0;
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    auto log = shared(sample_clock_log(g, p.q, t, seed));
    const auto c = evolve_coupled(f, g, sample_bernoulli_config(g, 0.5, seed, 0, StreamPurpose::InitialA),
                                  sample_bernoulli_config(g, 0.9, seed, 0, StreamPurpose::InitialB), log, 0.5);
    const Coding gamma{{{24, 0}, {25, 0}, {24, 0}, {23, 0}, {24, 0}}, K, t};
    const auto kg = find_k_gamma(gamma, *log, p);
    const std::size_t stop = kg ? static_cast<std::size_t>(kg->k) : gamma.sites.size();
    for (std::size_t j = 0; j < stop; ++j)
      ASSERT_FALSE(run_zeta(build_bonds(*log, p, gamma.sites[j], static_cast<std::int64_t>(j))).survives());
    if (!kg) continue;
    const auto z = run_zeta(build_bonds(*log, p, kg->y, kg->k));
    for (std::int64_t r : z.survivors)
      if (event_W(c.a, p, kg->y, kg->k, r) && event_W(c.b, p, kg->y, kg->k, r)) {
        ++used;
        ASSERT_TRUE(event_G(gamma, c, K, t));
        break;
      }
  }
  EXPECT_GT(used, 5);
}

TEST(Estimators, BondClosedMatchesPoissonAtQOne) {
  for (const auto& f : {families::fa1f(), families::left_2d()}) {
    const auto p = params_for(f, 2.0, 2.0);
    const auto e = estimate_bond_closed_prob(p, 20000, 7);
    // no 1-rings at q = 1; the m stages are independent exponential waits at
    // distinct sites, so the bond is closed iff Poisson(K) < m
    const double closed = poisson_below(2.0, p.cert.sequence.size());
    EXPECT_LE(e.ci.low, closed);
    EXPECT_GE(e.ci.high, closed);
    EXPECT_EQ(e.verdict, e.ci.high <= std::exp(-0.5) ? "satisfied" : "violated");
  }
}

TEST(Estimators, PoissonBelow) {
  EXPECT_DOUBLE_EQ(poisson_below(2.0, 0), 0.0);
  EXPECT_NEAR(poisson_below(2.0, 1), std::exp(-2.0), 1e-15);
  EXPECT_NEAR(poisson_below(2.0, 3), std::exp(-2.0) * (1 + 2 + 2), 1e-14);
}

TEST(Estimators, BondClosedNonincreasingInQ) {
  const auto f = families::fa1f();
  std::vector<BoundEstimate> es;
  for (double q : {0.8, 0.9, 1.0}) es.push_back(estimate_bond_closed_prob(params_for(f, 4.0, 4.0, q), 20000, 3));
  for (std::size_t i = 1; i < es.size(); ++i) EXPECT_LE(es[i].ci.low, es[i - 1].ci.high);
  EXPECT_GT(es.front().estimate, es.back().estimate);
}

TEST(Estimators, ExtinctionTail) {
  const auto f = families::fa1f();
  // dense regime: q = 1, long blocks
  const auto dense = estimate_extinction_tail(params_for(f, 20.0, 100.0), 1, 2000, 5);
  EXPECT_EQ(dense.hits, 0u);
  // same seed: the events are nested, so hit counts are exactly ordered
  const auto p = params_for(f, 2.0, 16.0, 0.95);
  std::uint64_t prev = std::numeric_limits<std::uint64_t>::max();
  for (std::int64_t n = 1; n <= 6; ++n) {
    const auto e = estimate_extinction_tail(p, n, 3000, 9);
    EXPECT_LE(e.hits, prev);
    prev = e.hits;
    ASSERT_TRUE(e.stated_bound.has_value());
    EXPECT_EQ(e.verdict, "vacuous");  // K = 2 is far below 48 ln 3
  }
}

TEST(Estimators, SurvivalSmallX) {
  const auto f = families::fa1f();
  const auto e = estimate_survival_small_x(params_for(f, 20.0, 200.0), 0.5, 500, 5);
  EXPECT_EQ(e.hits, 0u);
  EXPECT_EQ(e.verdict, "trend-only");
  EXPECT_FALSE(e.stated_bound.has_value());
  // all 1-rings: tau < infinity, so nothing counts
  const auto closed = estimate_survival_small_x(params_for(f, 2.0, 10.0, 0.0), 0.5, 200, 5);
  EXPECT_EQ(closed.hits, 0u);
  EXPECT_THROW(estimate_survival_small_x(params_for(f, 2.0, 10.0), 1.5, 10, 1), Error);
}
