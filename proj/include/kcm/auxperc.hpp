#pragma once

// The auxiliary oriented percolation process built from clock rings through
// a spread certificate, its death time and final occupied set, the
// transfer-of-zeroes check, and Monte Carlo estimators for its bond and
// survival probabilities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kcm/bootstrap.hpp"
#include "kcm/dual.hpp"
#include "kcm/harris.hpp"
#include "kcm/parallel.hpp"
#include "kcm/stats.hpp"

namespace kcm {

struct AuxParams {
  SpreadCertificate cert;
  double K = 2.0;
  double t = 2.0;
  double q = 1.0;
  double q_prime = 0.0;

  void validate() const {
    if (!(K > 0.0)) throw Error("aux: K must be positive");
    if (!(t >= K)) throw Error("aux: need t >= K");
    if (!(q >= 0.0 && q <= 1.0) || !(q_prime >= 0.0 && q_prime <= 1.0)) throw Error("aux: rates must lie in [0,1]");
    if (cert.rectangle.empty()) throw Error("aux: certificate has an empty rectangle");
  }
  std::int64_t blocks() const { return static_cast<std::int64_t>(std::floor(t / K)); }
  std::int64_t depth(std::int64_t k) const {
    if (k < 0 || k > blocks()) throw Error("aux: level k outside 0..floor(t/K)");
    return blocks() - k;
  }
  /// Time at which the deepest level sits: t - floor(t/K) K.
  double base_time() const { return t - static_cast<double>(blocks()) * K; }
};

inline double q_threshold(double K, std::size_t rectangle_size) {
  if (!(K > 0.0) || rectangle_size == 0) throw Error("q threshold: need K > 0 and |R| >= 1");
  return 1.0 + std::log1p(-std::exp(-K)) / (3.0 * K * static_cast<double>(rectangle_size));
}

/// Offset of the rectangle attached to node (r, n): ((r - n) / 2) a1u.
inline Vec node_offset(const SpreadCertificate& cert, std::int64_t r, std::int64_t n) {
  if ((r + n) % 2 != 0) throw Error("aux: node (r, n) needs r + n even");
  return ((r - n) / 2) * cert.a1_offset;
}

/// Bounding box, relative to the anchor y, of every site read by the bonds
/// of a lattice of the given depth.
struct AuxFootprint {
  Vec lo;
  Vec hi;
};

inline AuxFootprint aux_footprint(const SpreadCertificate& cert, std::int64_t depth) {
  std::vector<Vec> base = cert.rectangle;
  base.insert(base.end(), cert.sequence.begin(), cert.sequence.end());
  Vec lo = base.front(), hi = base.front();
  for (std::int64_t j = -std::max<std::int64_t>(depth, 0); j <= 0; ++j)
    for (const Vec& v : base) {
      const Vec p = v + j * cert.a1_offset;
      lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
      hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
    }
  return {lo, hi};
}

struct AuxBox {
  Geometry geometry;
  Vec anchor;
};

/// Smallest box (plus `margin` on every side) holding the footprint, and the
/// anchor y that places it there.
inline AuxBox aux_box(const SpreadCertificate& cert, std::int64_t depth, Boundary boundary = Boundary::Torus,
                      std::int64_t margin = 0) {
  const auto fp = aux_footprint(cert, depth);
  Geometry g{cert.dimension, fp.hi.x - fp.lo.x + 1 + 2 * margin,
             cert.dimension == 2 ? fp.hi.y - fp.lo.y + 1 + 2 * margin : 1, boundary};
  g.validate();
  Vec anchor{margin - fp.lo.x, cert.dimension == 2 ? margin - fp.lo.y : 0};
  return {g, anchor};
}

/// Bonds of the process attached to (y, k). Level n holds nodes
/// r = -n, -n+2, ..., n at index (r + n) / 2.
struct OPLattice {
  Vec y;
  std::int64_t k = 0;
  std::int64_t depth = 0;
  double K = 0.0;
  double t = 0.0;
  /// vertical[n][i]: bond (r-1, n-1) -> (r, n); diagonal[n][i]: (r+1, n-1) -> (r, n).
  std::vector<std::vector<std::uint8_t>> vertical;
  std::vector<std::vector<std::uint8_t>> diagonal;

  static std::size_t index(std::int64_t r, std::int64_t n) { return static_cast<std::size_t>((r + n) / 2); }
  bool vertical_open(std::int64_t r, std::int64_t n) const { return vertical.at(n).at(index(r, n)) != 0; }
  bool diagonal_open(std::int64_t r, std::int64_t n) const { return diagonal.at(n).at(index(r, n)) != 0; }
  /// Interval (lo, hi] of level n.
  std::pair<double, double> interval(std::int64_t n) const {
    return {t - static_cast<double>(k + n) * K, t - static_cast<double>(k + n - 1) * K};
  }
};

namespace detail {

inline std::size_t box_index(const Geometry& g, Vec v) {
  auto i = g.index_in_box(v);
  if (!i) throw Error("aux: site " + to_string(v) + " outside the geometry; enlarge the box");
  return *i;
}

inline bool no_one_ring(const ClockLog& log, std::size_t site, double lo, double hi) {
  for (const Ring& r : log.rings_in(site, lo, hi))
    if (r.label == 1) return false;
  return true;
}

// Earliest-match test for 0-rings t_1 < ... < t_m at the given sites.
inline bool successive_zero_rings(const ClockLog& log, const std::vector<std::size_t>& sites, double lo, double hi) {
  double cur = lo;
  for (std::size_t s : sites) {
    std::optional<double> hit;
    for (const Ring& r : log.rings_in(s, cur, hi))
      if (r.label == 0) {
        hit = r.time;
        break;
      }
    if (!hit) return false;
    cur = *hit;
  }
  return true;
}

}  // namespace detail

inline OPLattice build_bonds(const ClockLog& log, const AuxParams& p, Vec y, std::int64_t k) {
  p.validate();
  const auto& g = log.geometry();
  const auto& cert = p.cert;
  OPLattice lat;
  lat.y = y;
  lat.k = k;
  lat.depth = p.depth(k);
  lat.K = p.K;
  lat.t = p.t;
  if (p.t > log.horizon()) throw Error("aux: t beyond the log horizon");
  lat.vertical.resize(static_cast<std::size_t>(lat.depth) + 1);
  lat.diagonal.resize(static_cast<std::size_t>(lat.depth) + 1);
  std::vector<std::size_t> rect_sites, seq_sites;
  for (std::int64_t n = 1; n <= lat.depth; ++n) {
    const auto [lo, hi] = lat.interval(n);
    auto& vert = lat.vertical[n];
    auto& diag = lat.diagonal[n];
    vert.assign(static_cast<std::size_t>(n) + 1, 0);
    diag.assign(static_cast<std::size_t>(n) + 1, 0);
    for (std::int64_t r = -n; r <= n; r += 2) {
      const Vec base = y + node_offset(cert, r, n);
      rect_sites.clear();
      seq_sites.clear();
      for (const Vec& v : cert.rectangle) rect_sites.push_back(detail::box_index(g, base + v));
      for (const Vec& v : cert.sequence) seq_sites.push_back(detail::box_index(g, base + v));
      const bool rect_quiet = std::all_of(rect_sites.begin(), rect_sites.end(),
                                          [&](std::size_t s) { return detail::no_one_ring(log, s, lo, hi); });
      vert[OPLattice::index(r, n)] = rect_quiet;
      const bool seq_quiet = std::all_of(seq_sites.begin(), seq_sites.end(),
                                         [&](std::size_t s) { return detail::no_one_ring(log, s, lo, hi); });
      diag[OPLattice::index(r, n)] =
          rect_quiet && seq_quiet && detail::successive_zero_rings(log, seq_sites, lo, hi);
    }
  }
  return lat;
}

struct ZetaRun {
  /// occupation[n][(r + n) / 2] = zeta_n(r).
  std::vector<std::vector<std::uint8_t>> occupation;
  /// First level with no occupied node; none means the process survives.
  std::optional<std::int64_t> tau;
  /// Occupied r with |r| <= floor(depth / 2) at the last level.
  std::vector<std::int64_t> survivors;

  bool occupied(std::int64_t r, std::int64_t n) const {
    if (n < 0 || n >= static_cast<std::int64_t>(occupation.size()) || r < -n || r > n || (r + n) % 2 != 0)
      return false;
    return occupation[n][OPLattice::index(r, n)] != 0;
  }
  bool survives() const { return !tau.has_value(); }
};

inline ZetaRun run_zeta(const OPLattice& lat) {
  ZetaRun z;
  z.occupation.push_back({1});
  for (std::int64_t n = 1; n <= lat.depth; ++n) {
    std::vector<std::uint8_t> level(static_cast<std::size_t>(n) + 1, 0);
    bool any = false;
    for (std::int64_t r = -n; r <= n; r += 2) {
      const bool from_left = z.occupied(r - 1, n - 1) && lat.vertical_open(r, n);
      const bool from_right = z.occupied(r + 1, n - 1) && lat.diagonal_open(r, n);
      level[OPLattice::index(r, n)] = from_left || from_right;
      any = any || from_left || from_right;
    }
    z.occupation.push_back(std::move(level));
    if (!any && !z.tau) z.tau = n;
  }
  const std::int64_t half = lat.depth / 2;
  for (std::int64_t r = -half; r <= half; ++r)
    if (z.occupied(r, lat.depth)) z.survivors.push_back(r);
  return z;
}

namespace detail {

inline bool rectangle_zero(const Trajectory& traj, const SpreadCertificate& cert, Vec base, double time) {
  return std::all_of(cert.rectangle.begin(), cert.rectangle.end(),
                     [&](Vec v) { return traj.value_at(base + v, time) == 0; });
}

}  // namespace detail

enum class TransferOutcome { Holds, Violated, NotApplicable };

inline std::string to_string(TransferOutcome o) {
  switch (o) {
    case TransferOutcome::Holds: return "holds";
    case TransferOutcome::Violated: return "violated";
    case TransferOutcome::NotApplicable: return "not-applicable";
  }
  return "?";
}

/// If zeta reaches (r0, depth) and that node's rectangle is at zero at the
/// base time, y + R must be at zero at time t - kK.
inline TransferOutcome check_transfer(const Trajectory& traj, const AuxParams& p, Vec y, std::int64_t k,
                                      std::int64_t r0) {
  const OPLattice lat = build_bonds(traj.log(), p, y, k);
  const ZetaRun z = run_zeta(lat);
  if (!z.occupied(r0, lat.depth)) return TransferOutcome::NotApplicable;
  if (!detail::rectangle_zero(traj, p.cert, y + node_offset(p.cert, r0, lat.depth), p.base_time()))
    return TransferOutcome::NotApplicable;
  const double target = p.t - static_cast<double>(k) * p.K;
  return detail::rectangle_zero(traj, p.cert, y, target) ? TransferOutcome::Holds : TransferOutcome::Violated;
}

/// Rectangle of (r, depth) at zero at the base time.
inline bool event_W(const Trajectory& traj, const AuxParams& p, Vec y, std::int64_t k, std::int64_t r) {
  const std::int64_t depth = p.depth(k);
  if (r < -(depth / 2) || r > depth / 2) throw Error("event W: r outside [-floor(n/2), floor(n/2)]");
  if ((r + depth) % 2 != 0) throw Error("event W: r + n must be even");
  return detail::rectangle_zero(traj, p.cert, y + node_offset(p.cert, r, depth), p.base_time());
}

struct KGamma {
  std::int64_t k;
  Vec y;
};

/// Smallest k whose process survives, with its anchor gamma_k.
inline std::optional<KGamma> find_k_gamma(const Coding& gamma, const ClockLog& log, const AuxParams& p) {
  for (std::size_t k = 0; k < gamma.sites.size(); ++k) {
    const auto kk = static_cast<std::int64_t>(k);
    if (run_zeta(build_bonds(log, p, gamma.sites[k], kk)).survives()) return KGamma{kk, gamma.sites[k]};
  }
  return std::nullopt;
}

/// Monte Carlo proportion compared with a stated upper bound.
struct BoundEstimate {
  std::string quantity;
  std::uint64_t hits = 0;
  std::uint64_t replicas = 0;
  double estimate = 0.0;
  Interval ci;
  /// Absent when only a trend is claimed.
  std::optional<double> stated_bound;
  std::string verdict;
};

namespace detail {

inline BoundEstimate finish_estimate(std::string quantity, const std::vector<std::uint8_t>& outcomes,
                                     std::optional<double> bound) {
  BoundEstimate e;
  e.quantity = std::move(quantity);
  e.replicas = outcomes.size();
  for (auto o : outcomes) e.hits += o;
  e.estimate = e.replicas ? static_cast<double>(e.hits) / static_cast<double>(e.replicas) : 0.0;
  e.ci = wilson_interval(e.hits, e.replicas);
  e.stated_bound = bound;
  if (!bound)
    e.verdict = "trend-only";
  else if (*bound >= 1.0)
    e.verdict = "vacuous";
  else
    e.verdict = e.ci.high <= *bound ? "satisfied" : "violated";
  return e;
}

}  // namespace detail

/// Probability that the diagonal bond (0,0) -> (-1,1) is closed, for t = K
/// and k = 0. Compared with e^{-K/4}.
inline BoundEstimate estimate_bond_closed_prob(const AuxParams& params, std::uint64_t replicas, std::uint64_t seed) {
  AuxParams p = params;
  p.t = p.K;
  p.validate();
  const AuxBox box = aux_box(p.cert, 1);
  auto outcomes = run_replicas(replicas, [&](std::uint64_t rep) -> std::uint8_t {
    const ClockLog log = sample_clock_log(box.geometry, p.q, p.t, seed, rep);
    const OPLattice lat = build_bonds(log, p, box.anchor, 0);
    return !lat.diagonal_open(-1, 1);
  });
  return detail::finish_estimate("P(diagonal bond closed)", outcomes, std::exp(-p.K / 4.0));
}

/// P(Poisson(mean) < m): the closed-bond probability at q = 1.
inline double poisson_below(double mean, std::size_t m) {
  double term = std::exp(-mean), sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sum += term;
    term *= mean / static_cast<double>(i + 1);
  }
  return sum;
}

/// P(n <= tau < infinity) for the process at (y, 0), depth floor(t/K).
/// Compared with 2 * 3^{2n} e^{-Kn/24}.
inline BoundEstimate estimate_extinction_tail(const AuxParams& params, std::int64_t n, std::uint64_t replicas,
                                              std::uint64_t seed) {
  params.validate();
  const std::int64_t depth = params.depth(0);
  const AuxBox box = aux_box(params.cert, depth);
  auto outcomes = run_replicas(replicas, [&](std::uint64_t rep) -> std::uint8_t {
    const ClockLog log = sample_clock_log(box.geometry, params.q, params.t, seed, rep);
    const ZetaRun z = run_zeta(build_bonds(log, params, box.anchor, 0));
    return z.tau && *z.tau >= n;
  });
  const double bound = 2.0 * std::pow(3.0, 2.0 * static_cast<double>(n)) *
                       std::exp(-params.K * static_cast<double>(n) / 24.0);
  return detail::finish_estimate("P(" + std::to_string(n) + " <= tau < inf)", outcomes, bound);
}

/// P(tau = infinity and |X| <= (alpha/2) depth) for the process at (y, 0).
/// Only decay in the depth is claimed.
inline BoundEstimate estimate_survival_small_x(const AuxParams& params, double alpha, std::uint64_t replicas,
                                               std::uint64_t seed) {
  params.validate();
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0,1)");
  const std::int64_t depth = params.depth(0);
  const AuxBox box = aux_box(params.cert, depth);
  auto outcomes = run_replicas(replicas, [&](std::uint64_t rep) -> std::uint8_t {
    const ClockLog log = sample_clock_log(box.geometry, params.q, params.t, seed, rep);
    const ZetaRun z = run_zeta(build_bonds(log, params, box.anchor, 0));
    return z.survives() && static_cast<double>(z.survivors.size()) <= alpha / 2.0 * static_cast<double>(depth);
  });
  return detail::finish_estimate("P(tau = inf, |X| <= alpha n / 2)", outcomes, std::nullopt);
}

}  // namespace kcm
