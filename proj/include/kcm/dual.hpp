#pragma once

// Dual paths of a coupled trajectory, their codings, the reasonable-coding
// predicate and counts, and two binomial identities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "kcm/harris.hpp"

namespace kcm {

using BigInt = boost::multiprecision::cpp_int;

/// A jump of a dual path: at forward time `ring_time` (a ring of the site
/// occupied before the jump) the path moves to `site`.
struct DualJump {
  double ring_time;
  Vec site;
};

/// Backward path started at (start, t), of length `length`. In backward
/// coordinates s = t - ring_time, jump times are strictly increasing in
/// (0, length). Sites are points of Z^d; the geometry maps them to the box.
struct DualPath {
  Vec start;
  double t = 0.0;
  double length = 0.0;
  std::vector<DualJump> jumps;

  /// Gamma(s), right-continuous: the jump at s_k is already taken at s_k.
  Vec site_at(double s) const {
    Vec y = start;
    for (const auto& j : jumps) {
      if (t - j.ring_time > s) break;
      y = j.site;
    }
    return y;
  }

  std::vector<double> jump_times() const {
    std::vector<double> s;
    for (const auto& j : jumps) s.push_back(t - j.ring_time);
    return s;
  }
};

namespace detail {

inline bool has_ring_at(const ClockLog& log, Vec y, double time) {
  auto i = log.geometry().index_of(y);
  if (!i) return false;
  auto rs = log.rings(*i);
  auto it = std::lower_bound(rs.begin(), rs.end(), time, [](const Ring& r, double v) { return r.time < v; });
  return it != rs.end() && it->time == time;
}

// Calls fn(site, forward time) at every point where the path's space-time
// values may change: the lower end of each segment and every ring of the
// occupied site inside it. Stops early when fn returns true.
inline bool any_path_point(const DualPath& p, const ClockLog& log, const std::function<bool(Vec, double)>& fn) {
  Vec y = p.start;
  double hi = p.t;
  auto segment = [&](Vec site, double lo, double top) {
    if (fn(site, lo)) return true;
    if (auto i = log.geometry().index_of(site))
      for (const Ring& r : log.rings_in(*i, lo, top))
        if (fn(site, r.time)) return true;
    return false;
  };
  for (const auto& j : p.jumps) {
    if (segment(y, j.ring_time, hi)) return true;
    y = j.site;
    hi = j.ring_time;
  }
  return segment(y, p.t - p.length, hi);
}

}  // namespace detail

/// Jump times strictly inside (0, length) and increasing, each a ring of the
/// site left, each displacement within range rho.
inline bool validate_dual_path(const DualPath& p, const ClockLog& log, std::int64_t rho) {
  if (!(p.length >= 0.0 && p.length <= p.t && p.t <= log.horizon())) return false;
  Vec y = p.start;
  double prev_s = 0.0;
  for (const auto& j : p.jumps) {
    const double s = p.t - j.ring_time;
    if (!(s > prev_s && s < p.length)) return false;
    if (!detail::has_ring_at(log, y, j.ring_time)) return false;
    if (linf(j.site - y) > rho) return false;
    prev_s = s;
    y = j.site;
  }
  return true;
}

/// Whether the two coupled processes differ at every point of the path.
inline bool disagrees_along(const DualPath& p, const CoupledTrajectory& c) {
  return !detail::any_path_point(p, c.a.log(), [&](Vec y, double u) { return !c.disagree(y, u); });
}

/// Some point of the path has both processes at zero.
inline bool is_activated(const DualPath& p, const CoupledTrajectory& c) {
  return detail::any_path_point(p, c.a.log(), [&](Vec y, double u) { return c.both_zero(y, u); });
}

/// Backward path along which the processes keep disagreeing: stay put until
/// the two agree just before a ring of the current site, then move to a
/// disagreeing site of the rule that let exactly one of them update.
inline std::optional<DualPath> construct_disagreement_path(const CoupledTrajectory& c, Vec x, double t,
                                                           double t_prime) {
  if (!(t_prime >= 0.0 && t_prime <= t && t <= c.a.horizon())) throw Error("dual path: need 0 <= t' <= t <= T");
  if (!c.disagree(x, t)) return std::nullopt;
  const auto& g = c.a.geometry();
  const double floor_time = t - t_prime;
  DualPath path{x, t, t_prime, {}};
  Vec cur = x;
  double top = t;
  for (;;) {
    auto idx = g.index_of(cur);
    if (!idx) break;  // frozen boundary site: values never change
    std::optional<double> jump_time;
    const auto rings = c.a.log().rings_in(*idx, floor_time, top);
    for (auto it = rings.rbegin(); it != rings.rend(); ++it)
      if (c.a.value_before(*idx, it->time) == c.b.value_before(*idx, it->time)) {
        jump_time = it->time;
        break;
      }
    if (!jump_time) break;

    const double sigma = *jump_time;
    const Trajectory& moved = c.a.value_at(*idx, sigma) != c.a.value_before(*idx, sigma) ? c.a : c.b;
    const Trajectory& other = &moved == &c.a ? c.b : c.a;
    std::optional<Vec> next;
    for (const auto& rule : c.a.family().rules()) {
      const bool full = std::all_of(rule.begin(), rule.end(),
                                    [&](Vec v) { return moved.value_before(cur + v, sigma) == 0; });
      if (!full) continue;
      for (const Vec& v : rule)
        if (other.value_before(cur + v, sigma) != 0) {
          next = cur + v;
          break;
        }
      if (next) break;
    }
    if (!next) throw std::logic_error("dual path: no disagreeing site in the witnessing rule at " + to_string(cur));
    path.jumps.push_back({sigma, *next});
    cur = *next;
    // A ring of the new site at exactly sigma has probability zero; exclude it.
    top = std::nextafter(sigma, -1.0);
  }
  return path;
}

/// Sites of a path sampled every K units of backward time.
struct Coding {
  std::vector<Vec> sites;
  double K = 0.0;
  double t = 0.0;
};

inline std::size_t coding_length(double t, double K) { return static_cast<std::size_t>(std::floor(t / (K * K))) + 1; }

inline Coding coding_of(const DualPath& p, double K) {
  const std::size_t n = coding_length(p.t, K);
  if (static_cast<double>(n - 1) * K > p.length) throw Error("coding: path shorter than floor(t/K^2) K");
  Coding c{{}, K, p.t};
  for (std::size_t k = 0; k < n; ++k) c.sites.push_back(p.site_at(static_cast<double>(k) * K));
  return c;
}

/// Both processes at zero at (y_k, t - kK) for some k.
inline bool event_G(const Coding& gamma, const CoupledTrajectory& c, double K, double t) {
  for (std::size_t k = 0; k < gamma.sites.size(); ++k)
    if (c.both_zero(gamma.sites[k], t - static_cast<double>(k) * K)) return true;
  return false;
}

namespace detail {

inline std::int64_t leg_cost(Vec a, Vec b, std::int64_t rho) { return (linf(b - a) + rho - 1) / rho; }

inline std::int64_t chain_budget(double t, double K, std::int64_t N) {
  return static_cast<std::int64_t>(std::floor(static_cast<double>(N) * t / K));
}

}  // namespace detail

/// gamma starts at x, has floor(t/K^2)+1 entries, and the shortest chain of
/// range-rho steps visiting its entries in order has at most N t / K steps.
inline bool is_reasonable_coding(const std::vector<Vec>& gamma, Vec x, double t, double K, std::int64_t N,
                                 std::int64_t rho) {
  if (gamma.size() != coding_length(t, K) || gamma.front() != x) return false;
  std::int64_t cost = 0;
  for (std::size_t k = 0; k + 1 < gamma.size(); ++k) cost += detail::leg_cost(gamma[k], gamma[k + 1], rho);
  return cost <= detail::chain_budget(t, K, N);
}

inline constexpr std::uint64_t kCodingCountGuard = 100'000'000;

/// Number of reasonable codings, by dynamic programming over the total chain
/// cost of the legs.
inline std::uint64_t count_reasonable_codings(double t, double K, std::int64_t N, std::int64_t rho, int dimension) {
  if (dimension != 1 && dimension != 2) throw Error("coding count: dimension must be 1 or 2");
  if (rho < 1 || N < 0) throw Error("coding count: need rho >= 1 and N >= 0");
  const std::size_t legs = coding_length(t, K) - 1;
  const std::int64_t budget = detail::chain_budget(t, K, N);
  if (budget < 0) return legs == 0 ? 1 : 0;
  auto ball = [&](std::int64_t r) {
    const BigInt side = 2 * r + 1;
    return dimension == 1 ? side : side * side;
  };
  // displacements of cost exactly j
  std::vector<BigInt> per_cost(static_cast<std::size_t>(budget) + 1);
  per_cost[0] = 1;
  for (std::int64_t j = 1; j <= budget; ++j) per_cost[j] = ball(j * rho) - ball((j - 1) * rho);

  std::vector<BigInt> ways(static_cast<std::size_t>(budget) + 1);
  ways[0] = 1;
  for (std::size_t leg = 0; leg < legs; ++leg) {
    std::vector<BigInt> next(ways.size());
    for (std::size_t used = 0; used < ways.size(); ++used) {
      if (ways[used] == 0) continue;
      for (std::size_t j = 0; used + j < ways.size(); ++j) next[used + j] += ways[used] * per_cost[j];
    }
    ways = std::move(next);
  }
  BigInt total = 0;
  for (const auto& w : ways) total += w;
  if (total > kCodingCountGuard) throw Error("coding count exceeds the 1e8 guard");
  return total.convert_to<std::uint64_t>();
}

/// Largest number of jumps of a dual path from (x, t) of length t'. Rings
/// are swept forward in time from t - t'; h[y] is the best count for a path
/// standing at y just after the sweep time.
inline std::uint64_t max_dual_jumps(const ClockLog& log, Vec x, double t, double t_prime, std::int64_t rho) {
  if (!(t_prime >= 0.0 && t_prime <= t && t <= log.horizon())) throw Error("max jumps: need 0 <= t' <= t <= T");
  const auto& g = log.geometry();
  auto xi = g.index_of(x);
  if (!xi) return 0;
  std::vector<std::uint64_t> h(g.size(), 0);
  const double lo = t - t_prime;
  std::vector<std::size_t> neighbours;
  for (const auto& ev : log.order()) {
    if (ev.time <= lo) continue;
    if (ev.time >= t) break;
    const Vec y = g.coords(ev.site);
    std::uint64_t best = 0;
    bool any = false;
    for (std::int64_t dx = -rho; dx <= rho; ++dx)
      for (std::int64_t dy = (g.dimension == 2 ? -rho : 0); dy <= (g.dimension == 2 ? rho : 0); ++dy)
        if (auto z = g.index_of(y + Vec{dx, dy})) {
          best = std::max(best, h[*z]);
          any = true;
        }
    if (any) h[ev.site] = std::max(h[ev.site], best + 1);
  }
  return h[*xi];
}

inline BigInt binomial(std::int64_t n, std::int64_t k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  BigInt r = 1;
  for (std::int64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// Number of (j_1..j_I) in N^I summing to J: C(I+J-1, I-1).
inline BigInt compositions_count(std::int64_t I, std::int64_t J) {
  if (I < 1) throw Error("compositions need at least one part");
  if (J < 0) throw Error("compositions need a nonnegative total");
  return binomial(I + J - 1, I - 1);
}

/// sum_{j=0}^{J} C(I+j, I) in closed form: C(I+J+1, I+1).
inline BigInt hockey_stick(std::int64_t I, std::int64_t J) {
  if (I < 0 || J < 0) throw Error("hockey stick needs I, J >= 0");
  return binomial(I + J + 1, I + 1);
}

}  // namespace kcm
