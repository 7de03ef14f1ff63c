#pragma once

// Bootstrap percolation on finite regions and the local spread certificate:
// a rectangle R, a step a1*u along an unstable direction and a sequence of
// sites whose successive infection, starting from R, covers a1*u + R.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "kcm/family.hpp"

namespace kcm {

class BudgetExhausted : public Error {
 public:
  BudgetExhausted() : Error("no spread certificate within the search budget") {}
};

/// Finite set of sites. Rule elements outside the region count as healthy.
class Region {
 public:
  Region() = default;
  explicit Region(std::set<Vec> sites) : sites_(std::move(sites)) {}

  /// All sites of the box [lo, hi] (inclusive).
  static Region box(Vec lo, Vec hi) {
    std::set<Vec> s;
    for (auto x = lo.x; x <= hi.x; ++x)
      for (auto y = lo.y; y <= hi.y; ++y) s.insert({x, y});
    return Region(std::move(s));
  }

  bool contains(Vec v) const { return sites_.count(v) != 0; }
  const std::set<Vec>& sites() const { return sites_; }
  std::size_t size() const { return sites_.size(); }

 private:
  std::set<Vec> sites_;
};

/// Infected sites with the round at which each became infected (round 0 for
/// the initial set) and, for later rounds, the index of a witnessing rule.
struct InfectionState {
  std::shared_ptr<const Region> region;
  std::map<Vec, int> rounds;
  std::map<Vec, std::size_t> witness;

  static InfectionState initial(std::shared_ptr<const Region> region, const std::set<Vec>& infected) {
    InfectionState s{std::move(region), {}, {}};
    for (const Vec& v : infected) {
      if (!s.region->contains(v)) throw Error("initially infected site " + to_string(v) + " outside region");
      s.rounds[v] = 0;
    }
    return s;
  }

  bool infected(Vec v) const { return rounds.count(v) != 0; }
  std::set<Vec> sites() const {
    std::set<Vec> out;
    for (const auto& [v, r] : rounds) out.insert(v);
    return out;
  }
};

namespace detail {

// Smallest max-round over the rules whose translate is fully infected, with
// the rule index achieving it.
inline std::optional<std::pair<int, std::size_t>> infection_round(const UpdateFamily& family,
                                                                  const InfectionState& s, Vec site) {
  std::optional<std::pair<int, std::size_t>> best;
  for (std::size_t i = 0; i < family.size(); ++i) {
    int worst = -1;
    bool ok = true;
    for (const Vec& x : family.rules()[i]) {
      auto it = s.rounds.find(site + x);
      if (it == s.rounds.end()) {
        ok = false;
        break;
      }
      worst = std::max(worst, it->second);
    }
    if (ok && (!best || worst + 1 < best->first)) best = std::pair{worst + 1, i};
  }
  return best;
}

}  // namespace detail

/// One synchronous bootstrap step.
inline InfectionState step(const UpdateFamily& family, const InfectionState& state) {
  InfectionState next = state;
  for (const Vec& v : state.region->sites()) {
    if (state.infected(v)) continue;
    if (auto r = detail::infection_round(family, state, v)) {
      next.rounds[v] = r->first;
      next.witness[v] = r->second;
    }
  }
  return next;
}

/// Least fixed point of `step` containing the initial state.
inline InfectionState closure(const UpdateFamily& family, const InfectionState& initial) {
  InfectionState s = initial;
  // Candidates for newly infected sites are x - v with x freshly infected.
  std::set<Vec> fresh = s.sites();
  while (!fresh.empty()) {
    std::set<Vec> candidates;
    for (const Vec& f : fresh)
      for (const auto& rule : family.rules())
        for (const Vec& x : rule) {
          const Vec c = f - x;
          if (s.region->contains(c) && !s.infected(c)) candidates.insert(c);
        }
    std::vector<std::pair<Vec, std::pair<int, std::size_t>>> added;
    for (const Vec& c : candidates)
      if (auto r = detail::infection_round(family, s, c)) added.push_back({c, *r});
    fresh.clear();
    for (const auto& [c, r] : added) {
      s.rounds[c] = r.first;
      s.witness[c] = r.second;
      fresh.insert(c);
    }
  }
  return s;
}

/// Local spread data: if R is at zero and the sites of `sequence` receive
/// successive 0-clock rings with no 1-clock ring on R or the sequence, then
/// a1_offset + R ends up at zero.
struct SpreadCertificate {
  int dimension = 1;
  Direction u{Vec{1, 0}};
  Vec a1_offset;
  /// Multiples of the normal in a1_offset (d = 2), a1 itself in d = 1.
  std::int64_t a1_steps = 1;
  /// Bound on <x, u_perp normal> over R (d = 2 only).
  std::int64_t a2 = 0;
  std::vector<Vec> rectangle;
  std::vector<Vec> sequence;

  std::size_t rectangle_size() const { return rectangle.size(); }
};

struct CertificateCheck {
  bool ok = false;
  /// Index into the sequence of the first failing infection, if any.
  std::optional<std::size_t> failed_at;
  std::string reason;

  explicit operator bool() const { return ok; }
};

/// Replays the infection sequence starting from R.
inline CertificateCheck validate_certificate(const UpdateFamily& family, const SpreadCertificate& cert) {
  std::set<Vec> rect(cert.rectangle.begin(), cert.rectangle.end());
  std::set<Vec> strip;
  for (const Vec& v : rect) {
    strip.insert(v + cert.a1_offset);
    strip.insert(v + 2 * cert.a1_offset);
  }
  if (rect.empty()) return {false, std::nullopt, "empty rectangle"};

  std::set<Vec> infected = rect;
  for (std::size_t i = 0; i < cert.sequence.size(); ++i) {
    const Vec x = cert.sequence[i];
    if (!strip.count(x)) return {false, i, "site " + to_string(x) + " outside a1u+R and 2a1u+R"};
    bool fired = false;
    for (const auto& rule : family.rules()) {
      fired = std::all_of(rule.begin(), rule.end(), [&](Vec v) { return infected.count(x + v) != 0; });
      if (fired) break;
    }
    if (!fired) return {false, i, "no rule fully infected at " + to_string(x)};
    infected.insert(x);
  }
  for (const Vec& v : rect)
    if (!infected.count(v + cert.a1_offset))
      return {false, std::nullopt, "a1u+R not covered at " + to_string(v + cert.a1_offset)};
  return {true, std::nullopt, {}};
}

struct SearchBudget {
  std::int64_t max_a1 = 30;
  std::int64_t max_a2 = 30;
};

namespace detail {

inline std::vector<Vec> rectangle_sites_2d(Vec m, std::int64_t steps, std::int64_t a2) {
  // R = {p : 0 <= <p,m> < steps*|m|^2, 0 <= <p,m_perp> <= a2}.
  const Vec perp = rot_ccw(m);
  const std::int64_t n2 = dot(m, m);
  const std::int64_t limit = steps * n2;
  // Corners of the parallelogram spanned by steps*m and (a2/|m|^2)*perp
  // bound every site; scan a box around them.
  const double s = static_cast<double>(a2) / static_cast<double>(n2);
  const double cx[] = {0.0, static_cast<double>(steps * m.x), s * perp.x, steps * m.x + s * perp.x};
  const double cy[] = {0.0, static_cast<double>(steps * m.y), s * perp.y, steps * m.y + s * perp.y};
  const auto lox = static_cast<std::int64_t>(std::floor(*std::min_element(cx, cx + 4))) - 1;
  const auto hix = static_cast<std::int64_t>(std::ceil(*std::max_element(cx, cx + 4))) + 1;
  const auto loy = static_cast<std::int64_t>(std::floor(*std::min_element(cy, cy + 4))) - 1;
  const auto hiy = static_cast<std::int64_t>(std::ceil(*std::max_element(cy, cy + 4))) + 1;
  std::vector<Vec> out;
  for (auto x = lox; x <= hix; ++x)
    for (auto y = loy; y <= hiy; ++y) {
      const Vec p{x, y};
      const auto a = dot(p, m), b = dot(p, perp);
      if (a >= 0 && a < limit && b >= 0 && b <= a2) out.push_back(p);
    }
  return out;
}

inline std::optional<SpreadCertificate> try_rectangle(const UpdateFamily& family, Direction u,
                                                     std::vector<Vec> rect, Vec offset,
                                                     std::int64_t steps, std::int64_t a2) {
  if (rect.empty()) return std::nullopt;
  std::set<Vec> region_sites;
  for (const Vec& v : rect) {
    region_sites.insert(v);
    region_sites.insert(v + offset);
    region_sites.insert(v + 2 * offset);
  }
  auto region = std::make_shared<const Region>(std::move(region_sites));
  const std::set<Vec> rset(rect.begin(), rect.end());
  const InfectionState closed = closure(family, InfectionState::initial(region, rset));

  for (const Vec& v : rect)
    if (!closed.infected(v + offset)) return std::nullopt;

  // Keep only the sites the target needs, following witnessing rules back.
  std::set<Vec> needed;
  std::vector<Vec> work;
  for (const Vec& v : rect) work.push_back(v + offset);
  while (!work.empty()) {
    const Vec v = work.back();
    work.pop_back();
    if (rset.count(v) || needed.count(v)) continue;
    needed.insert(v);
    for (const Vec& x : family.rules()[closed.witness.at(v)]) work.push_back(v + x);
  }
  std::vector<Vec> seq(needed.begin(), needed.end());
  std::stable_sort(seq.begin(), seq.end(),
                   [&](Vec a, Vec b) { return closed.rounds.at(a) < closed.rounds.at(b); });

  SpreadCertificate cert;
  cert.dimension = family.dimension();
  cert.u = u;
  cert.a1_offset = offset;
  cert.a1_steps = steps;
  cert.a2 = a2;
  cert.rectangle = std::move(rect);
  std::sort(cert.rectangle.begin(), cert.rectangle.end());
  cert.sequence = std::move(seq);
  return cert;
}

}  // namespace detail

/// Searches rectangles in increasing size for a spread certificate.
/// d = 1: R = {0, u, ..., (a1-1)u}. d = 2: R spans `a1` multiples of the
/// reduced normal of u and a width a2 along u_perp, enumerated by increasing
/// a1 + a2, then a1. Directions other than the primary witness middle are
/// tried only if the primary one fails.
inline SpreadCertificate find_spread_certificate(const UpdateFamily& family, SearchBudget budget = {}) {
  if (classify(family).kind != Criticality::Supercritical) throw NotSupercritical();

  if (family.dimension() == 1) {
    const Direction u = unstable_semicircle_midpoint(family);
    const Vec n = u.normal();
    for (std::int64_t a1 = 1; a1 <= budget.max_a1; ++a1) {
      std::vector<Vec> rect;
      for (std::int64_t i = 0; i < a1; ++i) rect.push_back(i * n);
      if (auto c = detail::try_rectangle(family, u, std::move(rect), a1 * n, a1, 0)) return *c;
    }
    throw BudgetExhausted();
  }

  for (const Direction& u : unstable_semicircle_middles(family)) {
    const Vec m = u.normal();
    for (std::int64_t total = 1; total <= budget.max_a1 + budget.max_a2; ++total)
      for (std::int64_t a1 = 1; a1 <= std::min(total, budget.max_a1); ++a1) {
        const std::int64_t a2 = total - a1;
        if (a2 > budget.max_a2) continue;
        if (auto c = detail::try_rectangle(family, u, detail::rectangle_sites_2d(m, a1, a2), a1 * m, a1, a2))
          return *c;
      }
  }
  throw BudgetExhausted();
}

}  // namespace kcm
