#pragma once

// Update families and their exact stable-direction geometry.
//
// Directions of the circle are represented by reduced integer normals and
// compared with integer cross/dot products only.

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "kcm/lattice.hpp"

namespace kcm {

class NotSupercritical : public Error {
 public:
  NotSupercritical() : Error("update family is not supercritical") {}
};

/// A finite nonempty collection of update rules, each a finite nonempty set of
/// nonzero lattice vectors.
class UpdateFamily {
 public:
  using Rule = std::vector<Vec>;

  UpdateFamily(int dimension, std::vector<Rule> rules) : dimension_(dimension) {
    if (dimension != 1 && dimension != 2)
      throw Error("update family dimension must be 1 or 2");
    if (rules.empty()) throw Error("update family needs at least one rule");
    for (auto& rule : rules) {
      if (rule.empty()) throw Error("update rules must be nonempty");
      for (const Vec& v : rule) {
        if (is_zero(v)) throw Error("update rules may not contain the origin");
        if (dimension == 1 && v.y != 0)
          throw Error("one-dimensional rule element " + to_string(v) + " has a second coordinate");
        range_ = std::max(range_, linf(v));
      }
      std::sort(rule.begin(), rule.end());
      rule.erase(std::unique(rule.begin(), rule.end()), rule.end());
    }
    rules_ = std::move(rules);
  }

  int dimension() const { return dimension_; }
  const std::vector<Rule>& rules() const { return rules_; }
  std::size_t size() const { return rules_.size(); }
  int range() const { return static_cast<int>(range_); }

  /// A copy with every rule element mapped through `f`.
  template <class F>
  UpdateFamily transformed(F&& f) const {
    std::vector<Rule> out;
    for (const auto& rule : rules_) {
      Rule r;
      for (const Vec& v : rule) r.push_back(f(v));
      out.push_back(std::move(r));
    }
    return UpdateFamily(dimension_, std::move(out));
  }

 private:
  int dimension_;
  std::vector<Rule> rules_;
  std::int64_t range_ = 0;
};

inline int range(const UpdateFamily& family) { return family.range(); }

namespace families {

inline UpdateFamily fa1f() { return UpdateFamily(1, {{{-1, 0}}, {{1, 0}}}); }
inline UpdateFamily east() { return UpdateFamily(1, {{{-1, 0}}}); }
inline UpdateFamily fa1f_2d() {
  return UpdateFamily(2, {{{1, 0}}, {{-1, 0}}, {{0, 1}}, {{0, -1}}});
}
/// All two-element subsets of the nearest neighbours.
inline UpdateFamily two_neighbour() {
  const Vec nn[] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  std::vector<UpdateFamily::Rule> rules;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) rules.push_back({nn[i], nn[j]});
  return UpdateFamily(2, std::move(rules));
}
inline UpdateFamily left_2d() { return UpdateFamily(2, {{{-1, 0}}}); }
inline UpdateFamily opposite_pair_2d() { return UpdateFamily(2, {{{1, 0}, {-1, 0}}}); }

inline std::optional<UpdateFamily> by_name(const std::string& name) {
  if (name == "fa1f") return fa1f();
  if (name == "east") return east();
  if (name == "fa1f-2d") return fa1f_2d();
  if (name == "two-neighbour") return two_neighbour();
  if (name == "left-2d") return left_2d();
  if (name == "opposite-pair-2d") return opposite_pair_2d();
  return std::nullopt;
}

}  // namespace families

/// A direction of S^{d-1} given by a reduced integer normal. In dimension 1
/// the normal is (+1,0) or (-1,0).
class Direction {
 public:
  explicit Direction(Vec normal) {
    if (is_zero(normal)) throw Error("direction normal must be nonzero");
    normal_ = reduced(normal);
  }
  Vec normal() const { return normal_; }
  auto operator<=>(const Direction&) const = default;

 private:
  Vec normal_;
};

/// True iff no rule lies inside the open half-space {x : <x,u> < 0}.
inline bool is_stable(const UpdateFamily& family, Vec u) {
  if (is_zero(u)) throw Error("is_stable: zero direction");
  for (const auto& rule : family.rules()) {
    bool inside = true;
    for (const Vec& x : rule)
      if (dot(x, u) >= 0) {
        inside = false;
        break;
      }
    if (inside) return false;
  }
  return true;
}
inline bool is_stable(const UpdateFamily& family, Direction u) {
  return is_stable(family, u.normal());
}

namespace geom {

// Angles are measured counterclockwise. These helpers compare directions
// without normalising lengths.

inline bool same_direction(Vec a, Vec b) { return cross(a, b) == 0 && dot(a, b) > 0; }

/// 0 when the counterclockwise angle from `from` to `v` is in [0, pi).
inline int half_from(Vec from, Vec v) {
  const auto c = cross(from, v);
  return (c > 0 || (c == 0 && dot(from, v) > 0)) ? 0 : 1;
}

/// ccw angle from `from` to `a` is strictly smaller than ccw angle to `b`.
inline bool ccw_less(Vec from, Vec a, Vec b) {
  const int ha = half_from(from, a), hb = half_from(from, b);
  if (ha != hb) return ha < hb;
  return cross(a, b) > 0;
}

inline bool ccw_le(Vec from, Vec a, Vec b) { return !ccw_less(from, b, a); }

/// Total order by absolute angle from the positive first axis.
inline bool angle_less(Vec a, Vec b) { return ccw_less({1, 0}, a, b); }

/// Membership of `p` in the open counterclockwise arc (s, e). The arc has
/// length at most pi; s and e are distinct directions.
inline bool in_open_arc(Vec s, Vec e, Vec p) {
  return !same_direction(s, p) && ccw_less(s, p, e);
}

/// A direction strictly inside the open counterclockwise arc from a to b.
/// Equal a and b mean the whole circle minus a.
inline Vec interior_direction(Vec a, Vec b) {
  if (same_direction(a, b)) return -a;
  const auto c = cross(a, b);
  if (c > 0) return reduced(a + b);
  if (c == 0) return rot_ccw(a);
  return reduced(-(a + b));
}

/// The ccw angle from a to b is at least pi (equal directions count as 2 pi).
inline bool spans_half_turn(Vec a, Vec b) {
  if (same_direction(a, b)) return true;
  const auto c = cross(a, b);
  return c < 0 || (c == 0 && dot(a, b) < 0);
}

}  // namespace geom

/// Closed counterclockwise arc. start == end is a single direction.
struct Arc {
  Vec start;
  Vec end;

  bool is_point() const { return geom::same_direction(start, end); }
  bool contains(Vec u) const {
    if (is_point()) return geom::same_direction(start, u);
    return geom::ccw_le(start, u, end);
  }
};

/// Finite union of pairwise disjoint closed arcs, sorted by start angle.
struct ArcSet {
  std::vector<Arc> arcs;
  bool full = false;

  bool empty() const { return !full && arcs.empty(); }
  bool contains(Vec u) const {
    if (full) return true;
    return std::any_of(arcs.begin(), arcs.end(), [&](const Arc& a) { return a.contains(u); });
  }
  /// Open arcs of the complement as (from, to) pairs; equal pair means
  /// everything but one direction. Empty for the full circle; for the empty
  /// set the single gap is reported with from == to == (1,0) and `whole`.
  struct Gap {
    Vec from;
    Vec to;
    bool whole = false;
  };
  std::vector<Gap> gaps() const {
    std::vector<Gap> out;
    if (full) return out;
    if (arcs.empty()) {
      out.push_back({{1, 0}, {1, 0}, true});
      return out;
    }
    for (std::size_t i = 0; i < arcs.size(); ++i)
      out.push_back({arcs[i].end, arcs[(i + 1) % arcs.size()].start, false});
    return out;
  }
  /// The arcs of positive length only.
  ArcSet without_points() const {
    ArcSet out;
    out.full = full;
    for (const Arc& a : arcs)
      if (!a.is_point()) out.arcs.push_back(a);
    return out;
  }
};

namespace detail {

// Open arc of directions u with <x,u> < 0 for every x in the rule, if any.
inline std::optional<std::pair<Vec, Vec>> unstable_arc(const UpdateFamily::Rule& rule) {
  std::vector<Vec> dirs;
  for (const Vec& v : rule) dirs.push_back(reduced(v));
  std::sort(dirs.begin(), dirs.end(), geom::angle_less);
  dirs.erase(std::unique(dirs.begin(), dirs.end()), dirs.end());
  if (dirs.size() == 1) return std::pair{rot_ccw(dirs[0]), rot_cw(dirs[0])};
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const Vec b = dirs[i];
    const Vec a = dirs[(i + 1) % dirs.size()];
    // A gap wider than a half turn between consecutive elements: the rule
    // sits in the cone from a to b, of opening less than pi.
    if (cross(b, a) < 0) return std::pair{rot_ccw(b), rot_cw(a)};
  }
  return std::nullopt;
}

}  // namespace detail

/// The stable set of a two-dimensional family: the complement of the union
/// over rules of the open arcs {u : <x,u> < 0 for all x in X}.
inline ArcSet stable_set_2d(const UpdateFamily& family) {
  if (family.dimension() != 2) throw Error("stable_set_2d needs a two-dimensional family");

  std::vector<std::pair<Vec, Vec>> open_arcs;
  for (const auto& rule : family.rules())
    if (auto arc = detail::unstable_arc(rule)) open_arcs.push_back(*arc);

  ArcSet result;
  if (open_arcs.empty()) {
    result.full = true;
    return result;
  }

  std::vector<Vec> pts;
  for (const auto& [s, e] : open_arcs) {
    pts.push_back(s);
    pts.push_back(e);
  }
  std::sort(pts.begin(), pts.end(), geom::angle_less);
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](Vec a, Vec b) { return geom::same_direction(a, b); }),
            pts.end());

  auto covered = [&](Vec p) {
    return std::any_of(open_arcs.begin(), open_arcs.end(),
                       [&](const auto& arc) { return geom::in_open_arc(arc.first, arc.second, p); });
  };

  // Pieces 2i (point i) and 2i+1 (open gap from point i to point i+1).
  const std::size_t n = pts.size();
  std::vector<bool> free(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    free[2 * i] = !covered(pts[i]);
    free[2 * i + 1] = !covered(geom::interior_direction(pts[i], pts[(i + 1) % n]));
  }

  // Some piece is covered since there is at least one open arc; rotate so the
  // scan starts right after a covered piece.
  std::size_t first = 0;
  while (free[first]) ++first;
  std::optional<std::size_t> run_start;
  std::size_t last_point = 0;
  for (std::size_t step = 1; step <= 2 * n; ++step) {
    const std::size_t piece = (first + step) % (2 * n);
    if (free[piece]) {
      if (piece % 2 == 0) {
        if (!run_start) run_start = piece / 2;
        last_point = piece / 2;
      }
    } else if (run_start) {
      result.arcs.push_back({pts[*run_start], pts[last_point]});
      run_start.reset();
    }
  }
  if (run_start) result.arcs.push_back({pts[*run_start], pts[last_point]});

  std::sort(result.arcs.begin(), result.arcs.end(),
            [](const Arc& a, const Arc& b) { return geom::angle_less(a.start, b.start); });
  return result;
}

enum class Criticality { Supercritical, Critical, Subcritical };

inline const char* to_string(Criticality c) {
  switch (c) {
    case Criticality::Supercritical: return "supercritical";
    case Criticality::Critical: return "critical";
    case Criticality::Subcritical: return "subcritical";
  }
  return "?";
}

struct Classification {
  Criticality kind;
  /// Supercritical only: the middle of an open half-circle free of stable
  /// directions (in dimension 1, the unstable direction itself).
  std::optional<Direction> witness;
  /// Endpoints of the witness half-circle, counterclockwise (dimension 2).
  std::optional<std::pair<Vec, Vec>> witness_arc;
};

namespace detail {

// Candidate middles: the lattice axes and, for every rule element x, the
// directions of +-x and +-x rotated by a quarter turn. Ordered with
// upper-half-plane normals first, then lexicographically.
inline std::vector<Vec> midpoint_candidates(const UpdateFamily& family) {
  std::set<Vec> c = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  for (const auto& rule : family.rules())
    for (const Vec& v : rule) {
      const Vec r = reduced(v);
      for (Vec w : {r, -r, rot_ccw(r), rot_cw(r)}) c.insert(w);
    }
  std::vector<Vec> out(c.begin(), c.end());
  auto upper = [](Vec v) { return v.y > 0 || (v.y == 0 && v.x > 0); };
  std::stable_sort(out.begin(), out.end(),
                   [&](Vec a, Vec b) { return upper(a) && !upper(b); });
  return out;
}

// The open half-circle centred at m lies inside the gap.
inline bool half_circle_fits(const ArcSet::Gap& gap, Vec m) {
  const Vec p1 = rot_cw(m), p2 = rot_ccw(m);
  if (gap.whole) return true;
  if (geom::same_direction(gap.from, gap.to)) return !geom::in_open_arc(p1, p2, gap.from);
  return geom::ccw_le(gap.from, p1, p2) && geom::ccw_le(gap.from, p2, gap.to);
}

inline std::vector<Vec> free_half_circle_middles(const ArcSet& s,
                                                 const std::vector<Vec>& candidates) {
  std::vector<Vec> out;
  for (Vec m : candidates)
    for (const auto& gap : s.gaps())
      if (half_circle_fits(gap, m)) {
        out.push_back(m);
        break;
      }
  return out;
}

inline bool has_free_half_circle(const ArcSet& s) {
  for (const auto& gap : s.gaps())
    if (gap.whole || geom::spans_half_turn(gap.from, gap.to)) return true;
  return false;
}

}  // namespace detail

inline Classification classify(const UpdateFamily& family) {
  if (family.dimension() == 1) {
    const bool plus_stable = is_stable(family, Vec{1, 0});
    const bool minus_stable = is_stable(family, Vec{-1, 0});
    if (!plus_stable) return {Criticality::Supercritical, Direction({1, 0}), std::nullopt};
    if (!minus_stable) return {Criticality::Supercritical, Direction({-1, 0}), std::nullopt};
    return {Criticality::Subcritical, std::nullopt, std::nullopt};
  }

  const ArcSet s = stable_set_2d(family);
  if (detail::has_free_half_circle(s)) {
    const auto middles = detail::free_half_circle_middles(s, detail::midpoint_candidates(family));
    if (middles.empty()) throw Error("classify: no rational half-circle middle found");
    const Vec m = middles.front();
    return {Criticality::Supercritical, Direction(m), std::pair{rot_cw(m), rot_ccw(m)}};
  }
  // int(C n S) is empty for a closed half-circle C iff the open half-circle
  // int(C) misses every stable arc of positive length.
  const ArcSet thick = s.without_points();
  if (thick.empty() || detail::has_free_half_circle(thick))
    return {Criticality::Critical, std::nullopt, std::nullopt};
  return {Criticality::Subcritical, std::nullopt, std::nullopt};
}

/// Middle of the witness half-circle of a supercritical family.
inline Direction unstable_semicircle_midpoint(const UpdateFamily& family) {
  const auto c = classify(family);
  if (c.kind != Criticality::Supercritical) throw NotSupercritical();
  return *c.witness;
}

/// Every rational middle of a free half-circle among the candidate
/// directions, in tie-break order. Used to retry certificate searches.
inline std::vector<Direction> unstable_semicircle_middles(const UpdateFamily& family) {
  std::vector<Direction> out;
  if (family.dimension() == 1) {
    for (Vec u : {Vec{1, 0}, Vec{-1, 0}})
      if (!is_stable(family, u)) out.emplace_back(u);
    return out;
  }
  const ArcSet s = stable_set_2d(family);
  auto cand = detail::midpoint_candidates(family);
  auto middles = detail::free_half_circle_middles(s, cand);
  // Mediants of angularly adjacent valid middles widen the sweep.
  std::vector<Vec> sorted = middles;
  std::sort(sorted.begin(), sorted.end(), geom::angle_less);
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
    if (cross(sorted[i], sorted[i + 1]) <= 0) continue;
    const Vec med = reduced(sorted[i] + sorted[i + 1]);
    if (std::find(middles.begin(), middles.end(), med) != middles.end()) continue;
    for (const auto& gap : s.gaps())
      if (detail::half_circle_fits(gap, med)) {
        middles.push_back(med);
        break;
      }
  }
  for (Vec m : middles) out.emplace_back(m);
  return out;
}

}  // namespace kcm
