#pragma once

// Harris graphical construction on a finite box: eagerly sampled labelled
// clock rings, trajectories driven by a shared log, and the exact generator
// of the chain on tiny boxes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "kcm/family.hpp"
#include "kcm/rng.hpp"

namespace kcm {

enum class Boundary { Torus, FrozenZero, FrozenOne };

/// A box {0..lx-1} x {0..ly-1} (ly = 1 in dimension 1). Sites are indexed
/// row-major: index = y * lx + x.
struct Geometry {
  int dimension = 1;
  std::int64_t lx = 1;
  std::int64_t ly = 1;
  Boundary boundary = Boundary::Torus;

  static Geometry line(std::int64_t length, Boundary b = Boundary::Torus) {
    Geometry g{1, length, 1, b};
    g.validate();
    return g;
  }
  static Geometry square(std::int64_t lx, std::int64_t ly, Boundary b = Boundary::Torus) {
    Geometry g{2, lx, ly, b};
    g.validate();
    return g;
  }

  void validate() const {
    if (dimension != 1 && dimension != 2) throw Error("geometry dimension must be 1 or 2");
    if (lx < 1 || ly < 1) throw Error("geometry side lengths must be positive");
    if (dimension == 1 && ly != 1) throw Error("one-dimensional geometry has ly = 1");
  }

  std::size_t size() const { return static_cast<std::size_t>(lx * ly); }
  Vec coords(std::size_t i) const {
    const auto s = static_cast<std::int64_t>(i);
    return {s % lx, s / lx};
  }
  bool in_box(Vec v) const { return v.x >= 0 && v.x < lx && v.y >= 0 && v.y < ly; }

  /// Index of a box site, without wrapping.
  std::optional<std::size_t> index_in_box(Vec v) const {
    if (!in_box(v)) return std::nullopt;
    return static_cast<std::size_t>(v.y * lx + v.x);
  }

  /// Index of a site of Z^d: wrapped on a torus, none outside the box for
  /// frozen boundaries.
  std::optional<std::size_t> index_of(Vec v) const {
    if (boundary == Boundary::Torus) {
      auto wrap = [](std::int64_t a, std::int64_t n) { return ((a % n) + n) % n; };
      v = {wrap(v.x, lx), wrap(v.y, ly)};
    }
    return index_in_box(v);
  }

  /// Value of the sites outside the box (frozen boundaries only).
  std::uint8_t frozen_value() const { return boundary == Boundary::FrozenOne ? 1 : 0; }
};

/// One clock ring: a 0-ring attempts to set the site to 0, a 1-ring to 1.
struct Ring {
  double time;
  std::uint8_t label;
};

/// All clock rings of every box site up to a horizon, plus the global
/// processing order (time, then site index).
class ClockLog {
 public:
  struct Event {
    double time;
    std::uint32_t site;
    std::uint32_t ring;
  };

  ClockLog(Geometry geometry, double horizon, double q, std::uint64_t seed, std::uint64_t replica,
           std::vector<std::vector<Ring>> rings)
      : geometry_(geometry), horizon_(horizon), q_(q), seed_(seed), replica_(replica), rings_(std::move(rings)) {
    if (rings_.size() != geometry_.size()) throw Error("clock log: one ring list per site required");
    std::size_t total = 0;
    for (const auto& rs : rings_) {
      for (std::size_t i = 0; i < rs.size(); ++i) {
        if (!(rs[i].time > 0.0 && rs[i].time <= horizon_)) throw Error("clock log: ring time outside (0, T]");
        if (i > 0 && !(rs[i - 1].time < rs[i].time)) throw Error("clock log: ring times must increase");
        if (rs[i].label > 1) throw Error("clock log: label must be 0 or 1");
      }
      total += rs.size();
    }
    order_.reserve(total);
    for (std::uint32_t s = 0; s < rings_.size(); ++s)
      for (std::uint32_t i = 0; i < rings_[s].size(); ++i) order_.push_back({rings_[s][i].time, s, i});
    std::sort(order_.begin(), order_.end(), [](const Event& a, const Event& b) {
      return a.time < b.time || (a.time == b.time && a.site < b.site);
    });
  }

  const Geometry& geometry() const { return geometry_; }
  double horizon() const { return horizon_; }
  double q() const { return q_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t replica() const { return replica_; }

  std::span<const Ring> rings(std::size_t site) const { return rings_.at(site); }
  const std::vector<Event>& order() const { return order_; }
  std::size_t total_rings() const { return order_.size(); }

  /// Rings of `site` with time in (lo, hi].
  std::span<const Ring> rings_in(std::size_t site, double lo, double hi) const {
    const auto& rs = rings_.at(site);
    auto first = std::upper_bound(rs.begin(), rs.end(), lo, [](double t, const Ring& r) { return t < r.time; });
    auto last = std::upper_bound(first, rs.end(), hi, [](double t, const Ring& r) { return t < r.time; });
    return {first, last};
  }

  /// Same log restricted to rings with time in (lo, hi].
  ClockLog censored(double lo, double hi) const {
    std::vector<std::vector<Ring>> kept(rings_.size());
    for (std::size_t s = 0; s < rings_.size(); ++s) {
      auto span = rings_in(s, lo, hi);
      kept[s].assign(span.begin(), span.end());
    }
    return ClockLog(geometry_, horizon_, q_, seed_, replica_, std::move(kept));
  }

 private:
  Geometry geometry_;
  double horizon_;
  double q_;
  std::uint64_t seed_;
  std::uint64_t replica_;
  std::vector<std::vector<Ring>> rings_;
  std::vector<Event> order_;
};

/// Per site, a rate-1 Poisson process on (0, T] whose rings are independently
/// labelled 0 with probability q: the superposition of the rate-q 0-clock and
/// rate-(1-q) 1-clock processes.
inline ClockLog sample_clock_log(const Geometry& geometry, double q, double horizon, std::uint64_t seed,
                                 std::uint64_t replica = 0) {
  geometry.validate();
  if (!(q >= 0.0 && q <= 1.0)) throw Error("clock rate q must lie in [0,1]");
  if (!(horizon >= 0.0)) throw Error("horizon must be nonnegative");
  std::vector<std::vector<Ring>> rings(geometry.size());
  for (std::size_t s = 0; s < geometry.size(); ++s) {
    CounterRng rng(seed, replica, s, StreamPurpose::Clock);
    double t = 0.0;
    for (;;) {
      t += rng.exponential();
      if (t > horizon) break;
      const std::uint8_t label = rng.uniform() < q ? 0 : 1;
      rings[s].push_back({t, label});
    }
  }
  return ClockLog(geometry, horizon, q, seed, replica, std::move(rings));
}

/// Spin configuration on the box.
struct SpinConfig {
  Geometry geometry;
  std::vector<std::uint8_t> values;

  static SpinConfig filled(const Geometry& g, std::uint8_t v) { return {g, std::vector<std::uint8_t>(g.size(), v)}; }
  std::uint8_t operator[](std::size_t i) const { return values[i]; }
  std::size_t zeros() const { return static_cast<std::size_t>(std::count(values.begin(), values.end(), 0)); }
  bool operator==(const SpinConfig& o) const { return values == o.values; }
};

/// Independent sites, each 0 with probability p0.
inline SpinConfig sample_bernoulli_config(const Geometry& geometry, double p0, std::uint64_t seed,
                                          std::uint64_t replica = 0,
                                          StreamPurpose purpose = StreamPurpose::InitialA) {
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw Error("zero probability must lie in [0,1]");
  SpinConfig c{geometry, std::vector<std::uint8_t>(geometry.size())};
  for (std::size_t s = 0; s < geometry.size(); ++s) {
    CounterRng rng(seed, replica, s, purpose);
    c.values[s] = rng.uniform() < p0 ? 0 : 1;
  }
  return c;
}

/// A ring at which the constraint held: the site was set to `value`.
struct Update {
  double time;
  std::uint8_t value;
};

class Trajectory;

/// Constraint lookup tables for one (family, geometry) pair.
class Dynamics {
 public:
  Dynamics(UpdateFamily family, Geometry geometry)
      : family_(std::make_shared<const UpdateFamily>(std::move(family))), geometry_(geometry) {
    geometry_.validate();
    if (family_->dimension() != geometry_.dimension) throw Error("family and geometry dimensions differ");
    rule_begin_.push_back(0);
    for (std::size_t s = 0; s < geometry_.size(); ++s) {
      const Vec x = geometry_.coords(s);
      for (const auto& rule : family_->rules()) {
        std::vector<std::uint32_t> idx;
        bool possible = true;
        for (const Vec& v : rule) {
          auto i = geometry_.index_of(x + v);
          if (i) {
            idx.push_back(static_cast<std::uint32_t>(*i));
          } else if (geometry_.frozen_value() == 1) {
            possible = false;
            break;
          }
        }
        if (!possible) continue;
        elem_begin_.push_back(static_cast<std::uint32_t>(elems_.size()));
        elems_.insert(elems_.end(), idx.begin(), idx.end());
      }
      rule_begin_.push_back(static_cast<std::uint32_t>(elem_begin_.size()));
    }
    elem_begin_.push_back(static_cast<std::uint32_t>(elems_.size()));
  }

  const UpdateFamily& family() const { return *family_; }
  std::shared_ptr<const UpdateFamily> family_ptr() const { return family_; }
  const Geometry& geometry() const { return geometry_; }

  /// Some rule translate at `site` is entirely at zero in `eta`.
  bool constraint(std::size_t site, std::span<const std::uint8_t> eta) const {
    for (auto r = rule_begin_[site]; r < rule_begin_[site + 1]; ++r) {
      bool all_zero = true;
      for (auto e = elem_begin_[r]; e < elem_begin_[r + 1]; ++e)
        if (eta[elems_[e]] != 0) {
          all_zero = false;
          break;
        }
      if (all_zero) return true;
    }
    return false;
  }

  /// Rule translates at `site` as box indices (frozen-zero elements dropped,
  /// rules meeting a frozen-one site omitted).
  std::vector<std::vector<std::uint32_t>> rules_at(std::size_t site) const {
    std::vector<std::vector<std::uint32_t>> out;
    for (auto r = rule_begin_[site]; r < rule_begin_[site + 1]; ++r)
      out.emplace_back(elems_.begin() + elem_begin_[r], elems_.begin() + elem_begin_[r + 1]);
    return out;
  }

  Trajectory evolve(const SpinConfig& initial, std::shared_ptr<const ClockLog> log) const;

 private:
  std::shared_ptr<const UpdateFamily> family_;
  Geometry geometry_;
  std::vector<std::uint32_t> rule_begin_;  // per site, into elem_begin_
  std::vector<std::uint32_t> elem_begin_;  // per rule translate, into elems_
  std::vector<std::uint32_t> elems_;
};

/// The KCM path determined by an initial configuration and a clock log.
class Trajectory {
 public:
  Trajectory(std::shared_ptr<const UpdateFamily> family, SpinConfig initial, std::shared_ptr<const ClockLog> log,
             std::vector<std::vector<Update>> accepted)
      : family_(std::move(family)), initial_(std::move(initial)), log_(std::move(log)), accepted_(std::move(accepted)) {}

  const Geometry& geometry() const { return log_->geometry(); }
  const UpdateFamily& family() const { return *family_; }
  const SpinConfig& initial() const { return initial_; }
  const ClockLog& log() const { return *log_; }
  std::shared_ptr<const ClockLog> log_ptr() const { return log_; }
  double horizon() const { return log_->horizon(); }
  std::span<const Update> accepted(std::size_t site) const { return accepted_.at(site); }

  /// eta_t(site), right-continuous: a flip at exactly t is included.
  std::uint8_t value_at(std::size_t site, double t) const {
    check_time(t);
    const auto& u = accepted_[site];
    auto it = std::upper_bound(u.begin(), u.end(), t, [](double s, const Update& a) { return s < a.time; });
    return it == u.begin() ? initial_.values[site] : std::prev(it)->value;
  }

  /// Left limit eta_{t-}(site).
  std::uint8_t value_before(std::size_t site, double t) const {
    check_time(t);
    const auto& u = accepted_[site];
    auto it = std::lower_bound(u.begin(), u.end(), t, [](const Update& a, double s) { return a.time < s; });
    return it == u.begin() ? initial_.values[site] : std::prev(it)->value;
  }

  /// Value at a site of Z^d, using the boundary convention outside the box.
  std::uint8_t value_at(Vec x, double t) const {
    if (auto i = geometry().index_of(x)) return value_at(*i, t);
    check_time(t);
    return geometry().frozen_value();
  }
  std::uint8_t value_before(Vec x, double t) const {
    if (auto i = geometry().index_of(x)) return value_before(*i, t);
    check_time(t);
    return geometry().frozen_value();
  }

  SpinConfig config_at(double t) const {
    SpinConfig c{geometry(), std::vector<std::uint8_t>(geometry().size())};
    for (std::size_t s = 0; s < c.values.size(); ++s) c.values[s] = value_at(s, t);
    return c;
  }

 private:
  void check_time(double t) const {
    if (!(t >= 0.0 && t <= log_->horizon())) throw Error("time outside [0, horizon]");
  }

  std::shared_ptr<const UpdateFamily> family_;
  SpinConfig initial_;
  std::shared_ptr<const ClockLog> log_;
  std::vector<std::vector<Update>> accepted_;
};

inline Trajectory Dynamics::evolve(const SpinConfig& initial, std::shared_ptr<const ClockLog> log) const {
  if (initial.values.size() != geometry_.size() || log->geometry().size() != geometry_.size())
    throw Error("evolve: configuration, log and geometry sizes differ");
  std::vector<std::uint8_t> eta = initial.values;
  std::vector<std::vector<Update>> accepted(geometry_.size());
  for (const auto& ev : log->order()) {
    if (!constraint(ev.site, eta)) continue;
    const std::uint8_t v = log->rings(ev.site)[ev.ring].label;
    eta[ev.site] = v;
    accepted[ev.site].push_back({ev.time, v});
  }
  return Trajectory(family_, initial, std::move(log), std::move(accepted));
}

inline Trajectory evolve(const UpdateFamily& family, const Geometry& geometry, const SpinConfig& initial,
                         std::shared_ptr<const ClockLog> log) {
  return Dynamics(family, geometry).evolve(initial, std::move(log));
}

inline std::uint8_t state_at(const Trajectory& traj, Vec x, double t) { return traj.value_at(x, t); }

/// Two trajectories driven by the same clock rings.
struct CoupledTrajectory {
  Trajectory a;
  Trajectory b;
  double q_prime = 0.0;
  double q = 0.0;

  bool disagree(Vec x, double t) const { return a.value_at(x, t) != b.value_at(x, t); }
  bool both_zero(Vec x, double t) const { return a.value_at(x, t) == 0 && b.value_at(x, t) == 0; }
};

inline CoupledTrajectory evolve_coupled(const Dynamics& dyn, const SpinConfig& init_a, const SpinConfig& init_b,
                                        std::shared_ptr<const ClockLog> log, double q_prime = 0.0) {
  const double q = log->q();
  return {dyn.evolve(init_a, log), dyn.evolve(init_b, log), q_prime, q};
}

inline CoupledTrajectory evolve_coupled(const UpdateFamily& family, const Geometry& geometry,
                                        const SpinConfig& init_a, const SpinConfig& init_b,
                                        std::shared_ptr<const ClockLog> log, double q_prime = 0.0) {
  return evolve_coupled(Dynamics(family, geometry), init_a, init_b, std::move(log), q_prime);
}

/// Independent legality audit of a trajectory, using only point queries:
/// a ring is accepted iff some rule translate is at zero just before it, and
/// accepted rings set the site to their label. Returns the number of
/// violations found.
inline std::size_t count_illegal_updates(const Trajectory& traj) {
  const auto& g = traj.geometry();
  std::size_t bad = 0;
  for (std::size_t s = 0; s < g.size(); ++s) {
    const Vec x = g.coords(s);
    auto acc = traj.accepted(s);
    std::size_t next = 0;
    for (const Ring& r : traj.log().rings(s)) {
      bool satisfied = false;
      for (const auto& rule : traj.family().rules()) {
        satisfied = std::all_of(rule.begin(), rule.end(),
                                [&](Vec v) { return traj.value_before(x + v, r.time) == 0; });
        if (satisfied) break;
      }
      const bool was_accepted = next < acc.size() && acc[next].time == r.time;
      if (was_accepted) {
        if (acc[next].value != r.label || traj.value_at(s, r.time) != r.label) ++bad;
        ++next;
      }
      if (satisfied != was_accepted) ++bad;
    }
    if (next != acc.size()) ++bad;
  }
  return bad;
}

/// Sparse rate matrix over the configurations of a small box; state index
/// bit i is the value of site i.
struct RateMatrix {
  std::size_t sites = 0;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> off_diagonal;
  std::vector<double> diagonal;

  std::size_t dimension() const { return diagonal.size(); }
  double at(std::size_t i, std::size_t j) const {
    if (i == j) return diagonal[i];
    for (const auto& [k, r] : off_diagonal[i])
      if (k == j) return r;
    return 0.0;
  }
};

inline constexpr std::size_t kMaxGeneratorSites = 16;

inline RateMatrix build_generator(const UpdateFamily& family, const Geometry& geometry, double q) {
  if (geometry.size() > kMaxGeneratorSites) throw Error("generator: at most 16 sites");
  if (!(q >= 0.0 && q <= 1.0)) throw Error("generator: q must lie in [0,1]");
  const Dynamics dyn(family, geometry);
  const std::size_t n = geometry.size();
  const std::size_t dim = std::size_t{1} << n;
  RateMatrix m{n, std::vector<std::vector<std::pair<std::uint32_t, double>>>(dim), std::vector<double>(dim, 0.0)};
  std::vector<std::uint8_t> eta(n);
  for (std::size_t state = 0; state < dim; ++state) {
    for (std::size_t i = 0; i < n; ++i) eta[i] = (state >> i) & 1u;
    double out = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
      if (!dyn.constraint(x, eta)) continue;
      const double rate = eta[x] == 1 ? q : 1.0 - q;  // rate of flipping to the other value
      if (rate == 0.0) continue;
      m.off_diagonal[state].push_back({static_cast<std::uint32_t>(state ^ (std::size_t{1} << x)), rate});
      out += rate;
    }
    m.diagonal[state] = -out;
  }
  return m;
}

/// max |nu_q(a) Q(a,b) - nu_q(b) Q(b,a)| over state pairs, with nu_q the
/// product measure giving weight q to 0 and 1-q to 1.
inline double check_detailed_balance(const RateMatrix& m, double q) {
  auto weight = [&](std::size_t state) {
    double w = 1.0;
    for (std::size_t i = 0; i < m.sites; ++i) w *= ((state >> i) & 1u) ? 1.0 - q : q;
    return w;
  };
  double worst = 0.0;
  for (std::size_t a = 0; a < m.dimension(); ++a)
    for (const auto& [b, rate] : m.off_diagonal[a]) {
      const double v = std::abs(weight(a) * rate - weight(b) * m.at(b, a));
      worst = std::max(worst, v);
    }
  return worst;
}

}  // namespace kcm
