#pragma once

// Monte Carlo experiments on coupled and single trajectories: disagreement
// series, decay fits, local-function relaxation and stationarity.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "kcm/harris.hpp"
#include "kcm/parallel.hpp"
#include "kcm/stats.hpp"

namespace kcm {

struct ExperimentConfig {
  std::string family_name;
  UpdateFamily family = families::fa1f();
  Geometry geometry = Geometry::line(64);
  double q = 0.9;
  double q_prime = 0.5;
  double horizon = 10.0;
  std::vector<Vec> sites{Vec{0, 0}};
  std::vector<double> times{0.0};
  double K = 2.0;
  std::int64_t N = 8;
  std::uint64_t replicas = 100;
  std::uint64_t seed = 1;
  std::string output;
  /// Both initial configurations read the same uniforms (monotone coupling).
  bool couple_initial = false;

  void validate() const {
    geometry.validate();
    if (family.dimension() != geometry.dimension) throw Error("config: family and geometry dimensions differ");
    if (!(q >= 0.0 && q <= 1.0) || !(q_prime >= 0.0 && q_prime <= 1.0)) throw Error("config: q, q' must lie in [0,1]");
    if (!(horizon > 0.0)) throw Error("config: horizon must be positive");
    if (replicas < 1) throw Error("config: at least one replica");
    if (sites.empty() || times.empty()) throw Error("config: need observation sites and times");
    for (double t : times)
      if (!(t >= 0.0 && t <= horizon)) throw Error("config: observation time outside [0, horizon]");
    for (const Vec& s : sites)
      if (!geometry.index_of(s)) throw Error("config: observation site " + to_string(s) + " outside the box");
  }
};

struct SeriesPoint {
  double t = 0.0;
  std::uint64_t hits = 0;
  std::uint64_t trials = 0;
  double estimate = 0.0;
  Interval ci;
};

struct Series {
  std::vector<SeriesPoint> points;
  std::uint64_t replicas = 0;
};

namespace detail {

inline std::pair<SpinConfig, SpinConfig> initial_pair(const ExperimentConfig& c, std::uint64_t rep) {
  SpinConfig a = sample_bernoulli_config(c.geometry, c.q_prime, c.seed, rep, StreamPurpose::InitialA);
  SpinConfig b = sample_bernoulli_config(c.geometry, c.q, c.seed, rep,
                                         c.couple_initial ? StreamPurpose::InitialA : StreamPurpose::InitialB);
  return {std::move(a), std::move(b)};
}

}  // namespace detail

/// Frequency of eta_t(x) != eta~_t(x) over replicas (and observation sites)
/// at each observation time, with Wilson intervals. Site counts from one
/// replica are pooled, so with several sites the interval is nominal.
inline Series run_disagreement_experiment(const ExperimentConfig& c) {
  c.validate();
  const Dynamics dyn(c.family, c.geometry);
  std::vector<std::size_t> idx;
  for (const Vec& s : c.sites) idx.push_back(*c.geometry.index_of(s));
  const double horizon = *std::max_element(c.times.begin(), c.times.end());

  auto counts = run_replicas(c.replicas, [&](std::uint64_t rep) {
    auto log = std::make_shared<const ClockLog>(sample_clock_log(c.geometry, c.q, horizon, c.seed, rep));
    auto [a, b] = detail::initial_pair(c, rep);
    const CoupledTrajectory ct = evolve_coupled(dyn, a, b, log, c.q_prime);
    std::vector<std::uint32_t> per_time(c.times.size(), 0);
    for (std::size_t j = 0; j < c.times.size(); ++j)
      for (std::size_t s : idx) per_time[j] += ct.a.value_at(s, c.times[j]) != ct.b.value_at(s, c.times[j]);
    return per_time;
  });

  Series out;
  out.replicas = c.replicas;
  for (std::size_t j = 0; j < c.times.size(); ++j) {
    SeriesPoint p;
    p.t = c.times[j];
    for (const auto& v : counts) p.hits += v[j];
    p.trials = c.replicas * idx.size();
    p.estimate = static_cast<double>(p.hits) / static_cast<double>(p.trials);
    p.ci = wilson_interval(p.hits, p.trials);
    out.points.push_back(p);
  }
  return out;
}

/// Least-squares fit of log p = log C - c t.
struct DecayFit {
  double c = 0.0;
  double C = 0.0;
  double r_squared = 0.0;
  double slope = 0.0;
  double slope_stderr = 0.0;
  /// 95% interval for the rate -slope.
  Interval rate_ci{0.0, 0.0};
  double window_start = 0.0;
  double window_end = 0.0;
  std::size_t points_used = 0;
  std::vector<double> dropped_times;
  /// More than half the window had zero estimates: no fit was attempted.
  bool below_floor = false;
};

inline DecayFit fit_exponential(const std::vector<std::pair<double, double>>& series) {
  DecayFit f;
  std::vector<std::pair<double, double>> pts;
  for (const auto& [t, p] : series) {
    if (p > 0.0)
      pts.push_back({t, std::log(p)});
    else
      f.dropped_times.push_back(t);
  }
  if (!series.empty()) {
    f.window_start = series.front().first;
    f.window_end = series.back().first;
  }
  if (2 * f.dropped_times.size() > series.size()) {
    f.below_floor = true;
    return f;
  }
  if (pts.size() < 3) throw Error("exponential fit: need at least 3 positive points");

  const double n = static_cast<double>(pts.size());
  double mt = 0.0, my = 0.0;
  for (const auto& [t, y] : pts) {
    mt += t / n;
    my += y / n;
  }
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (const auto& [t, y] : pts) {
    stt += (t - mt) * (t - mt);
    sty += (t - mt) * (y - my);
    syy += (y - my) * (y - my);
  }
  if (stt == 0.0) throw Error("exponential fit: all times equal");
  const double slope = sty / stt;
  const double intercept = my - slope * mt;
  double sse = 0.0;
  for (const auto& [t, y] : pts) {
    const double r = y - (intercept + slope * t);
    sse += r * r;
  }
  f.slope = slope;
  f.c = std::max(0.0, -slope);
  f.C = std::exp(intercept);
  f.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  f.points_used = pts.size();
  f.slope_stderr = pts.size() > 2 ? std::sqrt(sse / (n - 2.0) / stt) : 0.0;
  const boost::math::students_t dist(n - 2.0);
  const double tq = boost::math::quantile(boost::math::complement(dist, 0.025));
  f.rate_ci = {-slope - tq * f.slope_stderr, -slope + tq * f.slope_stderr};
  return f;
}

inline DecayFit fit_exponential(const Series& s) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : s.points) pts.push_back({p.t, p.estimate});
  return fit_exponential(pts);
}

/// A function of the spins on `support`: value table[b] where bit i of b is
/// the spin at support[i].
struct LocalFunction {
  std::vector<Vec> support;
  std::vector<double> table;

  void validate() const {
    if (support.size() > 16) throw Error("local function: support larger than 16 sites");
    if (table.size() != (std::size_t{1} << support.size())) throw Error("local function: table needs 2^|S| entries");
  }
  std::size_t pattern(const Trajectory& traj, double t) const {
    std::size_t b = 0;
    for (std::size_t i = 0; i < support.size(); ++i) b |= std::size_t{traj.value_at(support[i], t)} << i;
    return b;
  }
  /// Weight of each pattern under the product measure with P(0) = q.
  std::vector<double> product_weights(double q) const {
    std::vector<double> w(table.size(), 1.0);
    for (std::size_t b = 0; b < w.size(); ++b)
      for (std::size_t i = 0; i < support.size(); ++i) w[b] *= ((b >> i) & 1u) ? 1.0 - q : q;
    return w;
  }
};

struct TheoremPoint {
  double t = 0.0;
  double difference = 0.0;
  double std_error = 0.0;
  Interval ci;
};

/// |E f(eta_t) - nu_q(f)| with eta_0 ~ nu_{q'}, from pattern frequencies.
/// Written as a sum of (frequency - weight)(f(pattern) - f(pattern 0)), so a
/// constant f gives exactly zero.
inline std::vector<TheoremPoint> run_theorem_experiment(const ExperimentConfig& c, const LocalFunction& f) {
  c.validate();
  f.validate();
  const Dynamics dyn(c.family, c.geometry);
  const double horizon = *std::max_element(c.times.begin(), c.times.end());
  auto patterns = run_replicas(c.replicas, [&](std::uint64_t rep) {
    auto log = std::make_shared<const ClockLog>(sample_clock_log(c.geometry, c.q, horizon, c.seed, rep));
    const Trajectory traj =
        dyn.evolve(sample_bernoulli_config(c.geometry, c.q_prime, c.seed, rep, StreamPurpose::InitialA), log);
    std::vector<std::uint32_t> per_time;
    for (double t : c.times) per_time.push_back(static_cast<std::uint32_t>(f.pattern(traj, t)));
    return per_time;
  });

  const auto weights = f.product_weights(c.q);
  std::vector<TheoremPoint> out;
  for (std::size_t j = 0; j < c.times.size(); ++j) {
    std::vector<std::uint64_t> freq(f.table.size(), 0);
    Moments m;
    for (const auto& p : patterns) {
      ++freq[p[j]];
      m.add(f.table[p[j]]);
    }
    double d = 0.0;
    for (std::size_t b = 0; b < freq.size(); ++b)
      d += (static_cast<double>(freq[b]) / static_cast<double>(c.replicas) - weights[b]) * (f.table[b] - f.table[0]);
    TheoremPoint pt;
    pt.t = c.times[j];
    pt.difference = std::abs(d);
    pt.std_error = m.std_error();
    pt.ci = {std::max(0.0, pt.difference - kZ95 * pt.std_error), pt.difference + kZ95 * pt.std_error};
    out.push_back(pt);
  }
  return out;
}

struct StationarityPoint {
  double t = 0.0;
  double density = 0.0;
  double std_error = 0.0;
  bool pass = false;
};

struct StationarityReport {
  std::vector<StationarityPoint> points;
  double q = 0.0;
  std::uint64_t trials_per_time = 0;
  bool pass = true;
};

/// Starting from nu_q, the zero density at the observation sites must stay
/// within 4 standard errors sqrt(q(1-q)/n) of q at every time.
inline StationarityReport run_stationarity_check(const ExperimentConfig& c) {
  c.validate();
  const Dynamics dyn(c.family, c.geometry);
  std::vector<std::size_t> idx;
  for (const Vec& s : c.sites) idx.push_back(*c.geometry.index_of(s));
  const double horizon = *std::max_element(c.times.begin(), c.times.end());
  auto zeros = run_replicas(c.replicas, [&](std::uint64_t rep) {
    auto log = std::make_shared<const ClockLog>(sample_clock_log(c.geometry, c.q, horizon, c.seed, rep));
    const Trajectory traj =
        dyn.evolve(sample_bernoulli_config(c.geometry, c.q, c.seed, rep, StreamPurpose::InitialA), log);
    std::vector<std::uint32_t> per_time(c.times.size(), 0);
    for (std::size_t j = 0; j < c.times.size(); ++j)
      for (std::size_t s : idx) per_time[j] += traj.value_at(s, c.times[j]) == 0;
    return per_time;
  });

  StationarityReport r;
  r.q = c.q;
  r.trials_per_time = c.replicas * idx.size();
  const double n = static_cast<double>(r.trials_per_time);
  for (std::size_t j = 0; j < c.times.size(); ++j) {
    std::uint64_t z = 0;
    for (const auto& v : zeros) z += v[j];
    StationarityPoint p;
    p.t = c.times[j];
    p.density = static_cast<double>(z) / n;
    p.std_error = std::sqrt(c.q * (1.0 - c.q) / n);
    p.pass = std::abs(p.density - c.q) <= 4.0 * p.std_error;
    r.pass = r.pass && p.pass;
    r.points.push_back(p);
  }
  return r;
}

}  // namespace kcm
