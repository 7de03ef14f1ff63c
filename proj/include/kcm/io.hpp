#pragma once

// JSON and CSV encodings, clock-log export and the binary log cache.

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kcm/auxperc.hpp"
#include "kcm/bootstrap.hpp"
#include "kcm/dual.hpp"
#include "kcm/family.hpp"
#include "kcm/harris.hpp"
#include "kcm/lab.hpp"

namespace kcm {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline json to_json(Vec v, int dimension = 2) { return dimension == 1 ? json::array({v.x}) : json::array({v.x, v.y}); }

inline Vec vec_from_json(const json& j, int dimension) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(dimension))
    throw Error("expected a site with " + std::to_string(dimension) + " coordinates, got " + j.dump());
  return {j[0].get<std::int64_t>(), dimension == 2 ? j[1].get<std::int64_t>() : 0};
}

// ---- family

inline json to_json(const UpdateFamily& f) {
  json rules = json::array();
  for (const auto& r : f.rules()) {
    json rule = json::array();
    for (const Vec& v : r) rule.push_back(to_json(v, f.dimension()));
    rules.push_back(rule);
  }
  return {{"dimension", f.dimension()}, {"rules", rules}};
}

inline UpdateFamily family_from_json(const json& j) {
  if (j.is_string()) {
    if (auto f = families::by_name(j.get<std::string>())) return *f;
    throw Error("unknown family name " + j.get<std::string>());
  }
  const int d = j.at("dimension").get<int>();
  std::vector<UpdateFamily::Rule> rules;
  for (const auto& r : j.at("rules")) {
    UpdateFamily::Rule rule;
    for (const auto& v : r) rule.push_back(vec_from_json(v, d));
    rules.push_back(std::move(rule));
  }
  return UpdateFamily(d, std::move(rules));
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

/// A built-in family name, or a path to a family JSON file.
inline UpdateFamily load_family(const std::string& name_or_path) {
  if (auto f = families::by_name(name_or_path)) return *f;
  return family_from_json(read_json_file(name_or_path));
}

inline json to_json(const ArcSet& s) {
  json arcs = json::array();
  for (const Arc& a : s.arcs) arcs.push_back({{"start", to_json(a.start)}, {"end", to_json(a.end)}});
  return {{"full", s.full}, {"empty", s.empty()}, {"arcs", arcs}};
}

inline json to_json(const Classification& c) {
  json j{{"class", to_string(c.kind)}};
  if (c.witness) j["witness"] = to_json(c.witness->normal());
  if (c.witness_arc) j["witness_arc"] = {to_json(c.witness_arc->first), to_json(c.witness_arc->second)};
  return j;
}

// ---- geometry and certificate

inline std::string to_string(Boundary b) {
  switch (b) {
    case Boundary::Torus: return "torus";
    case Boundary::FrozenZero: return "frozen-zero";
    case Boundary::FrozenOne: return "frozen-one";
  }
  return "?";
}

inline Boundary boundary_from_string(const std::string& s) {
  if (s == "torus") return Boundary::Torus;
  if (s == "frozen-zero") return Boundary::FrozenZero;
  if (s == "frozen-one") return Boundary::FrozenOne;
  throw Error("unknown boundary " + s);
}

inline json to_json(const Geometry& g) {
  json size = g.dimension == 1 ? json::array({g.lx}) : json::array({g.lx, g.ly});
  return {{"dimension", g.dimension}, {"size", size}, {"boundary", to_string(g.boundary)}};
}

inline Geometry geometry_from_json(const json& j) {
  Geometry g;
  g.dimension = j.at("dimension").get<int>();
  const auto& size = j.at("size");
  g.lx = size.at(0).get<std::int64_t>();
  g.ly = g.dimension == 2 ? size.at(1).get<std::int64_t>() : 1;
  g.boundary = boundary_from_string(j.value("boundary", std::string("torus")));
  g.validate();
  return g;
}

inline json to_json(const SpreadCertificate& c) {
  json rect = json::array(), seq = json::array();
  for (const Vec& v : c.rectangle) rect.push_back(to_json(v, c.dimension));
  for (const Vec& v : c.sequence) seq.push_back(to_json(v, c.dimension));
  json j{{"dimension", c.dimension},
         {"u", to_json(c.u.normal(), c.dimension)},
         {"a1", c.a1_steps},
         {"a1_offset", to_json(c.a1_offset, c.dimension)},
         {"rectangle", rect},
         {"sequence", seq}};
  if (c.dimension == 2) j["a2"] = c.a2;
  return j;
}

inline json to_json(const InfectionState& s, int dimension) {
  json sites = json::array();
  for (const auto& [v, r] : s.rounds) sites.push_back({{"site", to_json(v, dimension)}, {"round", r}});
  return {{"infected", sites}, {"count", s.rounds.size()}};
}

// ---- dual

inline json to_json(const DualPath& p, int dimension) {
  json pts = json::array();
  pts.push_back({{"s", 0.0}, {"site", to_json(p.start, dimension)}});
  for (const auto& j : p.jumps) pts.push_back({{"s", p.t - j.ring_time}, {"site", to_json(j.site, dimension)}});
  return {{"t", p.t}, {"length", p.length}, {"path", pts}};
}

// ---- estimates, fits, series

inline json to_json(const BoundEstimate& e) {
  return {{"quantity", e.quantity},
          {"hits", e.hits},
          {"replicas", e.replicas},
          {"estimate", e.estimate},
          {"ci_low", e.ci.low},
          {"ci_high", e.ci.high},
          {"paper_bound", e.stated_bound ? json(*e.stated_bound) : json(nullptr)},
          {"verdict", e.verdict}};
}

inline json to_json(const DecayFit& f) {
  json j{{"schema", kSchemaVersion},
         {"below_floor", f.below_floor},
         {"window", {f.window_start, f.window_end}},
         {"dropped_times", f.dropped_times}};
  if (!f.below_floor) {
    j["c"] = f.c;
    j["C"] = f.C;
    j["r_squared"] = f.r_squared;
    j["slope"] = f.slope;
    j["slope_stderr"] = f.slope_stderr;
    j["rate_ci"] = {f.rate_ci.low, f.rate_ci.high};
    j["points_used"] = f.points_used;
  }
  return j;
}

inline std::string series_csv(const Series& s) {
  std::string out = "t,estimate,ci_low,ci_high,n_replicas\n";
  for (const auto& p : s.points)
    out += format_double(p.t) + "," + format_double(p.estimate) + "," + format_double(p.ci.low) + "," +
           format_double(p.ci.high) + "," + std::to_string(s.replicas) + "\n";
  return out;
}

inline std::string theorem_csv(const std::vector<TheoremPoint>& pts, std::uint64_t replicas) {
  std::string out = "t,estimate,ci_low,ci_high,n_replicas\n";
  for (const auto& p : pts)
    out += format_double(p.t) + "," + format_double(p.difference) + "," + format_double(p.ci.low) + "," +
           format_double(p.ci.high) + "," + std::to_string(replicas) + "\n";
  return out;
}

inline json to_json(const StationarityReport& r) {
  json pts = json::array();
  for (const auto& p : r.points)
    pts.push_back({{"t", p.t}, {"density", p.density}, {"std_error", p.std_error}, {"pass", p.pass}});
  return {{"schema", kSchemaVersion}, {"q", r.q}, {"trials_per_time", r.trials_per_time}, {"pass", r.pass},
          {"points", pts}};
}

// ---- experiment configuration

inline ExperimentConfig config_from_json(const json& j, const std::string& base_dir = ".") {
  ExperimentConfig c;
  const auto& fam = j.at("family");
  if (fam.is_string()) {
    const std::string s = fam.get<std::string>();
    c.family_name = s;
    if (auto f = families::by_name(s))
      c.family = *f;
    else
      c.family = family_from_json(read_json_file(s.front() == '/' ? s : base_dir + "/" + s));
  } else {
    c.family = family_from_json(fam);
    c.family_name = "inline";
  }
  c.geometry = geometry_from_json(j.at("geometry"));
  c.q = j.at("q").get<double>();
  c.q_prime = j.value("q_prime", c.q);
  c.times = j.at("times").get<std::vector<double>>();
  c.horizon = j.value("horizon", c.times.empty() ? 0.0 : *std::max_element(c.times.begin(), c.times.end()));
  if (j.contains("sites")) {
    c.sites.clear();
    if (j["sites"] == "all") {
      for (std::size_t i = 0; i < c.geometry.size(); ++i) c.sites.push_back(c.geometry.coords(i));
    } else {
      for (const auto& s : j["sites"]) c.sites.push_back(vec_from_json(s, c.geometry.dimension));
    }
  }
  c.K = j.value("K", c.K);
  c.N = j.value("N", static_cast<std::int64_t>(4 * c.family.range() + 4));
  c.replicas = j.at("replicas").get<std::uint64_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.output = j.value("output", std::string());
  c.couple_initial = j.value("couple_initial", false);
  c.validate();
  return c;
}

inline LocalFunction local_function_from_json(const json& j, int dimension) {
  LocalFunction f;
  for (const auto& s : j.at("support")) f.support.push_back(vec_from_json(s, dimension));
  f.table = j.at("table").get<std::vector<double>>();
  f.validate();
  return f;
}

// ---- clock logs

/// One record per ring, in processing order: {site, time, label, accepted}.
/// `accepted` is present only when a trajectory is given.
inline void write_log_ndjson(std::ostream& out, const ClockLog& log, const Trajectory* traj = nullptr) {
  std::vector<std::size_t> next(traj ? log.geometry().size() : 0, 0);
  for (const auto& ev : log.order()) {
    const Ring& r = log.rings(ev.site)[ev.ring];
    json rec{{"site", to_json(log.geometry().coords(ev.site), log.geometry().dimension)},
             {"time", r.time},
             {"label", r.label}};
    if (traj) {
      auto acc = traj->accepted(ev.site);
      bool accepted = next[ev.site] < acc.size() && acc[next[ev.site]].time == r.time;
      if (accepted) ++next[ev.site];
      rec["accepted"] = accepted;
    }
    out << rec.dump() << '\n';
  }
}

namespace detail {

inline constexpr char kLogMagic[8] = {'K', 'C', 'M', 'L', 'O', 'G', '\0', '\0'};
inline constexpr std::uint32_t kLogVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw Error("binary log: truncated input");
  return v;
}

}  // namespace detail

/// Versioned little-endian dump of a clock log.
inline void save_log_binary(std::ostream& out, const ClockLog& log) {
  out.write(detail::kLogMagic, sizeof detail::kLogMagic);
  detail::put<std::uint32_t>(out, detail::kLogVersion);
  const auto& g = log.geometry();
  detail::put<std::int32_t>(out, g.dimension);
  detail::put<std::int64_t>(out, g.lx);
  detail::put<std::int64_t>(out, g.ly);
  detail::put<std::int32_t>(out, static_cast<std::int32_t>(g.boundary));
  detail::put<double>(out, log.horizon());
  detail::put<double>(out, log.q());
  detail::put<std::uint64_t>(out, log.seed());
  detail::put<std::uint64_t>(out, log.replica());
  for (std::size_t s = 0; s < g.size(); ++s) {
    auto rs = log.rings(s);
    detail::put<std::uint64_t>(out, rs.size());
    for (const Ring& r : rs) {
      detail::put<double>(out, r.time);
      detail::put<std::uint8_t>(out, r.label);
    }
  }
}

inline ClockLog load_log_binary(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, detail::kLogMagic, sizeof magic) != 0) throw Error("binary log: bad magic");
  const auto version = detail::get<std::uint32_t>(in);
  if (version != detail::kLogVersion) throw Error("binary log: unsupported version " + std::to_string(version));
  Geometry g;
  g.dimension = detail::get<std::int32_t>(in);
  g.lx = detail::get<std::int64_t>(in);
  g.ly = detail::get<std::int64_t>(in);
  const auto b = detail::get<std::int32_t>(in);
  if (b < 0 || b > 2) throw Error("binary log: bad boundary code");
  g.boundary = static_cast<Boundary>(b);
  g.validate();
  const double horizon = detail::get<double>(in);
  const double q = detail::get<double>(in);
  const auto seed = detail::get<std::uint64_t>(in);
  const auto replica = detail::get<std::uint64_t>(in);
  std::vector<std::vector<Ring>> rings(g.size());
  for (auto& rs : rings) {
    const auto n = detail::get<std::uint64_t>(in);
    rs.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      const double t = detail::get<double>(in);
      const auto label = detail::get<std::uint8_t>(in);
      rs.push_back({t, label});
    }
  }
  return ClockLog(g, horizon, q, seed, replica, std::move(rings));
}

}  // namespace kcm
