#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "kcm/kcm.hpp"

using namespace kcm;

namespace {

// Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 bad input.
constexpr int kFailed = 1;
constexpr int kBadInput = 2;

struct GeometryArgs {
  std::string size = "64";
  std::string boundary = "torus";
};

void add_geometry(CLI::App* cmd, GeometryArgs& g) {
  cmd->add_option("--size", g.size, "L, or WxH in two dimensions")->capture_default_str();
  cmd->add_option("--boundary", g.boundary, "torus | frozen-zero | frozen-one")->capture_default_str();
}

Geometry make_geometry(const GeometryArgs& a, int dimension) {
  const auto x = a.size.find('x');
  const Boundary b = boundary_from_string(a.boundary);
  if (dimension == 1) {
    if (x != std::string::npos) throw Error("one-dimensional family needs --size L");
    return Geometry::line(std::stoll(a.size), b);
  }
  if (x == std::string::npos) return Geometry::square(std::stoll(a.size), std::stoll(a.size), b);
  return Geometry::square(std::stoll(a.size.substr(0, x)), std::stoll(a.size.substr(x + 1)), b);
}

Vec parse_site(const std::string& s) {
  const auto c = s.find(',');
  if (c == std::string::npos) return {std::stoll(s), 0};
  return {std::stoll(s.substr(0, c)), std::stoll(s.substr(c + 1))};
}

void emit(const json& j) { std::cout << j.dump(2) << '\n'; }

void emit_text(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

std::string dir_of(const std::string& path) {
  const auto slash = path.find_last_of('/');
  return slash == std::string::npos ? "." : path.substr(0, slash);
}

json fit_verdict(const DecayFit& fit, double min_r2) {
  json j = to_json(fit);
  const bool pass = !fit.below_floor && fit.c > 0.0 && fit.rate_ci.low > 0.0 && fit.r_squared >= min_r2;
  j["verdict"] = fit.below_floor ? "below-measurement-floor" : (pass ? "decay" : "no-decay");
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinetically constrained models: bootstrap rules, Harris simulation, dual paths, auxiliary "
               "percolation and convergence experiments"};
  app.require_subcommand(1);
  int code = 0;

  // ---- family
  auto* family = app.add_subcommand("family", "update families");
  family->require_subcommand(1);
  std::string family_arg;
  auto* classify_cmd = family->add_subcommand("classify", "supercritical / critical / subcritical");
  classify_cmd->add_option("family", family_arg, "built-in name or JSON file")->required();
  classify_cmd->callback([&] {
    const auto f = load_family(family_arg);
    json j{{"family", to_json(f)}, {"classification", to_json(classify(f))}};
    if (f.dimension() == 2) j["stable_set"] = to_json(stable_set_2d(f));
    emit(j);
  });
  auto* stable_cmd = family->add_subcommand("stable-set", "stable directions as arcs");
  stable_cmd->add_option("family", family_arg, "built-in name or JSON file")->required();
  stable_cmd->callback([&] {
    const auto f = load_family(family_arg);
    if (f.dimension() == 2) {
      emit(to_json(stable_set_2d(f)));
      return;
    }
    json dirs = json::array();
    for (Vec u : {Vec{1, 0}, Vec{-1, 0}})
      if (is_stable(f, u)) dirs.push_back(json::array({u.x}));
    emit({{"stable", dirs}});
  });

  // ---- bootstrap
  auto* boot = app.add_subcommand("bootstrap", "bootstrap percolation");
  boot->require_subcommand(1);
  std::string sites_file;
  auto* closure_cmd = boot->add_subcommand("closure", "closure of an initial set inside a region");
  closure_cmd->add_option("family", family_arg)->required();
  closure_cmd->add_option("sites-file", sites_file, "{\"region\":{\"lo\":..,\"hi\":..},\"sites\":[..]}")->required();
  closure_cmd->callback([&] {
    const auto f = load_family(family_arg);
    const json j = read_json_file(sites_file);
    const int d = f.dimension();
    const Vec lo = vec_from_json(j.at("region").at("lo"), d), hi = vec_from_json(j.at("region").at("hi"), d);
    std::set<Vec> init;
    for (const auto& s : j.at("sites")) init.insert(vec_from_json(s, d));
    const auto region = std::make_shared<const Region>(Region::box(lo, hi));
    emit(to_json(closure(f, InfectionState::initial(region, init)), d));
  });
  SearchBudget budget;
  auto* cert_cmd = boot->add_subcommand("certificate", "finite spreading certificate for a supercritical family");
  cert_cmd->add_option("family", family_arg)->required();
  cert_cmd->add_option("--max-a1", budget.max_a1)->capture_default_str();
  cert_cmd->add_option("--max-a2", budget.max_a2)->capture_default_str();
  cert_cmd->callback([&] {
    const auto f = load_family(family_arg);
    try {
      const auto c = find_spread_certificate(f, budget);
      const auto check = validate_certificate(f, c);
      json j = to_json(c);
      j["valid"] = static_cast<bool>(check);
      emit(j);
      if (!check) code = kFailed;
    } catch (const NotSupercritical& e) {
      emit({{"certificate", nullptr}, {"reason", "not-supercritical"}, {"class", to_string(classify(f).kind)}});
      code = kFailed;
    } catch (const BudgetExhausted& e) {
      emit({{"certificate", nullptr}, {"reason", "budget-exhausted"}});
      code = kFailed;
    }
  });

  // ---- sim
  auto* sim = app.add_subcommand("sim", "Harris-construction simulation");
  sim->require_subcommand(1);
  GeometryArgs geo;
  double q = 0.5, q_prime = 0.5, horizon = 10.0;
  std::uint64_t seed = 1, replica = 0;
  std::string ndjson_path, save_path, load_path;
  auto* run_cmd = sim->add_subcommand("run", "sample a log, evolve, audit");
  run_cmd->add_option("family", family_arg)->required();
  add_geometry(run_cmd, geo);
  run_cmd->add_option("--q", q, "equilibrium zero density")->capture_default_str();
  run_cmd->add_option("--q-prime", q_prime, "zero density of the initial configuration")->capture_default_str();
  run_cmd->add_option("--horizon", horizon)->capture_default_str();
  run_cmd->add_option("--seed", seed)->capture_default_str();
  run_cmd->add_option("--replica", replica)->capture_default_str();
  run_cmd->add_option("--ndjson", ndjson_path, "write {site,time,label,accepted} records");
  run_cmd->add_option("--save-log", save_path, "write the binary log cache");
  run_cmd->add_option("--load-log", load_path, "replay a cached log instead of sampling");
  run_cmd->callback([&] {
    const auto f = load_family(family_arg);
    std::shared_ptr<const ClockLog> log;
    if (!load_path.empty()) {
      std::ifstream in(load_path, std::ios::binary);
      if (!in) throw Error("cannot open " + load_path);
      log = std::make_shared<const ClockLog>(load_log_binary(in));
    } else {
      log = std::make_shared<const ClockLog>(sample_clock_log(make_geometry(geo, f.dimension()), q, horizon, seed, replica));
    }
    const Geometry& g = log->geometry();
    const auto init = sample_bernoulli_config(g, q_prime, log->seed(), log->replica());
    const Trajectory traj = evolve(f, g, init, log);
    if (!ndjson_path.empty()) {
      std::ofstream out(ndjson_path);
      write_log_ndjson(out, *log, &traj);
    }
    if (!save_path.empty()) {
      std::ofstream out(save_path, std::ios::binary);
      save_log_binary(out, *log);
    }
    std::size_t accepted = 0;
    for (std::size_t s = 0; s < g.size(); ++s) accepted += traj.accepted(s).size();
    const auto illegal = count_illegal_updates(traj);
    emit({{"geometry", to_json(g)},
          {"horizon", log->horizon()},
          {"q", log->q()},
          {"seed", log->seed()},
          {"replica", log->replica()},
          {"rings", log->total_rings()},
          {"accepted", accepted},
          {"zeros_initial", init.zeros()},
          {"zeros_final", traj.config_at(log->horizon()).zeros()},
          {"illegal_updates", illegal}});
    if (illegal != 0) code = kFailed;
  });
  bool check_rev = false;
  auto* gen_cmd = sim->add_subcommand("generator", "exact generator on a small box");
  gen_cmd->add_option("family", family_arg)->required();
  add_geometry(gen_cmd, geo);
  gen_cmd->add_option("--q", q)->capture_default_str();
  gen_cmd->add_flag("--check-reversibility", check_rev);
  gen_cmd->callback([&] {
    const auto f = load_family(family_arg);
    const auto m = build_generator(f, make_geometry(geo, f.dimension()), q);
    json j{{"sites", m.sites}, {"states", m.dimension()}};
    if (check_rev) {
      const double v = check_detailed_balance(m, q);
      j["max_detailed_balance_violation"] = v;
      j["reversible"] = v < 1e-12;
      if (!(v < 1e-12)) code = kFailed;
    }
    emit(j);
  });

  // ---- dual
  auto* dual = app.add_subcommand("dual", "dual paths and codings");
  dual->require_subcommand(1);
  double t = 20.0, t_prime = 10.0, K = 2.0;
  std::int64_t N = 8, rho = 1;
  int dimension = 1;
  std::string site_arg = "0";
  auto* witness_cmd = dual->add_subcommand("witness", "disagreement path of a coupled run");
  witness_cmd->add_option("family", family_arg)->required();
  add_geometry(witness_cmd, geo);
  witness_cmd->add_option("--q", q)->capture_default_str();
  witness_cmd->add_option("--q-prime", q_prime)->capture_default_str();
  witness_cmd->add_option("--t", t)->capture_default_str();
  witness_cmd->add_option("--t-prime", t_prime)->capture_default_str();
  witness_cmd->add_option("--seed", seed)->capture_default_str();
  witness_cmd->add_option("--replica", replica)->capture_default_str();
  witness_cmd->add_option("--site", site_arg, "x or x,y")->capture_default_str();
  witness_cmd->callback([&] {
    const auto f = load_family(family_arg);
    const Geometry g = make_geometry(geo, f.dimension());
    auto log = std::make_shared<const ClockLog>(sample_clock_log(g, q, t, seed, replica));
    const auto c = evolve_coupled(f, g, sample_bernoulli_config(g, q_prime, seed, replica, StreamPurpose::InitialA),
                                  sample_bernoulli_config(g, q, seed, replica, StreamPurpose::InitialB), log, q_prime);
    const Vec x = parse_site(site_arg);
    const auto p = construct_disagreement_path(c, x, t, t_prime);
    json j{{"site", to_json(x, f.dimension())}, {"disagree", p.has_value()}};
    if (p) {
      const bool valid = validate_dual_path(*p, *log, f.range());
      const bool along = disagrees_along(*p, c);
      const bool activated = is_activated(*p, c);
      j["path"] = to_json(*p, f.dimension());
      j["valid"] = valid;
      j["disagrees_along"] = along;
      j["activated"] = activated;
      if (!valid || !along || activated) code = kFailed;
    }
    emit(j);
  });
  auto* jumps_cmd = dual->add_subcommand("max-jumps", "largest jump count of a dual path");
  add_geometry(jumps_cmd, geo);
  jumps_cmd->add_option("--dimension", dimension)->capture_default_str();
  jumps_cmd->add_option("--q", q)->capture_default_str();
  jumps_cmd->add_option("--t", t)->capture_default_str();
  jumps_cmd->add_option("--t-prime", t_prime)->capture_default_str();
  jumps_cmd->add_option("--rho", rho)->capture_default_str();
  jumps_cmd->add_option("--seed", seed)->capture_default_str();
  jumps_cmd->add_option("--replica", replica)->capture_default_str();
  jumps_cmd->add_option("--site", site_arg)->capture_default_str();
  jumps_cmd->callback([&] {
    const Geometry g = make_geometry(geo, dimension);
    const auto log = sample_clock_log(g, q, t, seed, replica);
    emit({{"max_jumps", max_dual_jumps(log, parse_site(site_arg), t, t_prime, rho)}});
  });
  auto* codings_cmd = dual->add_subcommand("count-codings", "number of reasonable codings");
  codings_cmd->add_option("--t", t)->capture_default_str();
  codings_cmd->add_option("--K", K)->capture_default_str();
  codings_cmd->add_option("--N", N)->capture_default_str();
  codings_cmd->add_option("--rho", rho)->capture_default_str();
  codings_cmd->add_option("--dimension", dimension)->capture_default_str();
  codings_cmd->callback([&] {
    emit({{"t", t},
          {"K", K},
          {"N", N},
          {"rho", rho},
          {"dimension", dimension},
          {"length", coding_length(t, K)},
          {"count", count_reasonable_codings(t, K, N, rho, dimension)}});
  });

  // ---- aux
  auto* aux = app.add_subcommand("aux", "auxiliary oriented percolation");
  aux->require_subcommand(1);
  std::int64_t level = 0, n = 2, margin = 4;
  std::uint64_t replicas = 1000;
  double alpha = 0.5;
  std::string quantity = "bond";
  auto aux_params = [&](const UpdateFamily& f) {
    AuxParams p{find_spread_certificate(f), K, t, q, q_prime};
    p.validate();
    return p;
  };
  auto* bonds_cmd = aux->add_subcommand("bonds", "bonds, occupation, tau and X for one sampled log");
  bonds_cmd->add_option("family", family_arg)->required();
  bonds_cmd->add_option("--K", K)->capture_default_str();
  bonds_cmd->add_option("--t", t)->capture_default_str();
  bonds_cmd->add_option("--k", level)->capture_default_str();
  bonds_cmd->add_option("--q", q)->capture_default_str();
  bonds_cmd->add_option("--seed", seed)->capture_default_str();
  bonds_cmd->add_option("--replica", replica)->capture_default_str();
  bonds_cmd->callback([&] {
    const auto f = load_family(family_arg);
    const auto p = aux_params(f);
    const auto box = aux_box(p.cert, p.depth(level));
    const auto log = sample_clock_log(box.geometry, q, t, seed, replica);
    const auto lat = build_bonds(log, p, box.anchor, level);
    const auto z = run_zeta(lat);
    emit({{"depth", lat.depth},
          {"vertical", lat.vertical},
          {"diagonal", lat.diagonal},
          {"occupation", z.occupation},
          {"tau", z.tau ? json(*z.tau) : json("inf")},
          {"X", z.survivors}});
  });
  auto* survival_cmd = aux->add_subcommand("survival", "Monte Carlo estimates against the stated bounds");
  survival_cmd->add_option("family", family_arg)->required();
  survival_cmd->add_option("--quantity", quantity, "bond | extinction | small-x")
      ->check(CLI::IsMember({"bond", "extinction", "small-x"}))
      ->capture_default_str();
  survival_cmd->add_option("--K", K)->capture_default_str();
  survival_cmd->add_option("--t", t)->capture_default_str();
  survival_cmd->add_option("--q", q, "zero-label probability")->capture_default_str();
  survival_cmd->add_flag("--at-threshold", "use q = q_K for the certificate rectangle");
  survival_cmd->add_option("--n", n)->capture_default_str();
  survival_cmd->add_option("--alpha", alpha)->capture_default_str();
  survival_cmd->add_option("--replicas", replicas)->capture_default_str();
  survival_cmd->add_option("--seed", seed)->capture_default_str();
  survival_cmd->callback([&] {
    const auto f = load_family(family_arg);
    auto p = aux_params(f);
    if (survival_cmd->count("--at-threshold")) p.q = q_threshold(K, p.cert.rectangle_size());
    BoundEstimate e;
    if (quantity == "bond")
      e = estimate_bond_closed_prob(p, replicas, seed);
    else if (quantity == "extinction")
      e = estimate_extinction_tail(p, n, replicas, seed);
    else
      e = estimate_survival_small_x(p, alpha, replicas, seed);
    json j = to_json(e);
    j["params"] = {{"family", to_json(f)}, {"K", p.K}, {"t", quantity == "bond" ? p.K : p.t}, {"q", p.q},
                   {"replicas", replicas}, {"seed", seed}};
    if (quantity == "extinction") j["params"]["n"] = n;
    if (quantity == "small-x") j["params"]["alpha"] = alpha;
    emit(j);
    if (e.verdict == "violated") code = kFailed;
  });
  std::uint64_t runs = 100;
  auto* transfer_cmd = aux->add_subcommand("transfer-check", "pathwise transfer of zeroes over seeded runs");
  transfer_cmd->add_option("family", family_arg)->required();
  transfer_cmd->add_option("--K", K)->capture_default_str();
  transfer_cmd->add_option("--t", t)->capture_default_str();
  transfer_cmd->add_option("--q", q)->capture_default_str();
  transfer_cmd->add_option("--q-prime", q_prime)->capture_default_str();
  transfer_cmd->add_option("--runs", runs)->capture_default_str();
  transfer_cmd->add_option("--margin", margin)->capture_default_str();
  transfer_cmd->add_option("--seed", seed)->capture_default_str();
  transfer_cmd->callback([&] {
    const auto f = load_family(family_arg);
    const auto p = aux_params(f);
    const auto box = aux_box(p.cert, p.depth(0), Boundary::Torus, margin);
    struct Tally {
      std::uint64_t holds = 0, violated = 0, not_applicable = 0;
      std::int64_t first_violation = -1;
    };
    auto tallies = run_replicas(runs, [&](std::uint64_t rep) {
      Tally tl;
      auto log = std::make_shared<const ClockLog>(sample_clock_log(box.geometry, p.q, p.t, seed, rep));
      const auto traj = evolve(f, box.geometry, sample_bernoulli_config(box.geometry, p.q_prime, seed, rep), log);
      for (std::int64_t k = 0; k <= p.blocks(); ++k)
        for (std::int64_t r0 = -p.depth(k); r0 <= p.depth(k); r0 += 2) {
          switch (check_transfer(traj, p, box.anchor, k, r0)) {
            case TransferOutcome::Holds: ++tl.holds; break;
            case TransferOutcome::Violated: ++tl.violated; break;
            case TransferOutcome::NotApplicable: ++tl.not_applicable; break;
          }
        }
      return tl;
    });
    Tally sum;
    std::uint64_t runs_applicable = 0;
    for (std::size_t i = 0; i < tallies.size(); ++i) {
      sum.holds += tallies[i].holds;
      sum.violated += tallies[i].violated;
      sum.not_applicable += tallies[i].not_applicable;
      runs_applicable += tallies[i].holds + tallies[i].violated > 0;
      if (tallies[i].violated && sum.first_violation < 0) sum.first_violation = static_cast<std::int64_t>(i);
    }
    json j{{"runs", runs},
           {"runs_applicable", runs_applicable},
           {"holds", sum.holds},
           {"violated", sum.violated},
           {"not_applicable", sum.not_applicable},
           {"verdict", sum.violated == 0 ? "holds" : "violated"}};
    if (sum.first_violation >= 0) j["first_violation_replica"] = sum.first_violation;
    emit(j);
    if (sum.violated) code = kFailed;
  });

  // ---- lab
  auto* lab = app.add_subcommand("lab", "convergence experiments from a JSON config");
  lab->require_subcommand(1);
  std::string config_path, f_path, fit_path;
  bool assert_decay = false;
  double min_r2 = 0.95;
  auto add_decay_options = [&](CLI::App* cmd) {
    cmd->add_option("--fit", fit_path, "write the exponential fit as JSON");
    cmd->add_flag("--assert-decay", assert_decay, "fail unless c > 0 with CI above 0 and R^2 >= --min-r2");
    cmd->add_option("--min-r2", min_r2)->capture_default_str();
  };
  auto finish_fit = [&](const DecayFit& fit) {
    const json j = fit_verdict(fit, min_r2);
    if (!fit_path.empty()) emit_text(j.dump(2) + "\n", fit_path);
    if (assert_decay && j.at("verdict") != "decay") code = kFailed;
  };
  auto* dis_cmd = lab->add_subcommand("disagreement", "P(eta_t(x) != eta~_t(x)) series as CSV");
  dis_cmd->add_option("config", config_path)->required();
  add_decay_options(dis_cmd);
  dis_cmd->callback([&] {
    const auto c = config_from_json(read_json_file(config_path), dir_of(config_path));
    const auto s = run_disagreement_experiment(c);
    emit_text(series_csv(s), c.output);
    if (!fit_path.empty() || assert_decay) finish_fit(fit_exponential(s));
  });
  auto* thm_cmd = lab->add_subcommand("theorem", "|E f(eta_t) - nu_q(f)| series as CSV");
  thm_cmd->add_option("config", config_path)->required();
  thm_cmd->add_option("--f", f_path, "{\"support\":[..],\"table\":[..]}")->required();
  add_decay_options(thm_cmd);
  thm_cmd->callback([&] {
    const auto c = config_from_json(read_json_file(config_path), dir_of(config_path));
    const auto f = local_function_from_json(read_json_file(f_path), c.geometry.dimension);
    const auto pts = run_theorem_experiment(c, f);
    emit_text(theorem_csv(pts, c.replicas), c.output);
    if (!fit_path.empty() || assert_decay) {
      std::vector<std::pair<double, double>> series;
      for (const auto& p : pts) series.push_back({p.t, p.difference});
      finish_fit(fit_exponential(series));
    }
  });
  auto* stat_cmd = lab->add_subcommand("stationarity", "zero density from nu_q stays at q");
  stat_cmd->add_option("config", config_path)->required();
  stat_cmd->callback([&] {
    const auto c = config_from_json(read_json_file(config_path), dir_of(config_path));
    const auto r = run_stationarity_check(c);
    emit_text(to_json(r).dump(2) + "\n", c.output);
    if (!r.pass) code = kFailed;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "kcm: " << e.what() << '\n';
    return kBadInput;
  }
  return code;
}
