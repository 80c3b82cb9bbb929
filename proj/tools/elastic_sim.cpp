// Command-line front end: simulate, sweep, bounds, verify, oracle.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "elastic/bounds.hpp"
#include "elastic/experiment.hpp"
#include "elastic/opt.hpp"
#include "elastic/potential.hpp"

using namespace elastic;
using json = nlohmann::ordered_json;

namespace {

json jn(double x) { return std::isnan(x) ? json(nullptr) : json(x); }

struct Global {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "csv";
};

void write_text(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text).flush()) throw std::runtime_error("cannot write " + path);
}

// Rows of (name -> value) printed as CSV or a JSON array.
void write_rows(const std::vector<json>& rows, const Global& g) {
  if (g.format == "json") {
    write_text(json(rows).dump(2) + "\n", g.out);
    return;
  }
  std::ostringstream out;
  if (!rows.empty()) {
    bool first = true;
    for (const auto& [k, _] : rows.front().items()) out << (first ? "" : ",") << k, first = false;
    out << '\n';
  }
  for (const auto& r : rows) {
    bool first = true;
    for (const auto& [_, v] : r.items()) {
      out << (first ? "" : ",");
      first = false;
      if (v.is_string()) {
        out << v.get<std::string>();
      } else if (v.is_number_float()) {
        out << detail::num(v.get<double>());
      } else if (!v.is_null()) {
        out << v.dump();
      }
    }
    out << '\n';
  }
  write_text(out.str(), g.out);
}

ExperimentConfig load_with_overrides(const Global& g, std::optional<int> reps, std::optional<unsigned> workers) {
  if (g.config.empty()) throw ValidationError("--config is required");
  auto c = load_config(g.config);
  if (g.seed) c.base_seed = *g.seed;
  if (reps) c.replications = *reps;
  if (workers) c.workers = *workers;
  c.validate();
  return c;
}

std::string output_path(const Global& g, const ExperimentConfig& c) { return g.out.empty() ? c.output : g.out; }

void progress_line(const char* what, int done, int total) {
  std::fprintf(stderr, "\r%s %d/%d", what, done, total);
  if (done == total) std::fputc('\n', stderr);
}

json bound_row(const char* label, const BoundResult& b) {
  std::string violated;
  for (const auto& v : b.violated_conditions) violated += (violated.empty() ? "" : ";") + v;
  return {{"bound", label},      {"alpha", b.alpha}, {"beta", b.beta},         {"theta", b.theta},
          {"gamma", b.gamma},    {"delta", nullptr}, {"c1", jn(b.c1)}, {"c2", jn(b.c2)},
          {"ratio", jn(b.kappa)}, {"feasible", b.feasible}, {"violated", violated}};
}

json equi_row(const char* label, double alpha, double delta) {
  const auto k = theorem2_constants(alpha, delta);
  return {{"bound", label},   {"alpha", alpha},  {"beta", nullptr},  {"theta", nullptr},
          {"gamma", nullptr}, {"delta", delta},  {"c1", k.c1},       {"c2", k.c2},
          {"ratio", theorem2_bound(alpha, delta)}, {"feasible", true}, {"violated", ""}};
}

std::vector<JobSpec> fixture(const std::string& name) {
  if (name == "single") return {{0, 0.0, {{PhaseKind::Elastic, 4.0}}}};
  if (name == "pair") return {{0, 0.0, {{PhaseKind::Elastic, 2.0}}}, {1, 0.0, {{PhaseKind::Elastic, 2.0}}}};
  if (name == "staggered") {
    return {{0, 0.0, {{PhaseKind::Elastic, 1.0}, {PhaseKind::Inelastic, 0.5}}},
            {1, 0.5, {{PhaseKind::Inelastic, 0.5}, {PhaseKind::Elastic, 1.0}}}};
  }
  throw ValidationError("unknown fixture '" + name + "' (single, pair, staggered)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator for jobs with elastic and in-elastic phases"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  app.add_option("--config", g.config, "JSON experiment config");
  app.add_option("--seed", g.seed, "override base seed");
  app.add_option("--out", g.out, "output path (default: stdout)");
  app.add_option("--format", g.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  // simulate
  auto* sim = app.add_subcommand("simulate", "run every configured policy over replications");
  std::optional<int> reps;
  std::optional<unsigned> workers;
  for (auto* sc : {sim}) {
    sc->add_option("--replications", reps, "override replication count");
    sc->add_option("--workers", workers, "worker threads (0: all cores)");
  }

  // sweep
  auto* sw = app.add_subcommand("sweep", "repeat simulate over one dimension");
  std::string dimension;
  std::vector<double> values;
  sw->add_option("--replications", reps, "override replication count");
  sw->add_option("--workers", workers, "worker threads (0: all cores)");
  sw->add_option("--dimension", dimension, "arrival_rate, beta or servers");
  sw->add_option("--values", values, "sweep values")->delimiter(',');

  // bounds
  auto* bd = app.add_subcommand("bounds", "competitive-ratio constants");
  double alpha = 2.0, beta = 1.0 / 6, theta = 1.0 / 72, gamma = 1.0 / 72, delta = 0.25;
  bd->add_option("--alpha", alpha, "speedup exponent")->capture_default_str();
  bd->add_option("--beta", beta)->capture_default_str();
  bd->add_option("--theta", theta)->capture_default_str();
  bd->add_option("--gamma", gamma)->capture_default_str();
  bd->add_option("--delta", delta)->capture_default_str();

  // verify
  auto* vf = app.add_subcommand("verify", "check potential jumps and drifts on random or file workloads");
  std::string algorithm = "fractional_lcfs", workload_file;
  int trials = 20;
  std::size_t jobs = 10;
  double servers = 4.0;
  bool largest_beta = false;
  vf->add_option("--algorithm", algorithm, "fractional_lcfs or pa_equi")->capture_default_str();
  vf->add_option("--workload", workload_file, "workload file (default: random workloads)");
  vf->add_option("--trials", trials)->capture_default_str();
  vf->add_option("--jobs", jobs, "jobs per random workload")->capture_default_str();
  vf->add_option("--servers", servers)->capture_default_str();
  vf->add_option("--alpha", alpha)->capture_default_str();
  vf->add_flag("--largest-beta", largest_beta, "use the largest admissible beta instead of the ratio-minimising one");

  // oracle
  auto* oc = app.add_subcommand("oracle", "lattice search for the optimum on tiny instances");
  std::string fixture_name = "pair";
  double speed_step = 0.05, dt = 0.05;
  oc->add_option("--fixture", fixture_name, "single, pair or staggered")->capture_default_str();
  oc->add_option("--workload", workload_file, "workload file with at most 3 jobs");
  oc->add_option("--servers", servers, "servers (default: fixture's)");
  oc->add_option("--alpha", alpha)->capture_default_str();
  oc->add_option("--speed-step", speed_step)->capture_default_str();
  oc->add_option("--dt", dt)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*sim) {
      const auto c = load_with_overrides(g, reps, workers);
      const auto r = run_experiment(c, [](int d, int t) { progress_line("replications", d, t); });
      emit(r, app.get_option("--format")->count() ? g.format : c.format, output_path(g, c));
    } else if (*sw) {
      const auto c = load_with_overrides(g, reps, workers);
      auto spec = sweep_from_json(read_json_file(g.config));
      if (!dimension.empty()) {
        spec = SweepSpec{parse_sweep_dimension(dimension), values};
      } else if (!values.empty() && spec) {
        spec->values = values;
      }
      if (!spec || spec->values.empty()) throw ValidationError("sweep needs --dimension and --values or a config sweep");
      const auto r = sweep(c, spec->dimension, spec->values,
                           [](std::size_t d, std::size_t t) { progress_line("sweep points", int(d), int(t)); });
      emit(r, app.get_option("--format")->count() ? g.format : c.format, output_path(g, c));
    } else if (*bd) {
      const SpeedupFunction check(alpha);
      (void)check;
      std::vector<json> rows;
      rows.push_back(bound_row("lcfs_given", theorem1_bound(alpha, beta, theta, gamma)));
      try {
        const auto b = find_beta(alpha);
        rows.push_back(bound_row("lcfs_largest_beta", theorem1_bound(alpha, b.beta, b.theta, b.gamma)));
        const auto o = optimal_beta(alpha);
        rows.push_back(bound_row("lcfs_min_ratio", theorem1_bound(alpha, o.beta, o.theta, o.gamma)));
      } catch (const DomainError& e) {
        std::cerr << "note: " << e.what() << '\n';
      }
      try {
        rows.push_back(equi_row("pa_equi_given", alpha, delta));
      } catch (const DomainError& e) {
        std::cerr << "note: " << e.what() << '\n';
      }
      try {
        rows.push_back(equi_row("pa_equi_best", alpha, best_delta(alpha).delta));
      } catch (const DomainError& e) {
        std::cerr << "note: " << e.what() << '\n';
      }
      write_rows(rows, g);
    } else if (*vf) {
      const PolicyKind alg_kind = parse_policy_kind(algorithm);
      if (alg_kind != PolicyKind::FractionalLcfs && alg_kind != PolicyKind::PaEqui) {
        throw ValidationError("--algorithm must be fractional_lcfs or pa_equi");
      }
      const SpeedupFunction f(alpha);
      PolicyParams params;
      double pgamma = params.theta;
      if (alg_kind == PolicyKind::FractionalLcfs) {
        const auto b = largest_beta ? find_beta(alpha) : optimal_beta(alpha);
        params.beta = b.beta;
        params.theta = b.theta;
        pgamma = b.gamma;
      }
      const bool time_zero = alg_kind == PolicyKind::PaEqui;
      std::mt19937_64 rng(g.seed.value_or(1));
      RunOptions opts;
      opts.record_intervals = true;
      std::vector<json> rows;
      bool all = true;
      const int n_trials = workload_file.empty() ? trials : 1;
      for (int t = 0; t < n_trials; ++t) {
        std::vector<JobSpec> w;
        if (workload_file.empty()) {
          StochasticConfig s;
          s.arrival_rate = double(jobs) / 8.0;
          s.horizon_slots = 8;
          s.mean_phases = 3;
          s.mean_phase_size = 2;
          s.seed = rng();
          w = generate_stochastic(s);
        } else {
          w = load_workload(workload_file);
        }
        if (time_zero) {
          for (auto& j : w) j.arrival = 0.0;
        }
        auto shared = std::make_shared<const std::vector<JobSpec>>(normalized_workload(std::move(w)));
        const Trace at = run(shared, alg_kind, params, f, servers, opts);
        const auto pp = potential_params_for(at, pgamma);
        for (PolicyKind ck : {PolicyKind::FractionalLcfs, PolicyKind::PaEqui, PolicyKind::BlindEqui,
                              PolicyKind::InelasticFirst, PolicyKind::PaFcfs}) {
          const Trace ct = run(shared, ck, {}, f, servers, opts);
          const auto jr = verify_jumps(at, ct, pp);
          const auto dr = verify_drifts(at, ct, pp, pgamma);
          all = all && jr.pass && dr.pass;
          rows.push_back({{"trial", t},
                          {"comparison", to_string(ck)},
                          {"jobs", shared->size()},
                          {"jumps_ok", jr.pass},
                          {"max_jump", jr.max_jump},
                          {"drifts_ok", dr.pass},
                          {"worst_margin", jn(dr.worst_margin)},
                          {"applicable", dr.applicable}});
        }
        progress_line("trials", t + 1, n_trials);
      }
      write_rows(rows, g);
      if (!all) {
        std::cerr << "verification failed\n";
        return 2;
      }
    } else if (*oc) {
      std::vector<JobSpec> w;
      double n = servers;
      if (!workload_file.empty()) {
        w = load_workload(workload_file);
      } else {
        w = fixture(fixture_name);
        if (!oc->get_option("--servers")->count()) n = fixture_name == "single" ? 4.0 : fixture_name == "pair" ? 1.0 : 2.0;
      }
      const SpeedupFunction f(alpha);
      const auto r = brute_force_opt(w, n, f, {speed_step, dt});
      std::vector<json> rows;
      for (PolicyKind k : {PolicyKind::FractionalLcfs, PolicyKind::PaEqui, PolicyKind::BlindEqui,
                           PolicyKind::InelasticFirst, PolicyKind::PaFcfs}) {
        PolicyParams p;
        p.beta = 1.0;
        const Trace t = run(w, k, p, f, n);
        rows.push_back({{"policy", to_string(k)},
                        {"flow_time", t.flow_time},
                        {"opt_lower", r.lower_bound},
                        {"opt_upper", r.flow_time},
                        {"empirical_ratio", empirical_ratio(t)},
                        {"speed_step", r.speed_step},
                        {"dt", r.dt}});
      }
      write_rows(rows, g);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const InstanceTooLarge& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
