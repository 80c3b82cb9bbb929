#pragma once

// Replicated simulation runs, parameter sweeps and CSV/JSON output.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "elastic/engine.hpp"
#include "elastic/policies.hpp"
#include "elastic/workload.hpp"

namespace elastic {

struct PolicySpec {
  PolicyKind kind = PolicyKind::FractionalLcfs;
  PolicyParams params;
};

struct FileWorkload {
  std::string path;
};

using WorkloadSource = std::variant<StochasticConfig, ProfileConfig, FileWorkload>;

struct ExperimentConfig {
  std::vector<PolicySpec> policies;
  double servers = 10.0;
  double alpha = 2.0;
  WorkloadSource workload = StochasticConfig{};
  int replications = 200;
  std::uint64_t base_seed = 1;
  std::string output;     // empty: standard output
  std::string format = "csv";
  unsigned workers = 0;   // 0: hardware concurrency
  // "drain": run until every job completes. "horizon": stop at the end of the
  // arrival window and count only the time jobs spend inside it.
  std::string accounting = "drain";

  void validate() const {
    if (policies.empty()) throw ValidationError("at least one policy is required");
    for (const auto& p : policies) p.params.validate();
    if (!(servers > 0.0) || !std::isfinite(servers)) throw ValidationError("servers must be finite and > 0");
    if (!(alpha > 1.0) || !std::isfinite(alpha)) throw ValidationError("alpha must be finite and > 1");
    if (replications < 1) throw ValidationError("replications must be >= 1");
    if (format != "csv" && format != "json") throw ValidationError("format must be csv or json");
    if (accounting != "drain" && accounting != "horizon") {
      throw ValidationError("accounting must be drain or horizon");
    }
    if (accounting == "horizon" && std::holds_alternative<FileWorkload>(workload)) {
      throw ValidationError("horizon accounting needs a generated workload");
    }
    std::visit(
        [](const auto& w) {
          if constexpr (std::is_same_v<std::decay_t<decltype(w)>, FileWorkload>) {
            if (w.path.empty()) throw ValidationError("workload file path is empty");
          } else {
            w.validate();
          }
        },
        workload);
  }

  double horizon() const {
    if (const auto* s = std::get_if<StochasticConfig>(&workload)) return static_cast<double>(s->horizon_slots);
    if (const auto* p = std::get_if<ProfileConfig>(&workload)) return static_cast<double>(p->horizon_slots);
    return std::numeric_limits<double>::infinity();
  }

  double arrival_rate() const {
    if (const auto* s = std::get_if<StochasticConfig>(&workload)) return s->arrival_rate;
    if (const auto* p = std::get_if<ProfileConfig>(&workload)) return p->arrival_rate;
    return std::numeric_limits<double>::quiet_NaN();
  }
};

/// Statistics of one policy at one configuration.
struct CellResult {
  PolicySpec policy;
  double alpha = 0.0;
  double servers = 0.0;
  double arrival_rate = 0.0;
  int replications = 0;  // replications with at least one job
  std::size_t jobs_total = 0;
  double mean_flow_time = std::numeric_limits<double>::quiet_NaN();
  double stddev = std::numeric_limits<double>::quiet_NaN();
  double ci95 = std::numeric_limits<double>::quiet_NaN();
  double pooled_mean = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> per_replication;  // NaN where the replication had no jobs
};

struct AggregateResult {
  std::vector<CellResult> cells;
};

class ReplicationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two-sided 95% Student-t quantile.
inline double t_quantile_975(int df) {
  if (df <= 0) return std::numeric_limits<double>::quiet_NaN();
  static constexpr double small[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228};
  if (df <= 10) return small[df - 1];
  const double z = 1.959963984540054, n = df;
  return z + (z * z * z + z) / (4 * n) + (5 * std::pow(z, 5) + 16 * z * z * z + 3 * z) / (96 * n * n) +
         (3 * std::pow(z, 7) + 19 * std::pow(z, 5) + 17 * z * z * z - 15 * z) / (384 * n * n * n);
}

namespace detail {

inline std::vector<JobSpec> replication_workload(const ExperimentConfig& cfg, int r,
                                                 const std::vector<JobSpec>* file_jobs) {
  if (auto s = std::get_if<StochasticConfig>(&cfg.workload)) {
    StochasticConfig c = *s;
    c.seed = cfg.base_seed;
    c.stream = static_cast<std::uint32_t>(r);
    return generate_stochastic(c);
  }
  if (auto p = std::get_if<ProfileConfig>(&cfg.workload)) {
    ProfileConfig c = *p;
    c.seed = cfg.base_seed;
    c.stream = static_cast<std::uint32_t>(r);
    return generate_profile(c);
  }
  return *file_jobs;
}

struct RepOutcome {
  std::size_t jobs = 0;
  std::vector<double> flow;  // total flow time per policy
};

inline void summarize(CellResult& c, const std::vector<RepOutcome>& reps, std::size_t policy) {
  double sum = 0.0, flow_total = 0.0;
  for (const auto& r : reps) {
    if (r.jobs == 0) {
      c.per_replication.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const double m = r.flow[policy] / static_cast<double>(r.jobs);
    c.per_replication.push_back(m);
    sum += m;
    flow_total += r.flow[policy];
    c.jobs_total += r.jobs;
    ++c.replications;
  }
  if (c.replications == 0) return;
  c.mean_flow_time = sum / c.replications;
  c.pooled_mean = flow_total / static_cast<double>(c.jobs_total);
  if (c.replications > 1) {
    double ss = 0.0;
    for (double m : c.per_replication) {
      if (!std::isnan(m)) ss += (m - c.mean_flow_time) * (m - c.mean_flow_time);
    }
    c.stddev = std::sqrt(ss / (c.replications - 1));
    c.ci95 = t_quantile_975(c.replications - 1) * c.stddev / std::sqrt(static_cast<double>(c.replications));
  } else {
    c.stddev = 0.0;
    c.ci95 = 0.0;
  }
}

}  // namespace detail

using ProgressFn = std::function<void(int done, int total)>;

/// Every replication draws one workload from (base_seed, replication index)
/// and runs every policy on it. Results do not depend on the worker count.
inline AggregateResult run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {}) {
  cfg.validate();
  std::optional<std::vector<JobSpec>> file_jobs;
  if (auto f = std::get_if<FileWorkload>(&cfg.workload)) file_jobs = load_workload(f->path);

  const SpeedupFunction speedup(cfg.alpha);
  const int total = cfg.replications;
  std::vector<detail::RepOutcome> reps(static_cast<std::size_t>(total));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(total));
  std::atomic<int> next{0}, done{0};
  std::mutex progress_mu;
  RunOptions opts;
  opts.record_events = false;
  opts.record_completions = false;
  const bool windowed = cfg.accounting == "horizon";
  if (windowed) opts.stop_time = cfg.horizon();

  const auto worker = [&] {
    for (int r = next++; r < total; r = next++) {
      try {
        auto jobs = std::make_shared<const std::vector<JobSpec>>(
            normalized_workload(detail::replication_workload(cfg, r, file_jobs ? &*file_jobs : nullptr)));
        auto& out = reps[static_cast<std::size_t>(r)];
        out.jobs = jobs->size();
        for (const auto& p : cfg.policies) {
          try {
            const Trace t = run(jobs, p.kind, p.params, speedup, cfg.servers, opts);
            out.flow.push_back(windowed ? t.occupancy_area : t.flow_time);
          } catch (const std::exception& e) {
            throw ReplicationError("replication " + std::to_string(r) + " (seed " + std::to_string(cfg.base_seed) +
                                   ", stream " + std::to_string(r) + "), policy " +
                                   std::string(to_string(p.kind)) + ": " + e.what());
          }
        }
      } catch (...) {
        errors[static_cast<std::size_t>(r)] = std::current_exception();
      }
      const int d = ++done;
      if (progress) {
        std::lock_guard lock(progress_mu);
        progress(d, total);
      }
    }
  };
  unsigned n = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
  n = std::min<unsigned>(n, static_cast<unsigned>(total));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);  // lowest replication index first
  }

  AggregateResult result;
  for (std::size_t p = 0; p < cfg.policies.size(); ++p) {
    CellResult c;
    c.policy = cfg.policies[p];
    c.alpha = cfg.alpha;
    c.servers = cfg.servers;
    c.arrival_rate = cfg.arrival_rate();
    detail::summarize(c, reps, p);
    result.cells.push_back(std::move(c));
  }
  return result;
}

enum class SweepDimension : std::uint8_t { ArrivalRate, Beta, Servers };

inline SweepDimension parse_sweep_dimension(std::string_view s) {
  if (s == "arrival_rate") return SweepDimension::ArrivalRate;
  if (s == "beta") return SweepDimension::Beta;
  if (s == "servers") return SweepDimension::Servers;
  throw ValidationError("unknown sweep dimension '" + std::string(s) + "'");
}

inline std::string_view to_string(SweepDimension d) {
  switch (d) {
    case SweepDimension::ArrivalRate: return "arrival_rate";
    case SweepDimension::Beta: return "beta";
    case SweepDimension::Servers: return "servers";
  }
  return "?";
}

/// Applies one sweep value to a copy of the template. A beta value applies to
/// every Fractional-LCFS entry.
inline ExperimentConfig with_value(ExperimentConfig cfg, SweepDimension dim, double value) {
  switch (dim) {
    case SweepDimension::ArrivalRate:
      if (auto s = std::get_if<StochasticConfig>(&cfg.workload)) {
        s->arrival_rate = value;
      } else if (auto p = std::get_if<ProfileConfig>(&cfg.workload)) {
        p->arrival_rate = value;
      } else {
        throw ValidationError("cannot sweep arrival_rate over a workload file");
      }
      break;
    case SweepDimension::Beta: {
      bool any = false;
      for (auto& p : cfg.policies) {
        if (p.kind == PolicyKind::FractionalLcfs) {
          p.params.beta = value;
          any = true;
        }
      }
      if (!any) throw ValidationError("beta sweep needs a fractional_lcfs policy");
      break;
    }
    case SweepDimension::Servers: cfg.servers = value; break;
  }
  return cfg;
}

/// One run per value with the template's base_seed, so points are paired.
inline AggregateResult sweep(const ExperimentConfig& tmpl, SweepDimension dim, const std::vector<double>& values,
                             const std::function<void(std::size_t, std::size_t)>& on_point = {}) {
  AggregateResult out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto r = run_experiment(with_value(tmpl, dim, values[i]));
    for (auto& c : r.cells) out.cells.push_back(std::move(c));
    if (on_point) on_point(i + 1, values.size());
  }
  return out;
}

// ---- output ----

inline constexpr const char* kCsvHeader =
    "policy,beta,theta,delta,alpha,servers,arrival_rate,replications,jobs_total,mean_flow_time,stddev,ci95,"
    "pooled_mean";

namespace detail {

inline std::string num(double x) {
  if (std::isnan(x)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline nlohmann::json jnum(double x) { return std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x); }

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Parameters that do not belong to a policy are left blank.
inline double beta_of(const PolicySpec& p) { return p.kind == PolicyKind::FractionalLcfs ? p.params.beta : kNaN; }
inline double theta_of(const PolicySpec& p) { return p.kind == PolicyKind::FractionalLcfs ? p.params.theta : kNaN; }
inline double delta_of(const PolicySpec& p) { return p.kind == PolicyKind::PaEqui ? p.params.delta : kNaN; }

}  // namespace detail

inline void write_csv(const AggregateResult& r, std::ostream& out) {
  using detail::num;
  out << kCsvHeader << '\n';
  for (const auto& c : r.cells) {
    out << to_string(c.policy.kind) << ',' << num(detail::beta_of(c.policy)) << ','
        << num(detail::theta_of(c.policy)) << ',' << num(detail::delta_of(c.policy)) << ',' << num(c.alpha) << ','
        << num(c.servers) << ',' << num(c.arrival_rate) << ',' << c.replications << ',' << c.jobs_total << ','
        << num(c.mean_flow_time) << ',' << num(c.stddev) << ',' << num(c.ci95) << ',' << num(c.pooled_mean)
        << '\n';
  }
}

inline nlohmann::json to_json(const AggregateResult& r) {
  using detail::jnum;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : r.cells) {
    rows.push_back({{"policy", to_string(c.policy.kind)},
                    {"beta", jnum(detail::beta_of(c.policy))},
                    {"theta", jnum(detail::theta_of(c.policy))},
                    {"delta", jnum(detail::delta_of(c.policy))},
                    {"alpha", jnum(c.alpha)},
                    {"servers", jnum(c.servers)},
                    {"arrival_rate", jnum(c.arrival_rate)},
                    {"replications", c.replications},
                    {"jobs_total", c.jobs_total},
                    {"mean_flow_time", jnum(c.mean_flow_time)},
                    {"stddev", jnum(c.stddev)},
                    {"ci95", jnum(c.ci95)},
                    {"pooled_mean", jnum(c.pooled_mean)}});
  }
  return {{"results", std::move(rows)}};
}

/// Writes to `path`, or to standard output when the path is empty or "-".
inline void emit(const AggregateResult& r, std::string_view format, const std::string& path) {
  if (format != "csv" && format != "json") throw ValidationError("format must be csv or json");
  std::ostringstream buf;
  if (format == "csv") {
    write_csv(r, buf);
  } else {
    buf << to_json(r).dump(2) << '\n';
  }
  if (path.empty() || path == "-") {
    std::cout << buf.str() << std::flush;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << buf.str();
  if (!out.flush()) throw std::runtime_error("write to " + path + " failed");
}

// ---- configuration files ----

namespace detail {

inline void reject_unknown(const nlohmann::json& o, const std::string& where,
                           std::initializer_list<std::string_view> known) {
  for (const auto& [k, _] : o.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      throw ValidationError(where + ": unknown field '" + k + "'");
    }
  }
}

template <class T>
T field(const nlohmann::json& o, const char* key, const std::string& where, T fallback) {
  if (!o.contains(key)) return fallback;
  try {
    return o.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(where + "." + key + ": wrong type");
  }
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::field;
  if (!j.is_object()) throw ValidationError("config: expected an object");
  detail::reject_unknown(j, "config", {"policies", "servers", "alpha", "workload", "replications", "base_seed",
                                       "output", "format", "workers", "accounting", "sweep"});
  ExperimentConfig c;
  if (!j.contains("policies") || !j["policies"].is_array()) throw ValidationError("config.policies: expected an array");
  for (std::size_t i = 0; i < j["policies"].size(); ++i) {
    const auto& p = j["policies"][i];
    const std::string at = "config.policies[" + std::to_string(i) + "]";
    if (!p.is_object()) throw ValidationError(at + ": expected an object");
    detail::reject_unknown(p, at, {"kind", "beta", "theta", "delta"});
    PolicySpec s;
    s.kind = parse_policy_kind(field<std::string>(p, "kind", at, ""));
    s.params.beta = field(p, "beta", at, s.params.beta);
    s.params.theta = field(p, "theta", at, s.params.theta);
    s.params.delta = field(p, "delta", at, s.params.delta);
    c.policies.push_back(s);
  }
  c.servers = field(j, "servers", "config", c.servers);
  c.alpha = field(j, "alpha", "config", c.alpha);
  c.replications = field(j, "replications", "config", c.replications);
  c.base_seed = field(j, "base_seed", "config", c.base_seed);
  c.output = field(j, "output", "config", c.output);
  c.format = field(j, "format", "config", c.format);
  c.workers = field(j, "workers", "config", c.workers);
  c.accounting = field(j, "accounting", "config", c.accounting);
  if (j.contains("workload")) {
    const auto& w = j["workload"];
    const std::string at = "config.workload";
    if (!w.is_object()) throw ValidationError(at + ": expected an object");
    const auto type = field<std::string>(w, "type", at, "stochastic");
    if (type == "stochastic") {
      detail::reject_unknown(w, at, {"type", "arrival_rate", "horizon_slots", "mean_phases", "mean_phase_size",
                                     "first_phase"});
      StochasticConfig s;
      s.arrival_rate = field(w, "arrival_rate", at, s.arrival_rate);
      s.horizon_slots = field(w, "horizon_slots", at, s.horizon_slots);
      s.mean_phases = field(w, "mean_phases", at, s.mean_phases);
      s.mean_phase_size = field(w, "mean_phase_size", at, s.mean_phase_size);
      s.first_phase = parse_first_phase(field<std::string>(w, "first_phase", at, "random"));
      c.workload = s;
    } else if (type == "profile") {
      detail::reject_unknown(w, at, {"type", "sizes", "arrival_rate", "horizon_slots", "first_phase"});
      ProfileConfig p;
      p.sizes = field(w, "sizes", at, p.sizes);
      p.arrival_rate = field(w, "arrival_rate", at, p.arrival_rate);
      p.horizon_slots = field(w, "horizon_slots", at, p.horizon_slots);
      p.first_phase = parse_first_phase(field<std::string>(w, "first_phase", at, "random"));
      c.workload = p;
    } else if (type == "file") {
      detail::reject_unknown(w, at, {"type", "path"});
      c.workload = FileWorkload{field<std::string>(w, "path", at, "")};
    } else {
      throw ValidationError(at + ".type: expected stochastic, profile or file");
    }
  }
  c.validate();
  return c;
}

struct SweepSpec {
  SweepDimension dimension = SweepDimension::ArrivalRate;
  std::vector<double> values;
};

inline std::optional<SweepSpec> sweep_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("sweep")) return std::nullopt;
  const auto& s = j["sweep"];
  if (!s.is_object()) throw ValidationError("config.sweep: expected an object");
  detail::reject_unknown(s, "config.sweep", {"dimension", "values"});
  SweepSpec out;
  out.dimension = parse_sweep_dimension(detail::field<std::string>(s, "dimension", "config.sweep", ""));
  out.values = detail::field(s, "values", "config.sweep", out.values);
  if (out.values.empty()) throw ValidationError("config.sweep.values: expected a non-empty array");
  return out;
}

/// Parses a JSON file; syntax errors name the line.
inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw ValidationError(path + ":" + std::to_string(line) + ": " + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  const auto j = read_json_file(path);
  try {
    auto c = config_from_json(j);
    // Relative workload files resolve against the config's directory.
    if (auto f = std::get_if<FileWorkload>(&c.workload); f && !f->path.empty() && f->path.front() != '/') {
      const auto slash = path.find_last_of('/');
      if (slash != std::string::npos) f->path = path.substr(0, slash + 1) + f->path;
    }
    return c;
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

}  // namespace elastic
