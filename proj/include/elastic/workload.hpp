#pragma once

// Workload generation and JSON workload files.
//
// Stream layout. The Philox key is the 64-bit seed; the counter words are
// (tag, stream, index, sub) where `stream` is the replication index:
//   tag 0: arrivals in slot `index`        -> first uniform, Poisson count
//   tag 1: header of job `index`           -> phase count, first-kind coin
//   tag 2: phase `sub` of job `index`      -> first uniform, exponential size
// Job indices count jobs in generation order within one stream.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "elastic/core.hpp"
#include "elastic/random.hpp"

namespace elastic {

enum class FirstPhase : std::uint8_t { RandomEqual, Elastic, Inelastic };

inline std::string_view to_string(FirstPhase f) {
  switch (f) {
    case FirstPhase::RandomEqual: return "random";
    case FirstPhase::Elastic: return "elastic";
    case FirstPhase::Inelastic: return "inelastic";
  }
  return "?";
}

inline FirstPhase parse_first_phase(std::string_view s) {
  if (s == "random" || s == "random_equal") return FirstPhase::RandomEqual;
  if (s == "elastic") return FirstPhase::Elastic;
  if (s == "inelastic") return FirstPhase::Inelastic;
  throw ValidationError("unknown first_phase '" + std::string(s) + "'");
}

struct StochasticConfig {
  double arrival_rate = 5.0;
  std::int64_t horizon_slots = 1000;
  double mean_phases = 7.0;
  double mean_phase_size = 5.0;
  FirstPhase first_phase = FirstPhase::RandomEqual;
  std::uint64_t seed = 1;
  std::uint32_t stream = 0;

  void validate() const {
    if (!(arrival_rate >= 0.0) || !std::isfinite(arrival_rate)) {
      throw ValidationError("arrival_rate must be finite and >= 0");
    }
    if (horizon_slots < 1) throw ValidationError("horizon_slots must be >= 1");
    if (!(mean_phases > 0.0) || !std::isfinite(mean_phases)) {
      throw ValidationError("mean_phases must be finite and > 0");
    }
    if (!(mean_phase_size > 0.0) || !std::isfinite(mean_phase_size)) {
      throw ValidationError("mean_phase_size must be finite and > 0");
    }
  }
};

struct ProfileConfig {
  std::vector<double> sizes;
  FirstPhase first_phase = FirstPhase::RandomEqual;
  double arrival_rate = 5.0;
  std::int64_t horizon_slots = 1000;
  std::uint64_t seed = 1;
  std::uint32_t stream = 0;

  void validate() const {
    if (sizes.empty()) throw ValidationError("profile sizes must be non-empty");
    for (double s : sizes) {
      if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("profile sizes must be > 0");
    }
    if (!(arrival_rate >= 0.0) || !std::isfinite(arrival_rate)) {
      throw ValidationError("arrival_rate must be finite and >= 0");
    }
    if (horizon_slots < 1) throw ValidationError("horizon_slots must be >= 1");
  }
};

namespace detail {

enum : std::uint32_t { kTagSlot = 0, kTagJob = 1, kTagPhase = 2 };

inline PhaseKind first_kind(FirstPhase rule, double coin) {
  switch (rule) {
    case FirstPhase::Elastic: return PhaseKind::Elastic;
    case FirstPhase::Inelastic: return PhaseKind::Inelastic;
    case FirstPhase::RandomEqual: break;
  }
  return coin < 0.5 ? PhaseKind::Elastic : PhaseKind::Inelastic;
}

// Calls emit(slot, job_index) once per arriving job.
template <class Emit>
void for_each_arrival(double rate, std::int64_t horizon, std::uint64_t seed, std::uint32_t stream,
                      Emit&& emit) {
  if (rate == 0.0) return;
  std::uint32_t job = 0;
  for (std::int64_t t = 0; t < horizon; ++t) {
    const auto u = uniforms(seed, kTagSlot, stream, static_cast<std::uint32_t>(t), 0);
    const std::uint32_t count = poisson_from_uniform(rate, u.first);
    for (std::uint32_t k = 0; k < count; ++k) emit(t, job++);
  }
}

}  // namespace detail

inline std::vector<JobSpec> generate_stochastic(const StochasticConfig& cfg) {
  cfg.validate();
  std::vector<JobSpec> jobs;
  detail::for_each_arrival(
      cfg.arrival_rate, cfg.horizon_slots, cfg.seed, cfg.stream, [&](std::int64_t t, std::uint32_t j) {
        const auto head = uniforms(cfg.seed, detail::kTagJob, cfg.stream, j, 0);
        const std::uint32_t phases = std::max<std::uint32_t>(1, poisson_from_uniform(cfg.mean_phases, head.first));
        JobSpec job{static_cast<JobId>(j), static_cast<double>(t), {}};
        job.phases.reserve(phases);
        PhaseKind kind = detail::first_kind(cfg.first_phase, head.second);
        for (std::uint32_t p = 0; p < phases; ++p) {
          // Exact zero has probability 2^-53; fall back to the block's second word.
          const auto u = uniforms(cfg.seed, detail::kTagPhase, cfg.stream, j, p);
          double size = exponential_from_uniform(cfg.mean_phase_size, u.first);
          if (size <= 0.0) size = exponential_from_uniform(cfg.mean_phase_size, u.second);
          job.phases.push_back({kind, size});
          kind = other(kind);
        }
        jobs.push_back(std::move(job));
      });
  return jobs;
}

inline std::vector<JobSpec> generate_profile(const ProfileConfig& cfg) {
  cfg.validate();
  std::vector<JobSpec> jobs;
  detail::for_each_arrival(
      cfg.arrival_rate, cfg.horizon_slots, cfg.seed, cfg.stream, [&](std::int64_t t, std::uint32_t j) {
        const auto head = uniforms(cfg.seed, detail::kTagJob, cfg.stream, j, 0);
        JobSpec job{static_cast<JobId>(j), static_cast<double>(t), {}};
        PhaseKind kind = detail::first_kind(cfg.first_phase, head.second);
        for (double s : cfg.sizes) {
          job.phases.push_back({kind, s});
          kind = other(kind);
        }
        jobs.push_back(std::move(job));
      });
  return jobs;
}

/// Malformed workload file. what() names the offending line or field.
class WorkloadParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

inline nlohmann::json workload_to_json(const std::vector<JobSpec>& jobs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& j : jobs) {
    nlohmann::json phases = nlohmann::json::array();
    for (const auto& p : j.phases) phases.push_back({{"kind", to_string(p.kind)}, {"size", p.size}});
    arr.push_back({{"id", j.id}, {"arrival", j.arrival}, {"phases", std::move(phases)}});
  }
  return {{"jobs", std::move(arr)}};
}

inline std::vector<JobSpec> workload_from_json(const nlohmann::json& doc) {
  using nlohmann::json;
  const auto fail = [](const std::string& where, const std::string& what) -> void {
    throw WorkloadParseError(where + ": " + what);
  };
  if (!doc.is_object() || !doc.contains("jobs")) fail("$", "expected an object with a 'jobs' array");
  const json& arr = doc.at("jobs");
  if (!arr.is_array()) fail("jobs", "expected an array");
  std::vector<JobSpec> jobs;
  jobs.reserve(arr.size());
  std::vector<JobId> seen;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string at = "jobs[" + std::to_string(i) + "]";
    const json& o = arr[i];
    if (!o.is_object()) fail(at, "expected an object");
    for (const char* key : {"id", "arrival", "phases"}) {
      if (!o.contains(key)) fail(at, std::string("missing field '") + key + "'");
    }
    if (!o["id"].is_number_integer() || o["id"].get<std::int64_t>() < 0) {
      fail(at + ".id", "expected a non-negative integer");
    }
    if (!o["arrival"].is_number() || !(o["arrival"].get<double>() >= 0.0)) {
      fail(at + ".arrival", "expected a number >= 0");
    }
    JobSpec job{o["id"].get<JobId>(), o["arrival"].get<double>(), {}};
    const json& ph = o["phases"];
    if (!ph.is_array() || ph.empty()) fail(at + ".phases", "expected a non-empty array");
    for (std::size_t p = 0; p < ph.size(); ++p) {
      const std::string pat = at + ".phases[" + std::to_string(p) + "]";
      if (!ph[p].is_object()) fail(pat, "expected an object");
      if (!ph[p].contains("kind") || !ph[p]["kind"].is_string()) fail(pat + ".kind", "expected a string");
      if (!ph[p].contains("size") || !ph[p]["size"].is_number()) fail(pat + ".size", "expected a number");
      const auto kind = ph[p]["kind"].get<std::string>();
      if (kind != "elastic" && kind != "inelastic") {
        fail(pat + ".kind", "expected \"elastic\" or \"inelastic\", got \"" + kind + "\"");
      }
      const double size = ph[p]["size"].get<double>();
      if (!(size > 0.0) || !std::isfinite(size)) fail(pat + ".size", "must be > 0");
      job.phases.push_back({kind == "elastic" ? PhaseKind::Elastic : PhaseKind::Inelastic, size});
    }
    seen.push_back(job.id);
    jobs.push_back(std::move(job));
  }
  std::sort(seen.begin(), seen.end());
  if (auto d = std::adjacent_find(seen.begin(), seen.end()); d != seen.end()) {
    fail("jobs", "duplicate id " + std::to_string(*d));
  }
  return jobs;
}

inline void save_workload(const std::vector<JobSpec>& jobs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << workload_to_json(jobs).dump(1) << '\n';
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

inline std::vector<JobSpec> load_workload(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw WorkloadParseError(path + ":" + std::to_string(line) + ": " + e.what());
  }
  try {
    return workload_from_json(doc);
  } catch (const WorkloadParseError& e) {
    throw WorkloadParseError(path + ": " + e.what());
  }
}

}  // namespace elastic
