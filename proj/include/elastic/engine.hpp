#pragma once

// Event-driven continuous-time execution of a policy over a workload.
//
// The allocation is recomputed at every arrival and phase completion and
// held constant in between; jobs are advanced by speed * dt per interval so
// no interval ever straddles a phase boundary.

#include <algorithm>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "elastic/core.hpp"
#include "elastic/detail/job_store.hpp"
#include "elastic/policies.hpp"

namespace elastic {

/// A policy left every outstanding job at zero speed.
class LivelockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EventKind : std::uint8_t { Arrival, PhaseCompletion, JobCompletion };

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::Arrival: return "arrival";
    case EventKind::PhaseCompletion: return "phase_completion";
    case EventKind::JobCompletion: return "job_completion";
  }
  return "?";
}

inline constexpr JobId kNoJob = -1;

struct TraceEvent {
  double time = 0.0;
  EventKind kind = EventKind::Arrival;
  JobId job = kNoJob;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

/// One constant-allocation stretch [start, end) of a run.
struct IntervalRecord {
  double start = 0.0;
  double end = 0.0;
  SystemSnapshot snapshot;
  Allocation allocation;
  PolicyBranch branch = PolicyBranch::Single;
};

struct Trace {
  std::shared_ptr<const std::vector<JobSpec>> workload;
  double servers = 0.0;
  PolicyKind policy = PolicyKind::PaEqui;
  PolicyParams params;
  double alpha = 2.0;
  std::vector<TraceEvent> events;
  std::vector<IntervalRecord> intervals;
  std::map<JobId, double> completions;
  double flow_time = 0.0;        // sum of (d_j - a_j)
  double occupancy_area = 0.0;   // integral of n(t) dt
  double end_time = 0.0;
  std::size_t jobs = 0;
  std::size_t clamped_steps = 0;
  bool truncated = false;  // stopped at RunOptions::stop_time with work left
};

struct RunOptions {
  bool record_events = true;
  bool record_intervals = false;
  bool record_completions = true;
  // Simulation stops here; occupancy_area then covers [0, stop_time] only.
  double stop_time = std::numeric_limits<double>::infinity();
};

/// Smallest accepted interval length; shorter steps are stretched to it and
/// counted in Trace::clamped_steps.
inline constexpr double kMinStep = 1e-12;

struct NextEvent {
  double time = 0.0;
  EventKind kind = EventKind::Arrival;
  JobId job = kNoJob;
};

/// Earliest event after the snapshot under a fixed allocation. Arrivals win
/// ties, then phase boundaries by job id. Returns nullopt at the end of the
/// trace (nothing active, nothing pending).
inline std::optional<NextEvent> next_event(const SystemSnapshot& snapshot, const Allocation& alloc,
                                           std::optional<double> next_arrival) {
  std::optional<NextEvent> best;
  for (const auto& job : snapshot.active()) {
    const double s = alloc.speed_of(job.id());
    if (s <= 0.0) continue;
    const double t = snapshot.time() + job.remaining_in_phase() / s;
    if (!best || t < best->time || (t == best->time && job.id() < best->job)) {
      const bool last = job.current_phase() + 1 == job.spec().phases.size();
      best = NextEvent{t, last ? EventKind::JobCompletion : EventKind::PhaseCompletion, job.id()};
    }
  }
  if (next_arrival && (!best || *next_arrival <= best->time)) {
    return NextEvent{*next_arrival, EventKind::Arrival, kNoJob};
  }
  if (!best && !snapshot.empty()) {
    throw LivelockError("every active job has zero speed and no arrival is pending");
  }
  return best;
}

namespace detail {

struct StoreView {
  JobStore* store;
  double servers_;
  double servers() const { return servers_; }
  std::size_t n() const { return store->count(Population::All); }
  std::size_t n_elastic() const { return store->count(Population::Elastic); }
  std::size_t n_inelastic() const { return store->count(Population::Inelastic); }
  PhaseKind kind_at(std::size_t rank) const {
    return store->leaf(store->position_of_rank(Population::All, rank)).first;
  }
};

class Simulation {
 public:
  Simulation(std::shared_ptr<const std::vector<JobSpec>> jobs, PolicyKind policy,
             const PolicyParams& params, const SpeedupFunction& f, double servers,
             const RunOptions& options)
      : jobs_(std::move(jobs)),
        policy_(policy),
        params_(params),
        f_(f),
        servers_(servers),
        options_(options),
        store_(jobs_->size()),
        phase_(jobs_->size(), 0) {}

  Trace run() {
    Trace trace;
    trace.workload = jobs_;
    trace.servers = servers_;
    trace.policy = policy_;
    trace.params = params_;
    trace.alpha = f_.alpha();
    trace.jobs = jobs_->size();

    const auto& jobs = *jobs_;
    std::size_t next = 0;
    double t = jobs.empty() ? 0.0 : jobs.front().arrival;
    StoreView view{&store_, servers_};
    std::vector<std::size_t> due;

    auto admit = [&] {
      while (next < jobs.size() && jobs[next].arrival <= t) {
        store_.activate(next, jobs[next].phases.front().kind, jobs[next].phases.front().size);
        if (options_.record_events) trace.events.push_back({t, EventKind::Arrival, jobs[next].id});
        ++next;
      }
    };

    while (true) {
      admit();
      const std::size_t n = view.n();
      const double next_arrival = next < jobs.size() ? jobs[next].arrival : detail::JobStore::kInf;
      if (n == 0) {
        if (next >= jobs.size()) break;
        if (next_arrival > options_.stop_time) {
          trace.truncated = true;
          t = options_.stop_time;
          break;
        }
        t = next_arrival;
        continue;
      }
      if (t >= options_.stop_time) {
        trace.truncated = true;
        break;
      }

      const Plan plan = plan_policy(policy_, view, params_, f_);
      ranges_.clear();
      double dt_phase = JobStore::kInf;
      for (const auto& g : plan.grants) {
        if (g.count == 0) continue;
        Range r{store_.position_of_rank(g.population, g.first),
                store_.position_of_rank(g.population, g.first + g.count - 1) + 1,
                g.population == Population::Inelastic ? 0.0 : g.elastic.speed,
                g.population == Population::Elastic ? 0.0 : g.inelastic.speed};
        if (r.elastic_speed > 0.0) {
          dt_phase = std::min(dt_phase, store_.minimum(r.lo, r.hi, PhaseKind::Elastic).first /
                                            r.elastic_speed);
        }
        if (r.inelastic_speed > 0.0) {
          dt_phase = std::min(dt_phase, store_.minimum(r.lo, r.hi, PhaseKind::Inelastic).first /
                                            r.inelastic_speed);
        }
        ranges_.push_back(r);
      }
      if (dt_phase == JobStore::kInf) {
        throw LivelockError("policy " + std::string(to_string(policy_)) + " starves all " +
                            std::to_string(n) + " active jobs at t=" + std::to_string(t));
      }

      const bool to_arrival = next_arrival - t <= dt_phase;
      double dt = to_arrival ? next_arrival - t : dt_phase;
      if (!to_arrival && dt < kMinStep) {
        dt = kMinStep;
        ++trace.clamped_steps;
      }
      double t_end = to_arrival ? next_arrival : t + dt;
      if (t_end > options_.stop_time) {
        t_end = options_.stop_time;
        dt = t_end - t;
      }

      if (options_.record_intervals) {
        SystemSnapshot snap = snapshot(t);
        Allocation alloc = expand(plan, snap);
        trace.intervals.push_back({t, t_end, std::move(snap), std::move(alloc), plan.branch});
      }
      trace.occupancy_area += static_cast<double>(n) * (t_end - t);

      for (const auto& r : ranges_) {
        store_.subtract(r.lo, r.hi, r.elastic_speed * dt, r.inelastic_speed * dt);
      }
      t = t_end;
      admit();

      due.clear();
      store_.collect_at_most(kWorkTolerance, due);
      std::sort(due.begin(), due.end(),
                [&](std::size_t a, std::size_t b) { return jobs[a].id < jobs[b].id; });
      for (const std::size_t pos : due) close_phase(pos, t, trace);
    }
    trace.end_time = t;
    return trace;
  }

 private:
  struct Range {
    std::size_t lo, hi;
    double elastic_speed, inelastic_speed;
  };

  void close_phase(std::size_t pos, double t, Trace& trace) {
    const JobSpec& job = (*jobs_)[pos];
    const std::size_t ph = ++phase_[pos];
    if (ph == job.phases.size()) {
      store_.deactivate(pos);
      trace.flow_time += t - job.arrival;
      if (options_.record_completions) trace.completions.emplace(job.id, t);
      if (options_.record_events) trace.events.push_back({t, EventKind::JobCompletion, job.id});
    } else {
      store_.activate(pos, job.phases[ph].kind, job.phases[ph].size);
      if (options_.record_events) trace.events.push_back({t, EventKind::PhaseCompletion, job.id});
    }
  }

  SystemSnapshot snapshot(double t) {
    std::vector<JobState> states;
    const std::size_t n = store_.count(Population::All);
    states.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t pos = store_.position_of_rank(Population::All, r);
      const double rem = std::max(0.0, store_.leaf(pos).second);
      states.push_back(JobState::at((*jobs_)[pos], phase_[pos], rem));
    }
    return SystemSnapshot(t, servers_, std::move(states));
  }

  std::shared_ptr<const std::vector<JobSpec>> jobs_;
  PolicyKind policy_;
  PolicyParams params_;
  SpeedupFunction f_;
  double servers_;
  RunOptions options_;
  JobStore store_;
  std::vector<std::size_t> phase_;
  std::vector<Range> ranges_;
};

}  // namespace detail

/// Runs `policy` on an already normalized (validated, arrival-ordered)
/// workload shared with the caller.
inline Trace run(std::shared_ptr<const std::vector<JobSpec>> workload, PolicyKind policy,
                 const PolicyParams& params, const SpeedupFunction& f, double servers,
                 const RunOptions& options = {}) {
  if (!(servers > 0.0) || !std::isfinite(servers)) {
    throw DomainError("number of servers must be finite and > 0");
  }
  params.validate();
  return detail::Simulation(std::move(workload), policy, params, f, servers, options).run();
}

inline Trace run(std::span<const JobSpec> workload, PolicyKind policy, const PolicyParams& params,
                 const SpeedupFunction& f, double servers, const RunOptions& options = {}) {
  auto jobs = std::make_shared<const std::vector<JobSpec>>(
      normalized_workload(std::vector<JobSpec>(workload.begin(), workload.end())));
  return run(std::move(jobs), policy, params, f, servers, options);
}

/// Piecewise-linear state of a recorded run at time t. `from_left` selects the
/// left limit at event instants (departing jobs still present, arriving jobs
/// absent); otherwise the right-continuous state is returned.
inline SystemSnapshot state_at(const Trace& trace, double t, bool from_left = false) {
  const auto& iv = trace.intervals;
  auto it = from_left
      ? std::lower_bound(iv.begin(), iv.end(), t,
                         [](const IntervalRecord& r, double x) { return r.end < x; })
      : std::upper_bound(iv.begin(), iv.end(), t,
                         [](double x, const IntervalRecord& r) { return x < r.end; });
  const bool inside = it != iv.end() &&
                      (from_left ? (it->start < t && t <= it->end) : (it->start <= t && t < it->end));
  if (!inside) return SystemSnapshot(t, trace.servers, {});
  std::vector<JobState> states;
  states.reserve(it->snapshot.n());
  const double dt = t - it->start;
  for (const auto& job : it->snapshot.active()) {
    const double s = it->allocation.speed_of(job.id());
    const double work = std::min(s * dt, job.remaining_in_phase());
    if (work >= job.remaining_in_phase() && from_left) {
      // Left limit at the phase boundary: keep the job in its closing phase.
      states.push_back(JobState::at(job.spec(), job.current_phase(), 0.0));
    } else {
      states.push_back(job.advance(s, work / (s > 0.0 ? s : 1.0)));
    }
  }
  std::erase_if(states, [](const JobState& s) { return s.complete(); });
  return SystemSnapshot(t, trace.servers, std::move(states));
}

}  // namespace elastic
