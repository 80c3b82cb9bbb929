#pragma once

// Straightforward O(n) per event simulator built only from the public
// per-instant operations. Used to cross-check the indexed engine.

#include <deque>
#include <map>
#include <vector>

#include "elastic/engine.hpp"

namespace testing_support {

struct ReferenceResult {
  double flow_time = 0.0;
  std::map<elastic::JobId, double> completions;
};

inline ReferenceResult reference_run(const std::vector<elastic::JobSpec>& workload,
                                     elastic::PolicyKind policy, const elastic::PolicyParams& params,
                                     const elastic::SpeedupFunction& f, double servers) {
  using namespace elastic;
  const auto jobs = normalized_workload(workload);
  ReferenceResult out;
  std::vector<JobState> active;
  std::size_t next = 0;
  double t = jobs.empty() ? 0.0 : jobs.front().arrival;
  while (true) {
    while (next < jobs.size() && jobs[next].arrival <= t) active.emplace_back(jobs[next++]);
    const SystemSnapshot snap(t, servers, active);
    Allocation alloc;
    if (!snap.empty()) alloc = allocate(policy, snap, params, f);
    std::optional<double> arrival;
    if (next < jobs.size()) arrival = jobs[next].arrival;
    const auto ev = next_event(snap, alloc, arrival);
    if (!ev) break;
    const double dt = ev->time - t;
    std::vector<JobState> moved;
    for (const auto& j : snap.active()) {
      const double s = alloc.speed_of(j.id());
      const double d = std::min(dt, s > 0 ? j.remaining_in_phase() / s : dt);
      JobState n = j.advance(s, d);
      if (n.current_phase() == j.current_phase() && n.remaining_in_phase() <= kWorkTolerance) {
        n = JobState::at(j.spec(), j.current_phase() + 1, j.current_phase() + 1 < j.spec().phases.size()
                                                             ? j.spec().phases[j.current_phase() + 1].size
                                                             : 0.0);
      }
      if (n.complete()) {
        out.completions[n.id()] = ev->time;
        out.flow_time += ev->time - n.arrival();
      } else {
        moved.push_back(n);
      }
    }
    active = std::move(moved);
    t = ev->time;
  }
  return out;
}

}  // namespace testing_support
