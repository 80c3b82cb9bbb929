#pragma once

// Reference values for the offline optimum: a contention-free lower bound and
// a lattice search over discretized schedules for instances of up to 3 jobs.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "elastic/core.hpp"
#include "elastic/engine.hpp"

namespace elastic {

/// Every job alone on the whole system: elastic work at P(N), in-elastic at 1.
inline double opt_lower_bound(std::span<const JobSpec> jobs, double servers, const SpeedupFunction& f) {
  if (!(servers > 0.0)) throw ValidationError("servers must be > 0");
  const double pn = f.p(servers);
  const double inelastic_speed = std::min(servers, 1.0);
  double total = 0.0;
  for (const auto& j : jobs) {
    validate(j);
    for (const auto& p : j.phases) total += p.kind == PhaseKind::Elastic ? p.size / pn : p.size / inelastic_speed;
  }
  return total;
}

class InstanceTooLarge : public std::length_error {
 public:
  using std::length_error::length_error;
};

struct BruteForceOptions {
  double speed_step = 0.1;  // speeds are multiples of this
  double dt = 0.1;          // allocations are constant over [k dt, (k+1) dt)
  std::size_t max_jobs = 3;
  std::size_t max_states = 200'000'000;
};

struct BruteForceResult {
  double flow_time = 0.0;    // flow time of the best lattice schedule; never below OPT
  double lower_bound = 0.0;  // opt_lower_bound of the same instance
  double speed_step = 0.0;
  double dt = 0.0;
  std::size_t states = 0;

  double slack() const { return flow_time - lower_bound; }
  bool brackets(double x, double tol = 1e-9) const {
    return x >= lower_bound - tol * (1.0 + x) && x <= flow_time + tol * (1.0 + x);
  }
};

namespace detail {

// One job on the lattice. Work is counted in quanta of speed_step * dt, so a
// job at speed m * speed_step finishes exactly m quanta per step.
struct LatticeJob {
  std::vector<std::int32_t> phase_end;  // cumulative quanta remaining after each phase, descending
  std::vector<PhaseKind> kinds;
  std::int32_t total = 0;
  std::int64_t arrival_step = 0;
  double arrival_offset = 0.0;  // rounded-up arrival minus true arrival
};

class Lattice {
 public:
  Lattice(std::span<const JobSpec> jobs, double servers, const SpeedupFunction& f, const BruteForceOptions& o)
      : servers_(servers), dt_(o.dt) {
    const double quantum = o.speed_step * o.dt;
    for (const auto& j : jobs) {
      LatticeJob lj;
      for (const auto& p : j.phases) {
        lj.kinds.push_back(p.kind);
        lj.total += static_cast<std::int32_t>(std::ceil(p.size / quantum - 1e-9));
      }
      std::int32_t rem = lj.total;
      for (const auto& p : j.phases) {
        rem -= static_cast<std::int32_t>(std::ceil(p.size / quantum - 1e-9));
        lj.phase_end.push_back(rem);
      }
      lj.arrival_step = static_cast<std::int64_t>(std::ceil(j.arrival / o.dt - 1e-9));
      lj.arrival_offset = lj.arrival_step * o.dt - j.arrival;
      last_arrival_ = std::max(last_arrival_, lj.arrival_step);
      jobs_.push_back(std::move(lj));
    }
    // Server cost of speed index m for each phase kind.
    const double cap = servers * (1.0 + kCapacityTolerance);
    for (int m = 0;; ++m) {
      const double s = m * o.speed_step;
      const double k = f.p_inverse(s);
      if (k > cap) break;
      elastic_cost_.push_back(k);
    }
    for (int m = 0; m * o.speed_step <= 1.0 + 1e-12 && m * o.speed_step <= cap; ++m) {
      inelastic_cost_.push_back(m * o.speed_step);
    }

    std::size_t size = static_cast<std::size_t>(last_arrival_ + 1);
    for (const auto& j : jobs_) {
      if (j.total > 100'000) throw InstanceTooLarge("job needs more than 1e5 work quanta");
      stride_.push_back(size);
      const std::size_t next = size * static_cast<std::size_t>(j.total + 1);
      if (next / static_cast<std::size_t>(j.total + 1) != size || next > o.max_states) {
        throw InstanceTooLarge("lattice exceeds " + std::to_string(o.max_states) + " states");
      }
      size = next;
    }
    memo_.assign(size, std::numeric_limits<double>::quiet_NaN());
  }

  double solve() {
    State rem{};
    double offset = 0.0;
    for (std::size_t i = 0; i < jobs_.size(); ++i) {
      rem[i] = jobs_[i].total;
      offset += jobs_[i].arrival_offset;
    }
    return offset + cost(0, rem);
  }

  std::size_t states() const { return memo_.size(); }

 private:
  static constexpr std::size_t kMaxJobs = 3;
  using State = std::array<std::int32_t, kMaxJobs>;

  std::size_t index(std::int64_t step, const State& rem) const {
    std::size_t idx = static_cast<std::size_t>(std::min(step, last_arrival_));
    for (std::size_t i = 0; i < jobs_.size(); ++i) idx += stride_[i] * static_cast<std::size_t>(rem[i]);
    return idx;
  }

  // Quanta left in the current phase and whether it is the job's last.
  std::pair<std::int32_t, bool> phase_left(std::size_t i, std::int32_t rem, PhaseKind& kind) const {
    const auto& j = jobs_[i];
    for (std::size_t p = 0; p < j.phase_end.size(); ++p) {
      if (rem > j.phase_end[p]) {
        kind = j.kinds[p];
        return {rem - j.phase_end[p], p + 1 == j.phase_end.size()};
      }
    }
    kind = PhaseKind::Elastic;
    return {0, true};
  }

  // Minimal remaining flow time from the start of step `step`.
  double cost(std::int64_t step, const State& rem) {
    bool any = false;
    for (std::int32_t r : rem) any = any || r > 0;
    if (!any) return 0.0;
    double& slot = memo_[index(step, rem)];
    if (!std::isnan(slot)) return slot;

    struct Choice {
      std::int32_t left = 0;
      std::int32_t top = 0;  // useful speed indices are 0..top
      bool last = false;
      const std::vector<double>* cost = nullptr;
    };
    std::array<Choice, kMaxJobs> ch{};
    std::array<std::size_t, kMaxJobs> present{};
    std::size_t np = 0;
    for (std::size_t i = 0; i < jobs_.size(); ++i) {
      if (rem[i] == 0 || jobs_[i].arrival_step > step) continue;
      PhaseKind kind;
      const auto [left, last] = phase_left(i, rem[i], kind);
      const auto* c = kind == PhaseKind::Elastic ? &elastic_cost_ : &inelastic_cost_;
      // Past the end of a non-final phase, extra speed is wasted.
      const auto top = static_cast<std::int32_t>(c->size()) - 1;
      ch[i] = {left, last ? top : std::min(top, left), last, c};
      present[np++] = i;
    }

    const double cap = servers_ * (1.0 + kCapacityTolerance);
    double best = std::numeric_limits<double>::infinity();
    State speed{};
    const auto finish = [&] {
      double here = 0.0;
      State next = rem;
      for (std::size_t a = 0; a < np; ++a) {
        const std::size_t k = present[a];
        const std::int32_t m = speed[k];
        if (ch[k].last && m >= ch[k].left) {
          here += dt_ * ch[k].left / m;  // finishes inside the step
          next[k] = 0;
        } else {
          here += dt_;
          next[k] -= std::min(m, ch[k].left);
        }
      }
      best = std::min(best, here + cost(step + 1, next));
    };
    // Less remaining work is never worse, so the last job takes all the
    // speed the leftover capacity allows.
    const auto pick = [&](auto&& self, std::size_t a, double used) -> void {
      const std::size_t i = present[a];
      const auto& c = *ch[i].cost;
      if (a + 1 == np) {
        std::int32_t m = ch[i].top;
        while (m > 0 && used + c[static_cast<std::size_t>(m)] > cap) --m;
        speed[i] = m;
        if (m > 0 || step < last_arrival_) finish();
        // Waiting for an arrival can beat working when nothing else moves.
        return;
      }
      for (std::int32_t m = 0; m <= ch[i].top && used + c[static_cast<std::size_t>(m)] <= cap; ++m) {
        speed[i] = m;
        self(self, a + 1, used + c[static_cast<std::size_t>(m)]);
      }
    };
    if (np == 0) {
      finish();  // nobody present yet: wait for the next arrival
    } else {
      pick(pick, 0, 0.0);
    }
    slot = best;
    return best;
  }

  double servers_;
  double dt_;
  std::vector<LatticeJob> jobs_;
  std::vector<double> elastic_cost_, inelastic_cost_;
  std::vector<std::size_t> stride_;
  std::int64_t last_arrival_ = 0;
  std::vector<double> memo_;
};

}  // namespace detail

/// Best schedule whose speeds are multiples of speed_step, held constant over
/// steps of length dt. Arrivals and phase sizes are rounded up to the lattice,
/// so the result is the flow time of a feasible schedule and is >= OPT.
inline BruteForceResult brute_force_opt(std::span<const JobSpec> jobs, double servers, const SpeedupFunction& f,
                                        const BruteForceOptions& o = {}) {
  if (jobs.size() > std::min<std::size_t>(o.max_jobs, 3)) {
    throw InstanceTooLarge("brute force handles at most " + std::to_string(o.max_jobs) + " jobs, got " +
                           std::to_string(jobs.size()));
  }
  if (!(o.speed_step > 0.0) || !(o.dt > 0.0)) throw ValidationError("speed_step and dt must be > 0");
  BruteForceResult r;
  r.lower_bound = opt_lower_bound(jobs, servers, f);
  r.speed_step = o.speed_step;
  r.dt = o.dt;
  if (jobs.empty()) return r;
  detail::Lattice lattice(jobs, servers, f, o);
  r.flow_time = lattice.solve();
  r.states = lattice.states();
  return r;
}

/// Flow time of the trace over opt_lower_bound. The denominator never exceeds
/// OPT, so the ratio is at least the true per-instance ratio.
inline double empirical_ratio(const Trace& trace) {
  if (!trace.workload) throw ValidationError("trace has no workload");
  const double lb = opt_lower_bound(*trace.workload, trace.servers, SpeedupFunction(trace.alpha));
  if (!(lb > 0.0)) throw ValidationError("empirical ratio undefined for an empty workload");
  return trace.flow_time / lb;
}

}  // namespace elastic
