#pragma once

// Domain types shared by the scheduler, engine and analysis headers: the
// speedup function, static job descriptions and the dynamic per-job state.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace elastic {

/// Absolute tolerance for work and phase-boundary comparisons.
inline constexpr double kWorkTolerance = 1e-9;
/// Relative tolerance for the server-capacity constraint.
inline constexpr double kCapacityTolerance = 1e-9;

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when a caller breaks an operation's precondition (e.g. stepping a
/// job past a phase boundary).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Speedup k -> k^{1/alpha} for alpha > 1, together with its companion
/// Q(x) = x / P(x) = x^{1 - 1/alpha} and the inverse P^{-1}(s) = s^alpha.
class SpeedupFunction {
 public:
  explicit SpeedupFunction(double alpha) : alpha_(alpha) {
    if (!(alpha > 1.0) || !std::isfinite(alpha)) {
      throw DomainError("speedup exponent alpha must be finite and > 1, got " +
                        std::to_string(alpha));
    }
  }

  double alpha() const noexcept { return alpha_; }

  double p(double servers) const {
    require_non_negative(servers, "P");
    if (alpha_ == 2.0) return std::sqrt(servers);
    return std::pow(servers, 1.0 / alpha_);
  }

  double q(double x) const {
    require_non_negative(x, "Q");
    if (alpha_ == 2.0) return std::sqrt(x);
    return std::pow(x, 1.0 - 1.0 / alpha_);
  }

  double p_inverse(double speed) const {
    require_non_negative(speed, "P^-1");
    if (alpha_ == 2.0) return speed * speed;
    return std::pow(speed, alpha_);
  }

 private:
  static void require_non_negative(double x, const char* what) {
    if (!(x >= 0.0)) {
      throw DomainError(std::string(what) + " is undefined for negative argument " +
                        std::to_string(x));
    }
  }

  double alpha_;
};

inline double speedup_p(const SpeedupFunction& f, double x) { return f.p(x); }
inline double speedup_q(const SpeedupFunction& f, double x) { return f.q(x); }
inline double speedup_p_inverse(const SpeedupFunction& f, double s) { return f.p_inverse(s); }

enum class PhaseKind : std::uint8_t { Elastic, Inelastic };

inline std::string_view to_string(PhaseKind kind) {
  return kind == PhaseKind::Elastic ? "elastic" : "inelastic";
}

inline PhaseKind other(PhaseKind kind) {
  return kind == PhaseKind::Elastic ? PhaseKind::Inelastic : PhaseKind::Elastic;
}

struct PhaseSpec {
  PhaseKind kind = PhaseKind::Elastic;
  double size = 0.0;

  friend bool operator==(const PhaseSpec&, const PhaseSpec&) = default;
};

using JobId = std::int64_t;

struct JobSpec {
  JobId id = 0;
  double arrival = 0.0;
  std::vector<PhaseSpec> phases;

  double total_work() const {
    double w = 0.0;
    for (const auto& ph : phases) w += ph.size;
    return w;
  }

  friend bool operator==(const JobSpec&, const JobSpec&) = default;
};

/// Throws ValidationError unless the job has a non-negative finite arrival
/// and at least one phase, every phase of positive finite size.
inline void validate(const JobSpec& job) {
  if (!(job.id >= 0)) throw ValidationError("job id must be non-negative");
  if (!(job.arrival >= 0.0) || !std::isfinite(job.arrival)) {
    throw ValidationError("job " + std::to_string(job.id) + ": arrival must be finite and >= 0");
  }
  if (job.phases.empty()) {
    throw ValidationError("job " + std::to_string(job.id) + ": needs at least one phase");
  }
  for (std::size_t i = 0; i < job.phases.size(); ++i) {
    const double s = job.phases[i].size;
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw ValidationError("job " + std::to_string(job.id) + " phase " + std::to_string(i) +
                            ": size must be finite and > 0");
    }
  }
}

/// Arrival order used everywhere: by arrival time, ties by id.
inline bool arrives_before(const JobSpec& a, const JobSpec& b) {
  if (a.arrival != b.arrival) return a.arrival < b.arrival;
  return a.id < b.id;
}

/// Sorts a workload into arrival order and checks ids are unique.
inline std::vector<JobSpec> normalized_workload(std::vector<JobSpec> jobs) {
  for (const auto& j : jobs) validate(j);
  std::sort(jobs.begin(), jobs.end(), arrives_before);
  std::vector<JobId> ids;
  ids.reserve(jobs.size());
  for (const auto& j : jobs) ids.push_back(j.id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw ValidationError("workload contains duplicate job ids");
  }
  return jobs;
}

/// Remaining-work state of one job. Holds a non-owning pointer to its spec;
/// the spec must outlive the state.
class JobState {
 public:
  JobState() = default;

  explicit JobState(const JobSpec& spec) : spec_(&spec) {
    remaining_in_phase_ = spec.phases.front().size;
    for (const auto& ph : spec.phases) {
      remaining_total_ += ph.size;
      if (ph.kind == PhaseKind::Inelastic) remaining_inelastic_ += ph.size;
    }
  }

  /// Builds a state positioned inside phase `phase` with `remaining` work left
  /// in it.
  static JobState at(const JobSpec& spec, std::size_t phase, double remaining) {
    JobState s(spec);
    if (phase > spec.phases.size()) throw ContractViolation("phase index out of range");
    if (phase == spec.phases.size()) {
      s.phase_ = phase;
      s.remaining_in_phase_ = s.remaining_total_ = s.remaining_inelastic_ = 0.0;
      return s;
    }
    if (remaining < 0.0 || remaining > spec.phases[phase].size + kWorkTolerance) {
      throw ContractViolation("remaining work outside the phase size");
    }
    s.phase_ = phase;
    s.remaining_in_phase_ = remaining;
    s.remaining_total_ = remaining;
    s.remaining_inelastic_ = spec.phases[phase].kind == PhaseKind::Inelastic ? remaining : 0.0;
    for (std::size_t i = phase + 1; i < spec.phases.size(); ++i) {
      s.remaining_total_ += spec.phases[i].size;
      if (spec.phases[i].kind == PhaseKind::Inelastic) s.remaining_inelastic_ += spec.phases[i].size;
    }
    return s;
  }

  const JobSpec& spec() const { return *spec_; }
  JobId id() const { return spec_->id; }
  double arrival() const { return spec_->arrival; }
  std::size_t current_phase() const { return phase_; }
  bool complete() const { return phase_ >= spec_->phases.size(); }
  PhaseKind kind() const { return spec_->phases.at(phase_).kind; }
  double remaining_in_phase() const { return remaining_in_phase_; }
  double remaining_total() const { return remaining_total_; }
  double remaining_inelastic() const { return remaining_inelastic_; }

  /// Runs the job at `speed` for `duration`. The work done may not exceed the
  /// remaining work of the current phase by more than kWorkTolerance; a phase
  /// that reaches zero is closed and the next one opened.
  JobState advance(double speed, double duration) const {
    if (!(speed >= 0.0) || !(duration >= 0.0)) {
      throw ContractViolation("advance needs non-negative speed and duration");
    }
    if (complete()) {
      if (speed * duration > 0.0) throw ContractViolation("advancing a completed job");
      return *this;
    }
    const double work = speed * duration;
    if (work > remaining_in_phase_ + kWorkTolerance) {
      throw ContractViolation("advance would step past the end of phase " +
                              std::to_string(phase_) + " of job " + std::to_string(id()));
    }
    JobState next = *this;
    if (work == 0.0) return next;
    const bool inelastic = kind() == PhaseKind::Inelastic;
    next.remaining_total_ = std::max(0.0, remaining_total_ - work);
    if (inelastic) next.remaining_inelastic_ = std::max(0.0, remaining_inelastic_ - work);
    next.remaining_in_phase_ = remaining_in_phase_ - work;
    if (next.remaining_in_phase_ <= kWorkTolerance) next.close_phase();
    return next;
  }

 private:
  void close_phase() {
    // Recompute from the spec so no rounding residue survives the boundary.
    ++phase_;
    remaining_in_phase_ = remaining_total_ = remaining_inelastic_ = 0.0;
    if (complete()) return;
    remaining_in_phase_ = spec_->phases[phase_].size;
    for (std::size_t i = phase_; i < spec_->phases.size(); ++i) {
      remaining_total_ += spec_->phases[i].size;
      if (spec_->phases[i].kind == PhaseKind::Inelastic) remaining_inelastic_ += spec_->phases[i].size;
    }
  }

  const JobSpec* spec_ = nullptr;
  std::size_t phase_ = 0;
  double remaining_in_phase_ = 0.0;
  double remaining_total_ = 0.0;
  double remaining_inelastic_ = 0.0;
};

inline JobState advance(const JobState& job, double speed, double duration) {
  return job.advance(speed, duration);
}

/// The set of outstanding jobs at one instant, in arrival order.
class SystemSnapshot {
 public:
  SystemSnapshot(double time, double servers, std::vector<JobState> active)
      : time_(time), servers_(servers), active_(std::move(active)) {
    if (!(servers > 0.0) || !std::isfinite(servers)) {
      throw DomainError("number of servers must be finite and > 0");
    }
    std::sort(active_.begin(), active_.end(), [](const JobState& a, const JobState& b) {
      return arrives_before(a.spec(), b.spec());
    });
    for (const auto& j : active_) {
      if (j.complete()) throw ContractViolation("snapshot contains a completed job");
      if (j.kind() == PhaseKind::Elastic) ++elastic_; else ++inelastic_;
    }
  }

  double time() const { return time_; }
  double servers() const { return servers_; }
  const std::vector<JobState>& active() const { return active_; }
  std::size_t n() const { return active_.size(); }
  std::size_t n_elastic() const { return elastic_; }
  std::size_t n_inelastic() const { return inelastic_; }
  bool empty() const { return active_.empty(); }
  PhaseKind kind_at(std::size_t rank) const { return active_.at(rank).kind(); }

  const JobState* find(JobId id) const {
    for (const auto& j : active_) {
      if (j.id() == id) return &j;
    }
    return nullptr;
  }

 private:
  double time_;
  double servers_;
  std::vector<JobState> active_;
  std::size_t elastic_ = 0;
  std::size_t inelastic_ = 0;
};

struct Assignment {
  double servers = 0.0;
  double speed = 0.0;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

/// Per-job server shares and speeds at one instant.
struct Allocation {
  std::map<JobId, Assignment> entries;

  double speed_of(JobId id) const {
    auto it = entries.find(id);
    return it == entries.end() ? 0.0 : it->second.speed;
  }
};

}  // namespace elastic
