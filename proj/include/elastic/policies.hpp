#pragma once

// Scheduling policies. Every policy reads only the counts of outstanding jobs
// per phase and their arrival order, so its decision is expressed as a short
// list of grants: "the jobs of population X with arrival rank in [first,
// first + count) run at this speed". The engine applies grants directly to
// its indexed job store; `expand` turns them into a per-job Allocation.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "elastic/core.hpp"

namespace elastic {

enum class PolicyKind { FractionalLcfs, PaEqui, BlindEqui, InelasticFirst, PaFcfs };

inline std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::FractionalLcfs: return "fractional_lcfs";
    case PolicyKind::PaEqui: return "pa_equi";
    case PolicyKind::BlindEqui: return "equi";
    case PolicyKind::InelasticFirst: return "inelastic_first";
    case PolicyKind::PaFcfs: return "pa_fcfs";
  }
  return "unknown";
}

inline PolicyKind parse_policy_kind(std::string_view name) {
  if (name == "fractional_lcfs" || name == "flcfs") return PolicyKind::FractionalLcfs;
  if (name == "pa_equi") return PolicyKind::PaEqui;
  if (name == "equi" || name == "blind_equi") return PolicyKind::BlindEqui;
  if (name == "inelastic_first" || name == "if") return PolicyKind::InelasticFirst;
  if (name == "pa_fcfs" || name == "fcfs") return PolicyKind::PaFcfs;
  throw ValidationError("unknown policy '" + std::string(name) + "'");
}

/// Tunables of Fractional-LCFS (beta, theta) and PA-EQUI (delta).
/// beta = 1 is accepted because the simulation study runs it.
struct PolicyParams {
  double beta = 0.5;
  double theta = 0.25;
  double delta = 0.25;

  void validate() const {
    if (!(theta > 0.0 && theta < beta && beta <= 1.0)) {
      throw ValidationError("policy parameters need 0 < theta < beta <= 1 (beta=" +
                            std::to_string(beta) + ", theta=" + std::to_string(theta) + ")");
    }
    if (!(delta > 0.0 && delta < 1.0)) {
      throw ValidationError("policy parameter delta must lie in (0, 1)");
    }
  }
};

/// Which branch of a case-split policy produced an allocation.
enum class PolicyBranch : std::uint8_t { CaseI, CaseIIa, CaseIIb, Single };

inline std::string_view to_string(PolicyBranch b) {
  switch (b) {
    case PolicyBranch::CaseI: return "I";
    case PolicyBranch::CaseIIa: return "IIa";
    case PolicyBranch::CaseIIb: return "IIb";
    case PolicyBranch::Single: return "-";
  }
  return "?";
}

enum class Population : std::uint8_t { All, Elastic, Inelastic };

/// Ranks count from the oldest outstanding job of the population (0-based).
struct Grant {
  Population population = Population::All;
  std::size_t first = 0;
  std::size_t count = 0;
  Assignment elastic;
  Assignment inelastic;
};

struct Plan {
  PolicyBranch branch = PolicyBranch::Single;
  std::vector<Grant> grants;
};

/// What a policy may look at.
template <class V>
concept SnapshotView = requires(const V& v, std::size_t rank) {
  { v.servers() } -> std::convertible_to<double>;
  { v.n() } -> std::convertible_to<std::size_t>;
  { v.n_elastic() } -> std::convertible_to<std::size_t>;
  { v.n_inelastic() } -> std::convertible_to<std::size_t>;
  { v.kind_at(rank) } -> std::same_as<PhaseKind>;
};

/// ceil(x) that ignores floating-point noise just above an integer.
inline std::size_t ceil_count(double x) {
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::ceil(x));
}

inline std::size_t floor_servers(double servers) {
  return static_cast<std::size_t>(std::floor(servers + 1e-9));
}

namespace detail {

inline Grant newest(Population pop, std::size_t population_size, std::size_t count,
                    Assignment elastic, Assignment inelastic) {
  return Grant{pop, population_size - count, count, elastic, inelastic};
}

inline void require_jobs(std::size_t n) {
  if (n == 0) throw ContractViolation("policy invoked on an empty snapshot");
}

}  // namespace detail

template <SnapshotView V>
Plan plan_fractional_lcfs(const V& view, const PolicyParams& params, const SpeedupFunction& f) {
  const std::size_t n = view.n();
  detail::require_jobs(n);
  const std::size_t n_e = view.n_elastic();
  const std::size_t n_i = view.n_inelastic();
  const double servers = view.servers();
  const double beta_n = params.beta * static_cast<double>(n);

  Plan plan;
  if (servers / beta_n <= 1.0) {
    plan.branch = PolicyBranch::CaseI;
    const std::size_t m = std::min(n, std::max<std::size_t>(1, ceil_count(beta_n)));
    const double share = servers / static_cast<double>(m);
    const double s = f.p(share);
    plan.grants.push_back(detail::newest(Population::All, n, m, {share, s},
                                         {share, std::min(1.0, s)}));
    return plan;
  }
  if (n_i >= ceil_count(params.theta * static_cast<double>(n))) {
    plan.branch = PolicyBranch::CaseIIa;
    const std::size_t c = std::min(n_i, floor_servers(servers));
    if (c > 0) {
      plan.grants.push_back(detail::newest(Population::Inelastic, n_i, c, {}, {1.0, 1.0}));
    }
    if (n_e > 0) {
      const std::size_t m_e =
          std::min(n_e, std::max<std::size_t>(1, ceil_count(params.beta * static_cast<double>(n_e))));
      const double share = std::max(0.0, servers - static_cast<double>(c)) / static_cast<double>(m_e);
      plan.grants.push_back(
          detail::newest(Population::Elastic, n_e, m_e, {share, f.p(share)}, {}));
    }
    return plan;
  }
  plan.branch = PolicyBranch::CaseIIb;
  const std::size_t m = std::min(n, std::max<std::size_t>(1, ceil_count(beta_n)));
  const double share = servers / static_cast<double>(m);
  plan.grants.push_back(detail::newest(Population::All, n, m, {share, f.p(share)}, {}));
  return plan;
}

template <SnapshotView V>
Plan plan_pa_equi(const V& view, const PolicyParams& params, const SpeedupFunction& f) {
  const std::size_t n = view.n();
  detail::require_jobs(n);
  const std::size_t n_e = view.n_elastic();
  const std::size_t n_i = view.n_inelastic();
  const double servers = view.servers();

  Plan plan;
  if (servers / static_cast<double>(n) <= 1.0) {
    plan.branch = PolicyBranch::CaseI;
    const double share = servers / static_cast<double>(n);
    const double s = f.p(share);
    plan.grants.push_back(Grant{Population::All, 0, n, {share, s}, {share, std::min(1.0, s)}});
    return plan;
  }
  if (n_i >= ceil_count(params.delta * static_cast<double>(n))) {
    plan.branch = PolicyBranch::CaseIIa;
    plan.grants.push_back(Grant{Population::Inelastic, 0, n_i, {}, {1.0, 1.0}});
    if (n_e > 0) {
      const double share = (servers - static_cast<double>(n_i)) / static_cast<double>(n_e);
      plan.grants.push_back(Grant{Population::Elastic, 0, n_e, {share, f.p(share)}, {}});
    }
    return plan;
  }
  plan.branch = PolicyBranch::CaseIIb;
  const double share = servers / static_cast<double>(n_e);
  plan.grants.push_back(Grant{Population::Elastic, 0, n_e, {share, f.p(share)}, {}});
  return plan;
}

/// Phase-unaware equal split; in-elastic jobs cannot use more than unit speed
/// and the excess is lost.
template <SnapshotView V>
Plan plan_blind_equi(const V& view, const SpeedupFunction& f) {
  const std::size_t n = view.n();
  detail::require_jobs(n);
  const double share = view.servers() / static_cast<double>(n);
  const double s = f.p(share);
  return Plan{PolicyBranch::Single,
              {Grant{Population::All, 0, n, {share, s}, {share, std::min(1.0, s)}}}};
}

/// Oldest in-elastic jobs first at unit speed; what is left is split equally
/// over the elastic jobs.
template <SnapshotView V>
Plan plan_inelastic_first(const V& view, const SpeedupFunction& f) {
  const std::size_t n = view.n();
  detail::require_jobs(n);
  const std::size_t n_e = view.n_elastic();
  const std::size_t n_i = view.n_inelastic();
  const double servers = view.servers();
  Plan plan;
  const std::size_t c = std::min(n_i, floor_servers(servers));
  if (c > 0) plan.grants.push_back(Grant{Population::Inelastic, 0, c, {}, {1.0, 1.0}});
  const double rest = servers - static_cast<double>(c);
  if (n_e > 0 && rest > 1e-12) {
    const double share = rest / static_cast<double>(n_e);
    plan.grants.push_back(Grant{Population::Elastic, 0, n_e, {share, f.p(share)}, {}});
  }
  return plan;
}

/// Arrival-order scan: in-elastic jobs take one server, the first elastic job
/// met takes everything still free.
template <SnapshotView V>
Plan plan_pa_fcfs(const V& view, const SpeedupFunction& f) {
  const std::size_t n = view.n();
  detail::require_jobs(n);
  Plan plan;
  double free = view.servers();
  for (std::size_t k = 0; k < n && free > 1e-12; ++k) {
    if (view.kind_at(k) == PhaseKind::Inelastic) {
      const double share = std::min(1.0, free);
      plan.grants.push_back(Grant{Population::All, k, 1, {}, {share, std::min(1.0, f.p(share))}});
      free -= share;
    } else {
      plan.grants.push_back(Grant{Population::All, k, 1, {free, f.p(free)}, {}});
      free = 0.0;
    }
  }
  return plan;
}

template <SnapshotView V>
Plan plan_policy(PolicyKind kind, const V& view, const PolicyParams& params,
                 const SpeedupFunction& f) {
  switch (kind) {
    case PolicyKind::FractionalLcfs: return plan_fractional_lcfs(view, params, f);
    case PolicyKind::PaEqui: return plan_pa_equi(view, params, f);
    case PolicyKind::BlindEqui: return plan_blind_equi(view, f);
    case PolicyKind::InelasticFirst: return plan_inelastic_first(view, f);
    case PolicyKind::PaFcfs: return plan_pa_fcfs(view, f);
  }
  throw ValidationError("unknown policy kind");
}

/// Per-job allocation for a snapshot. Every active job gets an entry; jobs no
/// grant covers get zero servers.
inline Allocation expand(const Plan& plan, const SystemSnapshot& snapshot) {
  Allocation alloc;
  std::size_t rank_all = 0, rank_e = 0, rank_i = 0;
  for (const auto& job : snapshot.active()) {
    const PhaseKind kind = job.kind();
    const std::size_t rank_kind = kind == PhaseKind::Elastic ? rank_e++ : rank_i++;
    Assignment a;
    for (const auto& g : plan.grants) {
      std::size_t rank = rank_all;
      if (g.population == Population::Elastic) {
        if (kind != PhaseKind::Elastic) continue;
        rank = rank_kind;
      } else if (g.population == Population::Inelastic) {
        if (kind != PhaseKind::Inelastic) continue;
        rank = rank_kind;
      }
      if (rank >= g.first && rank < g.first + g.count) {
        a = kind == PhaseKind::Elastic ? g.elastic : g.inelastic;
        break;
      }
    }
    alloc.entries.emplace(job.id(), a);
    ++rank_all;
  }
  return alloc;
}

inline Allocation fractional_lcfs(const SystemSnapshot& s, const PolicyParams& params,
                                  const SpeedupFunction& f) {
  return expand(plan_fractional_lcfs(s, params, f), s);
}

inline Allocation pa_equi(const SystemSnapshot& s, const PolicyParams& params,
                          const SpeedupFunction& f) {
  return expand(plan_pa_equi(s, params, f), s);
}

inline Allocation blind_equi(const SystemSnapshot& s, const SpeedupFunction& f) {
  return expand(plan_blind_equi(s, f), s);
}

inline Allocation inelastic_first(const SystemSnapshot& s, const SpeedupFunction& f) {
  return expand(plan_inelastic_first(s, f), s);
}

inline Allocation pa_fcfs(const SystemSnapshot& s, const SpeedupFunction& f) {
  return expand(plan_pa_fcfs(s, f), s);
}

inline Allocation allocate(PolicyKind kind, const SystemSnapshot& s, const PolicyParams& params,
                           const SpeedupFunction& f) {
  return expand(plan_policy(kind, s, params, f), s);
}

/// True iff the allocation respects total capacity and the unit-speed cap of
/// in-elastic jobs. Throws if an entry names a job that is not active.
inline bool check_feasible(const Allocation& alloc, const SystemSnapshot& snapshot,
                           const SpeedupFunction& f) {
  double used = 0.0;
  for (const auto& [id, a] : alloc.entries) {
    const JobState* job = snapshot.find(id);
    if (job == nullptr) {
      throw ContractViolation("allocation entry for job " + std::to_string(id) +
                              " which is not active");
    }
    if (!(a.speed >= 0.0)) return false;
    if (job->kind() == PhaseKind::Inelastic && a.speed > 1.0 + 1e-12) return false;
    used += f.p_inverse(a.speed);
  }
  return used <= snapshot.servers() * (1.0 + kCapacityTolerance);
}

}  // namespace elastic
