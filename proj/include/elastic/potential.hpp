#pragma once

// Potential functions evaluated along a pair of traces (the algorithm and a
// comparison schedule of the same workload), with numeric checks of their
// jump and drift properties.
//
//   online:    Phi    = c1 * sum_{j in A} P(r_j)/P(N) (w_j^A - w_j^o)^+  + c2 * Phi2
//   time-zero: Phi^sf = c1 * P(n/N) * sum_{j in A} (q_j^A - q_j^o)^+     + c2 * Phi2
//   Phi2 = sum_A (remaining in-elastic work) - sum_O (remaining in-elastic work)
//
// r_j is the 1-based arrival rank among the algorithm's outstanding jobs and
// r/Q(r) = P(r). The comparison's remaining work is 0 for jobs it finished.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "elastic/bounds.hpp"
#include "elastic/core.hpp"
#include "elastic/engine.hpp"

namespace elastic {

struct PotentialEval {
  double time = 0.0;
  double phi1 = 0.0;
  double phi2 = 0.0;
  double phi_total = 0.0;
  double phi_sf1 = 0.0;
  double phi_sf_total = 0.0;
  // Sums of absolute term contributions; the rounding error of the totals
  // is proportional to these, not to the (possibly cancelling) totals.
  double scale = 0.0;
  double sf_scale = 0.0;
};

namespace detail {

struct CmpView {
  std::unordered_map<JobId, const JobState*> by_id;

  CmpView(const SystemSnapshot& alg, const SystemSnapshot& cmp) {
    if (alg.time() != cmp.time()) throw ValidationError("snapshots taken at different times");
    for (const auto& j : cmp.active()) by_id.emplace(j.id(), &j);
    for (const auto& j : alg.active()) {
      auto it = by_id.find(j.id());
      if (it != by_id.end() && !(it->second->spec() == j.spec())) {
        throw ValidationError("snapshots belong to different workloads (job " + std::to_string(j.id()) + ")");
      }
    }
  }

  const JobState* find(JobId id) const {
    auto it = by_id.find(id);
    return it == by_id.end() ? nullptr : it->second;
  }
};

inline std::pair<double, double> phi2(const SystemSnapshot& alg, const SystemSnapshot& cmp) {
  double a = 0.0, o = 0.0;
  for (const auto& j : alg.active()) a += j.remaining_inelastic();
  for (const auto& j : cmp.active()) o += j.remaining_inelastic();
  return {a - o, a + o};
}

}  // namespace detail

inline PotentialEval phi_online(const SystemSnapshot& alg, const SystemSnapshot& cmp, double c1,
                                double c2, const SpeedupFunction& f) {
  const detail::CmpView view(alg, cmp);
  PotentialEval e;
  e.time = alg.time();
  const double pn = f.p(alg.servers());
  std::size_t rank = 0;
  for (const auto& j : alg.active()) {
    ++rank;
    const JobState* o = view.find(j.id());
    const double gap = j.remaining_total() - (o ? o->remaining_total() : 0.0);
    if (gap > 0.0) e.phi1 += f.p(static_cast<double>(rank)) / pn * gap;
  }
  const auto [p2, p2_abs] = detail::phi2(alg, cmp);
  e.phi2 = p2;
  e.phi_total = c1 * e.phi1 + c2 * e.phi2;
  e.scale = std::abs(c1) * e.phi1 + std::abs(c2) * p2_abs;
  return e;
}

inline PotentialEval phi_time_zero(const SystemSnapshot& alg, const SystemSnapshot& cmp, double c1,
                                   double c2, const SpeedupFunction& f) {
  for (const auto* s : {&alg, &cmp}) {
    for (const auto& j : s->active()) {
      if (j.arrival() != 0.0) {
        throw ValidationError("time-zero potential needs every job to arrive at t=0 (job " +
                              std::to_string(j.id()) + ")");
      }
    }
  }
  PotentialEval e = phi_online(alg, cmp, c1, c2, f);
  const detail::CmpView view(alg, cmp);
  double sum = 0.0;
  for (const auto& j : alg.active()) {
    const JobState* o = view.find(j.id());
    sum += std::max(0.0, j.remaining_total() - (o ? o->remaining_total() : 0.0));
  }
  e.phi_sf1 = f.p(static_cast<double>(alg.n()) / alg.servers()) * sum;
  e.phi_sf_total = c1 * e.phi_sf1 + c2 * e.phi2;
  e.sf_scale = e.scale - std::abs(c1) * e.phi1 + std::abs(c1) * e.phi_sf1;
  return e;
}

enum class PotentialKind : std::uint8_t { Online, TimeZero };

struct PotentialParams {
  PotentialKind kind = PotentialKind::Online;
  double c1 = 1.0;
  double c2 = 1.0;
};

struct PhiValue {
  double value = 0.0;
  double scale = 0.0;  // magnitude used for the jump tolerance
};

/// Potential of a (algorithm, comparison) state pair. verify_jumps accepts a
/// replacement so the harness itself can be tested against a wrong potential.
using PotentialEvaluator = std::function<PhiValue(const SystemSnapshot&, const SystemSnapshot&)>;

inline PotentialEvaluator make_evaluator(const PotentialParams& p, double alpha) {
  const SpeedupFunction f(alpha);
  if (p.kind == PotentialKind::Online) {
    return [p, f](const SystemSnapshot& a, const SystemSnapshot& o) {
      const auto e = phi_online(a, o, p.c1, p.c2, f);
      return PhiValue{e.phi_total, e.scale};
    };
  }
  return [p, f](const SystemSnapshot& a, const SystemSnapshot& o) {
    const auto e = phi_time_zero(a, o, p.c1, p.c2, f);
    return PhiValue{e.phi_sf_total, e.sf_scale};
  };
}

/// Constants from the bound calculators for the algorithm's own parameters.
inline PotentialParams potential_params_for(const Trace& alg, double gamma) {
  if (alg.policy == PolicyKind::FractionalLcfs) {
    const auto b = theorem1_bound(alg.alpha, alg.params.beta, alg.params.theta, gamma);
    if (!b.feasible) {
      throw ValidationError("Fractional-LCFS parameters violate the bound conditions");
    }
    return {PotentialKind::Online, b.c1, b.c2};
  }
  if (alg.policy == PolicyKind::PaEqui) {
    const auto c = theorem2_constants(alg.alpha, alg.params.delta);
    return {PotentialKind::TimeZero, c.c1, c.c2};
  }
  throw ValidationError("no potential is defined for policy " + std::string(to_string(alg.policy)));
}

struct JumpReport {
  bool pass = true;
  double max_jump = -std::numeric_limits<double>::infinity();
  double worst_time = 0.0;
  std::size_t events_checked = 0;
  bool boundary_ok = true;  // Phi = 0 before the first arrival and after the last departure
};

namespace detail {

inline void require_paired(const Trace& alg, const Trace& cmp) {
  if (!alg.workload || !cmp.workload || !(*alg.workload == *cmp.workload)) {
    throw ValidationError("traces are over different workloads");
  }
  if (alg.servers != cmp.servers || alg.alpha != cmp.alpha) {
    throw ValidationError("traces use different server counts or speedup exponents");
  }
  if (!alg.workload->empty() && (alg.intervals.empty() || cmp.intervals.empty())) {
    throw ValidationError("traces were recorded without intervals");
  }
}

inline std::vector<double> event_times(const Trace& a, const Trace& b) {
  std::vector<double> t;
  for (const auto* tr : {&a, &b}) {
    for (const auto& e : tr->events) t.push_back(e.time);
  }
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

}  // namespace detail

/// Evaluates the potential just before and just after every event of either
/// trace. Passes iff no jump exceeds 1e-9 * (1 + S), where S is the larger of
/// |Phi(t-)| and the evaluator's scale at t-.
inline JumpReport verify_jumps(const Trace& alg, const Trace& cmp, const PotentialParams& params,
                               PotentialEvaluator phi = {}) {
  detail::require_paired(alg, cmp);
  if (!phi) phi = make_evaluator(params, alg.alpha);
  JumpReport r;
  for (double t : detail::event_times(alg, cmp)) {
    const PhiValue before = phi(state_at(alg, t, true), state_at(cmp, t, true));
    const PhiValue after = phi(state_at(alg, t, false), state_at(cmp, t, false));
    const double jump = after.value - before.value;
    ++r.events_checked;
    if (jump > r.max_jump) {
      r.max_jump = jump;
      r.worst_time = t;
    }
    if (jump > 1e-9 * (1.0 + std::max(std::abs(before.value), before.scale))) r.pass = false;
  }
  if (!alg.workload->empty()) {
    const double first = alg.workload->front().arrival;
    const double last = std::max(alg.end_time, cmp.end_time);
    const PhiValue at_start = phi(state_at(alg, first, true), state_at(cmp, first, true));
    const PhiValue at_end = phi(state_at(alg, last, false), state_at(cmp, last, false));
    r.boundary_ok = at_start.value == 0.0 && at_end.value == 0.0;
    r.pass = r.pass && r.boundary_ok;
  }
  return r;
}

enum class DriftSide : std::uint8_t { Algorithm, Comparison };

inline std::string_view to_string(DriftSide s) {
  return s == DriftSide::Algorithm ? "algorithm" : "comparison";
}

struct DriftRow {
  double start = 0.0;
  double end = 0.0;
  DriftSide side = DriftSide::Algorithm;
  double drift = 0.0;
  double bound = 0.0;
  bool applicable = true;

  double margin() const { return bound - drift; }
  bool ok() const { return !applicable || drift <= bound + 1e-7 * (1.0 + std::abs(bound)); }
};

struct DriftReport {
  bool pass = true;
  std::vector<DriftRow> rows;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::size_t applicable = 0;
  std::size_t not_applicable = 0;
};

inline void write_csv(const DriftReport& r, std::ostream& out) {
  out << "interval_start,interval_end,side,drift,bound,margin,applicable\n";
  out.precision(17);
  for (const auto& row : r.rows) {
    out << row.start << ',' << row.end << ',' << to_string(row.side) << ',' << row.drift << ','
        << row.bound << ',' << row.margin() << ',' << (row.applicable ? "true" : "false") << '\n';
  }
}

namespace detail {

struct PieceJob {
  JobId id;
  double x, y;    // remaining total under the algorithm / comparison at piece start
  double s, so;   // speeds
  double weight;  // coefficient of (x - y)^+ in Phi1
  bool inelastic;
};

// Interval of each trace whose allocation is in force on [t, t+).
inline const IntervalRecord* interval_at(const Trace& tr, double t) {
  auto it = std::upper_bound(tr.intervals.begin(), tr.intervals.end(), t,
                             [](double x, const IntervalRecord& r) { return x < r.end; });
  if (it == tr.intervals.end() || it->start > t) return nullptr;
  return &*it;
}

}  // namespace detail

/// Checks the drift bounds on every stretch where both allocations are fixed.
/// Each stretch is cut where some job's remaining work under the algorithm
/// crosses its remaining work under the comparison, so on every piece the
/// one-sided derivatives are constant and are evaluated exactly.
///
/// Online potential (Fractional-LCFS):
///   comparison side <= c1 n Q(n_o)/Q(n) + c2 n_o
///   algorithm side, only where n_o <= gamma n, by the branch taken:
///     I:   -c1 (1-beta)(beta-gamma) n / P(beta)
///     IIa: -c2 min(N, n_i)
///     IIb: -c1 (1-beta)(beta-theta-gamma) n / P(beta)
/// Time-zero potential (PA-EQUI):
///   comparison side <= c1 (n/alpha + (1-1/alpha) n_o) + c2 n_o
///   algorithm side: I: -c1 (n-n_o)^+, IIa: -c2 n_i, IIb: -c1 (n_e-n_o)^+
inline DriftReport verify_drifts(const Trace& alg, const Trace& cmp, const PotentialParams& params,
                                 double gamma) {
  detail::require_paired(alg, cmp);
  const bool online = params.kind == PotentialKind::Online;
  if (online && alg.policy != PolicyKind::FractionalLcfs) {
    throw ValidationError("online drift bounds are stated for Fractional-LCFS");
  }
  if (!online && alg.policy != PolicyKind::PaEqui) {
    throw ValidationError("time-zero drift bounds are stated for PA-EQUI");
  }
  const SpeedupFunction f(alg.alpha);
  const double N = alg.servers;
  const double c1 = params.c1, c2 = params.c2;
  const double alpha = alg.alpha, beta = alg.params.beta, theta = alg.params.theta;

  for (const auto& iv : cmp.intervals) {
    if (!check_feasible(iv.allocation, iv.snapshot, f)) {
      throw ContractViolation("comparison schedule is infeasible on [" + std::to_string(iv.start) +
                              ", " + std::to_string(iv.end) + ")");
    }
  }

  std::vector<double> cuts;
  for (const auto* tr : {&alg, &cmp}) {
    for (const auto& iv : tr->intervals) {
      cuts.push_back(iv.start);
      cuts.push_back(iv.end);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  DriftReport rep;
  std::vector<detail::PieceJob> jobs;
  std::vector<double> pieces;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k], b = cuts[k + 1];
    const IntervalRecord* ia = detail::interval_at(alg, a);
    if (ia == nullptr) continue;  // algorithm idle: Phi1 has no terms
    const IntervalRecord* io = detail::interval_at(cmp, a);
    const SystemSnapshot sa = state_at(alg, a, false);
    const SystemSnapshot so = state_at(cmp, a, false);
    const detail::CmpView view(sa, so);

    const std::size_t n = sa.n(), n_o = so.n();
    const double nd = static_cast<double>(n), nod = static_cast<double>(n_o);
    jobs.clear();
    std::size_t rank = 0;
    for (const auto& j : sa.active()) {
      ++rank;
      const JobState* o = view.find(j.id());
      const double w = online ? f.p(static_cast<double>(rank)) / f.p(N) : f.p(nd / N);
      jobs.push_back({j.id(), j.remaining_total(), o ? o->remaining_total() : 0.0,
                      ia->allocation.speed_of(j.id()), (o && io) ? io->allocation.speed_of(j.id()) : 0.0, w,
                      j.kind() == PhaseKind::Inelastic});
    }
    double opt_inelastic_rate = 0.0;
    if (io) {
      for (const auto& j : so.active()) {
        if (j.kind() == PhaseKind::Inelastic) opt_inelastic_rate += io->allocation.speed_of(j.id());
      }
    }

    pieces.assign({0.0, b - a});
    for (const auto& j : jobs) {
      const double rel = j.s - j.so;
      if (rel == 0.0) continue;
      const double tau = (j.x - j.y) / rel;
      // Crossings within rounding distance of an end would only create slivers.
      const double eps = 1e-9 * (b - a);
      if (tau > eps && tau < (b - a) - eps) pieces.push_back(tau);
    }
    std::sort(pieces.begin(), pieces.end());

    // Bounds depend only on counts, which are constant on [a, b).
    double opt_bound, alg_bound;
    bool alg_applicable = true;
    if (online) {
      opt_bound = c1 * nd * f.q(nod) / f.q(nd) + c2 * nod;
      alg_applicable = nod <= gamma * nd;
      switch (ia->branch) {
        case PolicyBranch::CaseI:
          alg_bound = -c1 * (1.0 - beta) * (beta - gamma) * nd / f.p(beta);
          break;
        case PolicyBranch::CaseIIa:
          alg_bound = -c2 * std::min(N, static_cast<double>(sa.n_inelastic()));
          break;
        default:
          alg_bound = -c1 * (1.0 - beta) * (beta - theta - gamma) * nd / f.p(beta);
      }
    } else {
      opt_bound = c1 * (nd / alpha + (1.0 - 1.0 / alpha) * nod) + c2 * nod;
      switch (ia->branch) {
        case PolicyBranch::CaseI: alg_bound = -c1 * std::max(nd - nod, 0.0); break;
        case PolicyBranch::CaseIIa: alg_bound = -c2 * static_cast<double>(sa.n_inelastic()); break;
        default: alg_bound = -c1 * std::max(static_cast<double>(sa.n_elastic()) - nod, 0.0);
      }
    }

    for (std::size_t p = 0; p + 1 < pieces.size(); ++p) {
      if (pieces[p + 1] <= pieces[p]) continue;
      const double mid = 0.5 * (pieces[p] + pieces[p + 1]);
      double d_alg = 0.0, d_cmp = 0.0;
      for (const auto& j : jobs) {
        const double x = j.x - j.s * mid, y = j.y - j.so * mid;
        if (x > y) d_alg -= c1 * j.weight * j.s;
        if (x >= y) d_cmp += c1 * j.weight * j.so;
        if (j.inelastic) d_alg -= c2 * j.s;
      }
      d_cmp += c2 * opt_inelastic_rate;
      const DriftRow ra{a + pieces[p], a + pieces[p + 1], DriftSide::Algorithm, d_alg, alg_bound, alg_applicable};
      const DriftRow rc{a + pieces[p], a + pieces[p + 1], DriftSide::Comparison, d_cmp, opt_bound, true};
      for (const auto& row : {ra, rc}) {
        if (row.applicable) {
          ++rep.applicable;
          rep.worst_margin = std::min(rep.worst_margin, row.margin());
        } else {
          ++rep.not_applicable;
        }
        rep.pass = rep.pass && row.ok();
        rep.rows.push_back(row);
      }
    }
  }
  return rep;
}

}  // namespace elastic
