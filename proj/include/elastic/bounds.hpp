#pragma once

// Competitive-ratio constants for Fractional-LCFS and PA-EQUI.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "elastic/core.hpp"

namespace elastic {

/// Constants printed alongside the worked alpha = 2 example (beta = 1/6,
/// theta = gamma = 1/72). Kept for side-by-side reporting; the values computed
/// from the formulas are authoritative.
struct PublishedConstants {
  static constexpr double c1 = 6.06;
  static constexpr double c2 = 127.44;
  static constexpr double kappa = 635.76;
};

struct ConditionReport {
  double cond1_lhs = 0.0;   // (1-b)(b-g)/P(b)
  double cond3a_lhs = 0.0;  // (1-b)(b-t-g)/P(b)
  double rhs = 0.0;         // g^{1-1/a}
  bool cond1 = false;
  bool cond3a = false;
  bool ordering = false;    // 0 < theta, 0 < gamma, theta + gamma < beta < 1
  double c1_min = std::numeric_limits<double>::quiet_NaN();  // max of the cond1/cond3b minima
  double c2_min = std::numeric_limits<double>::quiet_NaN();  // cond2 at c1_min

  bool all() const { return cond1 && cond3a && ordering; }
  std::vector<std::string> violated() const {
    std::vector<std::string> v;
    if (!ordering) v.push_back("ordering");
    if (!cond1) v.push_back("cond1");
    if (!cond3a) v.push_back("cond3a");
    if (!cond1 || !cond3a) {
      v.push_back("cond3b");
      v.push_back("cond2");
    }
    return v;
  }
};

inline ConditionReport check_conditions(double alpha, double beta, double theta, double gamma) {
  const SpeedupFunction f(alpha);
  ConditionReport r;
  r.ordering = theta > 0.0 && gamma > 0.0 && theta + gamma < beta && beta < 1.0;
  const double pb = f.p(std::max(beta, 0.0));
  r.rhs = f.q(std::max(gamma, 0.0));
  r.cond1_lhs = (1.0 - beta) * (beta - gamma) / pb;
  r.cond3a_lhs = (1.0 - beta) * (beta - theta - gamma) / pb;
  r.cond1 = r.cond1_lhs > r.rhs;
  r.cond3a = r.cond3a_lhs > r.rhs;
  if (r.cond1 && r.cond3a) {
    r.c1_min = std::max(-1.0 / (r.rhs - r.cond1_lhs), -1.0 / (r.rhs - r.cond3a_lhs));
    r.c2_min = (1.0 + r.c1_min * r.rhs) / theta;
  }
  return r;
}

struct BoundResult {
  double alpha = 0.0, beta = 0.0, theta = 0.0, gamma = 0.0, delta = 0.0;
  double c1 = std::numeric_limits<double>::quiet_NaN();
  double c2 = std::numeric_limits<double>::quiet_NaN();
  double kappa = std::numeric_limits<double>::quiet_NaN();
  bool feasible = false;
  std::vector<std::string> violated_conditions;
};

/// kappa = (1 + c1)/gamma + c2 at the smallest admissible c1, c2.
inline BoundResult theorem1_bound(double alpha, double beta, double theta, double gamma) {
  const ConditionReport cond = check_conditions(alpha, beta, theta, gamma);
  BoundResult r;
  r.alpha = alpha;
  r.beta = beta;
  r.theta = theta;
  r.gamma = gamma;
  r.violated_conditions = cond.violated();
  r.feasible = cond.all();
  if (!r.feasible) return r;
  r.c1 = cond.c1_min;
  r.c2 = cond.c2_min;
  r.kappa = (1.0 + r.c1) / gamma + r.c2;
  return r;
}

struct BetaChoice {
  double beta = 0.0;
  double theta = 0.0;
  double gamma = 0.0;
};

/// Largest beta on a 1e-4 grid with (1-beta)^2 > (beta/2)^{1-1/alpha}, using
/// theta = gamma = beta^2/2. That inequality is exactly cond3a for this choice,
/// and cond3a implies cond1.
inline BetaChoice find_beta(double alpha) {
  const SpeedupFunction f(alpha);
  constexpr int kSteps = 10000;
  for (int k = kSteps - 1; k >= 1; --k) {
    const double beta = k / static_cast<double>(kSteps);
    const double g = beta * beta / 2.0;
    if ((1.0 - beta) * (1.0 - beta) > f.q(beta / 2.0) && check_conditions(alpha, beta, g, g).all()) {
      return {beta, g, g};
    }
  }
  throw DomainError("no admissible beta on the grid for alpha=" + std::to_string(alpha));
}

/// The beta on a 1e-3 grid (theta = gamma = beta^2/2) with the smallest kappa.
inline BetaChoice optimal_beta(double alpha) {
  BetaChoice best;
  double kappa = std::numeric_limits<double>::infinity();
  for (int k = 1; k < 1000; ++k) {
    const double beta = k / 1000.0;
    const double g = beta * beta / 2.0;
    const BoundResult r = theorem1_bound(alpha, beta, g, g);
    if (r.feasible && r.kappa < kappa) {
      kappa = r.kappa;
      best = {beta, g, g};
    }
  }
  if (!std::isfinite(kappa)) throw DomainError("no admissible beta for alpha=" + std::to_string(alpha));
  return best;
}

/// mu(alpha, delta) = [alpha(1-delta)/delta + (alpha(1-delta)+delta)/(1-delta)] / (alpha(1-delta)-1).
inline double theorem2_bound(double alpha, double delta) {
  SpeedupFunction{alpha};
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
  const double a = alpha * (1.0 - delta);
  if (!(a > 1.0)) {
    throw DomainError("PA-EQUI bound undefined: alpha*(1-delta) = " + std::to_string(a) + " <= 1");
  }
  return (a / delta + (a + delta) / (1.0 - delta)) / (a - 1.0);
}

struct PaEquiConstants {
  double c1 = 0.0;
  double c2 = 0.0;
};

/// Smallest c1, c2 for which the PA-EQUI running condition closes:
/// c1 = alpha/(alpha(1-delta)-1), c2 = (1 + c1/alpha)/delta.
inline PaEquiConstants theorem2_constants(double alpha, double delta) {
  theorem2_bound(alpha, delta);  // domain checks
  const double c1 = alpha / (alpha * (1.0 - delta) - 1.0);
  return {c1, (1.0 + c1 / alpha) / delta};
}

struct DeltaChoice {
  double delta = 0.0;
  double mu = std::numeric_limits<double>::infinity();
};

/// Minimises theorem2_bound over delta on a grid of the given step.
inline DeltaChoice best_delta(double alpha, double step = 1e-3) {
  DeltaChoice best;
  const int n = static_cast<int>(std::round(1.0 / step));
  for (int k = 1; k < n; ++k) {
    const double d = k * step;
    if (alpha * (1.0 - d) <= 1.0) break;
    const double mu = theorem2_bound(alpha, d);
    if (mu < best.mu) best = {d, mu};
  }
  if (!std::isfinite(best.mu)) throw DomainError("no admissible delta for alpha=" + std::to_string(alpha));
  return best;
}

}  // namespace elastic
