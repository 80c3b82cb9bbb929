#include <gtest/gtest.h>

#include <random>

#include "elastic/core.hpp"

using namespace elastic;

TEST(Speedup, PowerValues) {
  const SpeedupFunction f2(2.0), f3(3.0), f4(4.0);
  EXPECT_DOUBLE_EQ(speedup_p(f2, 4.0), 2.0);
  EXPECT_DOUBLE_EQ(speedup_p(f2, 1.0), 1.0);
  EXPECT_NEAR(speedup_p(f3, 0.125), 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(speedup_q(f2, 4.0), 2.0);
  EXPECT_DOUBLE_EQ(speedup_q(f2, 1.0), 1.0);
  EXPECT_NEAR(speedup_q(f4, 16.0), 8.0, 1e-12);
  EXPECT_DOUBLE_EQ(speedup_p_inverse(f2, 3.0), 9.0);
  EXPECT_DOUBLE_EQ(speedup_p_inverse(f2, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(speedup_p_inverse(f2, 0.0), 0.0);
}

TEST(Speedup, RejectsBadArguments) {
  EXPECT_THROW(SpeedupFunction(1.0), DomainError);
  EXPECT_THROW(SpeedupFunction(0.5), DomainError);
  const SpeedupFunction f(2.0);
  EXPECT_THROW(f.p(-1.0), DomainError);
  EXPECT_THROW(f.q(-1e-9), DomainError);
  EXPECT_THROW(f.p_inverse(-2.0), DomainError);
}

TEST(Speedup, ProductIdentityAndInverse) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lg(std::log(1e-6), std::log(1e6));
  for (double alpha : {1.5, 2.0, 3.0}) {
    const SpeedupFunction f(alpha);
    EXPECT_DOUBLE_EQ(f.p(1.0), 1.0);
    EXPECT_DOUBLE_EQ(f.q(1.0), 1.0);
    for (int i = 0; i < 1000; ++i) {
      const double x = std::exp(lg(rng));
      EXPECT_LT(std::abs(f.p(x) * f.q(x) - x) / x, 1e-10);
      EXPECT_NEAR(f.p(f.p_inverse(x)), x, 1e-12 * x);
    }
  }
}

TEST(Speedup, ConcaveAndMonotone) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 100.0), lam(0.0, 1.0);
  for (double alpha : {1.5, 2.0, 3.0}) {
    const SpeedupFunction f(alpha);
    for (int i = 0; i < 1000; ++i) {
      double a = u(rng), b = u(rng);
      if (a > b) std::swap(a, b);
      const double l = lam(rng);
      EXPECT_GE(f.p(l * a + (1 - l) * b), l * f.p(a) + (1 - l) * f.p(b) - 1e-10);
      EXPECT_LE(f.p(a), f.p(b));
      EXPECT_LE(f.q(a), f.q(b));
    }
  }
}

namespace {
JobSpec two_phase() {
  return JobSpec{1, 0.0, {{PhaseKind::Elastic, 5.0}, {PhaseKind::Inelastic, 1.0}}};
}
}  // namespace

TEST(JobStateTest, AdvanceDepletesLinearly) {
  const JobSpec spec = two_phase();
  const JobState s = advance(JobState(spec), 2.0, 1.0);
  EXPECT_DOUBLE_EQ(s.remaining_in_phase(), 3.0);
  EXPECT_DOUBLE_EQ(s.remaining_total(), 4.0);
  EXPECT_DOUBLE_EQ(s.remaining_inelastic(), 1.0);
  EXPECT_EQ(s.current_phase(), 0u);
}

TEST(JobStateTest, ExactBoundaryOpensNextPhase) {
  const JobSpec spec{2, 0.0, {{PhaseKind::Inelastic, 1.0}, {PhaseKind::Elastic, 2.0}}};
  const JobState s = advance(JobState(spec), 1.0, 1.0);
  EXPECT_EQ(s.current_phase(), 1u);
  EXPECT_EQ(s.kind(), PhaseKind::Elastic);
  EXPECT_DOUBLE_EQ(s.remaining_in_phase(), 2.0);
  EXPECT_DOUBLE_EQ(s.remaining_inelastic(), 0.0);
  const JobState done = advance(s, 1.0, 2.0);
  EXPECT_TRUE(done.complete());
  EXPECT_DOUBLE_EQ(done.remaining_total(), 0.0);
}

TEST(JobStateTest, ZeroSpeedLeavesStateUnchanged) {
  const JobSpec spec = two_phase();
  const JobState s = advance(JobState(spec), 0.0, 7.0);
  EXPECT_DOUBLE_EQ(s.remaining_in_phase(), 5.0);
  EXPECT_DOUBLE_EQ(s.remaining_total(), 6.0);
}

TEST(JobStateTest, SteppingPastBoundaryIsRejected) {
  const JobSpec spec = two_phase();
  EXPECT_THROW(advance(JobState(spec), 1.0, 5.1), ContractViolation);
  EXPECT_NO_THROW(advance(JobState(spec), 1.0, 5.0 + 5e-10));
  EXPECT_THROW(advance(JobState(spec), -1.0, 1.0), ContractViolation);
}

TEST(JobStateTest, WorkConservationAndInelasticCounter) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    JobSpec spec{0, 0.0, {}};
    PhaseKind k = trial % 2 ? PhaseKind::Elastic : PhaseKind::Inelastic;
    for (int p = 0; p < 5; ++p, k = other(k)) spec.phases.push_back({k, u(rng)});
    JobState s(spec);
    while (!s.complete()) {
      const double speed = u(rng);
      const double dt = std::min(u(rng), s.remaining_in_phase() / speed);
      const JobState next = s.advance(speed, dt);
      EXPECT_NEAR(s.remaining_total() - next.remaining_total(), speed * dt, 1e-9);
      if (s.kind() == PhaseKind::Elastic) {
        EXPECT_DOUBLE_EQ(next.remaining_inelastic(), s.remaining_inelastic());
      }
      EXPECT_LE(next.remaining_inelastic(), next.remaining_total() + 1e-12);
      s = next;
    }
  }
}

TEST(JobStateTest, AtReconstructsTotals) {
  const JobSpec spec{3, 1.0, {{PhaseKind::Elastic, 2.0}, {PhaseKind::Inelastic, 3.0}, {PhaseKind::Elastic, 4.0}}};
  const JobState s = JobState::at(spec, 1, 1.5);
  EXPECT_DOUBLE_EQ(s.remaining_total(), 5.5);
  EXPECT_DOUBLE_EQ(s.remaining_inelastic(), 1.5);
  EXPECT_THROW(JobState::at(spec, 1, 3.5), ContractViolation);
}

TEST(Validation, RejectsMalformedJobs) {
  EXPECT_THROW(validate(JobSpec{0, 0.0, {}}), ValidationError);
  EXPECT_THROW(validate(JobSpec{0, -1.0, {{PhaseKind::Elastic, 1.0}}}), ValidationError);
  EXPECT_THROW(validate(JobSpec{0, 0.0, {{PhaseKind::Elastic, 0.0}}}), ValidationError);
  EXPECT_THROW(normalized_workload({JobSpec{1, 0.0, {{PhaseKind::Elastic, 1.0}}},
                                    JobSpec{1, 2.0, {{PhaseKind::Elastic, 1.0}}}}),
               ValidationError);
}

TEST(Snapshot, OrdersByArrivalThenIdAndCounts) {
  const std::vector<JobSpec> specs{{5, 1.0, {{PhaseKind::Elastic, 1.0}}},
                                   {2, 1.0, {{PhaseKind::Inelastic, 1.0}}},
                                   {9, 0.5, {{PhaseKind::Elastic, 1.0}}}};
  SystemSnapshot snap(1.0, 4.0, {JobState(specs[0]), JobState(specs[1]), JobState(specs[2])});
  ASSERT_EQ(snap.n(), 3u);
  EXPECT_EQ(snap.active()[0].id(), 9);
  EXPECT_EQ(snap.active()[1].id(), 2);
  EXPECT_EQ(snap.active()[2].id(), 5);
  EXPECT_EQ(snap.n_elastic(), 2u);
  EXPECT_EQ(snap.n_inelastic(), 1u);
  EXPECT_EQ(snap.n(), snap.n_elastic() + snap.n_inelastic());
  EXPECT_THROW(SystemSnapshot(0.0, 0.0, {}), DomainError);
}
