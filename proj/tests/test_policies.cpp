#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "elastic/policies.hpp"
#include "test_support.hpp"

using namespace elastic;
using testing_support::SnapshotBuilder;

namespace {

const SpeedupFunction kF2(2.0);

std::vector<double> speeds(const Allocation& a, const SystemSnapshot& s) {
  std::vector<double> out;
  for (const auto& j : s.active()) out.push_back(a.speed_of(j.id()));
  return out;
}

}  // namespace

TEST(FractionalLcfs, CaseIServesNewestFraction) {
  SnapshotBuilder b;
  const auto s = b.make(4.0, 0, 10);
  const PolicyParams p{0.5, 0.25, 0.25};
  EXPECT_EQ(plan_fractional_lcfs(s, p, kF2).branch, PolicyBranch::CaseI);
  const auto v = speeds(fractional_lcfs(s, p, kF2), s);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(v[i], 0.0);
  for (int i = 5; i < 10; ++i) EXPECT_NEAR(v[i], std::sqrt(0.8), 1e-12);
}

TEST(FractionalLcfs, CaseIIaServesInelasticAndNewestElastic) {
  SnapshotBuilder b;
  const auto s = b.make(10.0, {PhaseKind::Elastic, PhaseKind::Inelastic, PhaseKind::Elastic,
                               PhaseKind::Inelastic});
  const PolicyParams p{0.5, 0.25, 0.25};
  EXPECT_EQ(plan_fractional_lcfs(s, p, kF2).branch, PolicyBranch::CaseIIa);
  const auto v = speeds(fractional_lcfs(s, p, kF2), s);
  EXPECT_EQ(v[0], 0.0);
  EXPECT_EQ(v[1], 1.0);
  EXPECT_NEAR(v[2], std::sqrt(8.0), 1e-12);
  EXPECT_EQ(v[3], 1.0);
}

TEST(FractionalLcfs, CaseIIbLeavesIdleCapacity) {
  SnapshotBuilder b;
  const auto s = b.make(10.0, 0, 4);
  const PolicyParams p{0.5, 0.25, 0.25};
  EXPECT_EQ(plan_fractional_lcfs(s, p, kF2).branch, PolicyBranch::CaseIIb);
  const auto v = speeds(fractional_lcfs(s, p, kF2), s);
  EXPECT_EQ(v[0], 0.0);
  EXPECT_EQ(v[1], 0.0);
  EXPECT_NEAR(v[2], std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(v[3], std::sqrt(5.0), 1e-12);

  // An in-elastic job among the newest gets nothing in IIb.
  const auto s2 = b.make(10.0, {PhaseKind::Elastic, PhaseKind::Elastic, PhaseKind::Elastic,
                                PhaseKind::Elastic, PhaseKind::Elastic, PhaseKind::Elastic,
                                PhaseKind::Elastic, PhaseKind::Inelastic});
  const PolicyParams p2{0.5, 0.3, 0.25};
  EXPECT_EQ(plan_fractional_lcfs(s2, p2, kF2).branch, PolicyBranch::CaseIIb);
  const auto v2 = speeds(fractional_lcfs(s2, p2, kF2), s2);
  EXPECT_EQ(v2[7], 0.0);
  EXPECT_NEAR(v2[4], std::sqrt(2.5), 1e-12);
}

TEST(PaEqui, SpecExamples) {
  SnapshotBuilder b;
  const PolicyParams p;
  const auto s1 = b.make(16.0, 0, 4);
  for (double v : speeds(pa_equi(s1, p, kF2), s1)) EXPECT_DOUBLE_EQ(v, 2.0);
  const auto s2 = b.make(10.0, 0, 20);
  for (double v : speeds(pa_equi(s2, p, kF2), s2)) EXPECT_NEAR(v, std::sqrt(0.5), 1e-12);
  const auto s3 = b.make(10.0, 2, 2);
  const auto v3 = speeds(pa_equi(s3, p, kF2), s3);
  EXPECT_EQ(v3[0], 1.0);
  EXPECT_EQ(v3[1], 1.0);
  EXPECT_DOUBLE_EQ(v3[2], 2.0);
  EXPECT_DOUBLE_EQ(v3[3], 2.0);
  // n_i below ceil(delta n): in-elastic jobs wait.
  const auto s4 = b.make(10.0, 1, 7);
  const PolicyParams pd{0.5, 0.25, 0.2};
  const auto v4 = speeds(pa_equi(s4, pd, kF2), s4);
  EXPECT_EQ(plan_pa_equi(s4, pd, kF2).branch, PolicyBranch::CaseIIb);
  EXPECT_EQ(v4[0], 0.0);
  EXPECT_NEAR(v4[1], std::sqrt(10.0 / 7.0), 1e-12);
}

TEST(BlindEqui, SpecExamples) {
  SnapshotBuilder b;
  const auto s1 = b.make(9.0, 0, 3);
  for (double v : speeds(blind_equi(s1, kF2), s1)) EXPECT_NEAR(v, std::sqrt(3.0), 1e-12);
  const auto s2 = b.make(9.0, 1, 2);
  const auto a2 = blind_equi(s2, kF2);
  const auto v2 = speeds(a2, s2);
  EXPECT_EQ(v2[0], 1.0);
  double used = 0.0;
  for (double v : v2) used += v * v;
  EXPECT_NEAR(used, 7.0, 1e-12);
  EXPECT_TRUE(check_feasible(a2, s2, kF2));
  const auto s3 = b.make(2.0, 0, 4);
  for (double v : speeds(blind_equi(s3, kF2), s3)) EXPECT_NEAR(v, std::sqrt(0.5), 1e-12);
}

TEST(InelasticFirst, SpecExamples) {
  SnapshotBuilder b;
  const auto s1 = b.make(10.0, 3, 2);
  const auto v1 = speeds(inelastic_first(s1, kF2), s1);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(v1[i], 1.0);
  for (int i = 3; i < 5; ++i) EXPECT_NEAR(v1[i], std::sqrt(3.5), 1e-12);
  const auto s2 = b.make(2.0, 5, 1);
  const auto v2 = speeds(inelastic_first(s2, kF2), s2);
  EXPECT_EQ((std::vector<double>{1, 1, 0, 0, 0, 0}), v2);
  const auto s3 = b.make(4.0, 0, 4);
  for (double v : speeds(inelastic_first(s3, kF2), s3)) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(PaFcfs, SpecExamples) {
  SnapshotBuilder b;
  const auto s1 = b.make(10.0, {PhaseKind::Elastic, PhaseKind::Inelastic, PhaseKind::Elastic});
  EXPECT_EQ(speeds(pa_fcfs(s1, kF2), s1), (std::vector<double>{std::sqrt(10.0), 0, 0}));
  const auto s2 = b.make(10.0, {PhaseKind::Inelastic, PhaseKind::Inelastic, PhaseKind::Elastic});
  const auto v2 = speeds(pa_fcfs(s2, kF2), s2);
  EXPECT_EQ(v2[0], 1.0);
  EXPECT_EQ(v2[1], 1.0);
  EXPECT_NEAR(v2[2], std::sqrt(8.0), 1e-12);
  const auto s3 = b.make(1.0, {PhaseKind::Inelastic, PhaseKind::Elastic});
  EXPECT_EQ(speeds(pa_fcfs(s3, kF2), s3), (std::vector<double>{1, 0}));
  const auto s4 = b.make(1.5, {PhaseKind::Inelastic, PhaseKind::Inelastic, PhaseKind::Inelastic});
  const auto v4 = speeds(pa_fcfs(s4, kF2), s4);
  EXPECT_EQ(v4[0], 1.0);
  EXPECT_NEAR(v4[1], std::sqrt(0.5), 1e-12);
  EXPECT_EQ(v4[2], 0.0);
}

TEST(CheckFeasible, DetectsOverloadAndCap) {
  SnapshotBuilder b;
  const auto s = b.make(4.0, 0, 2);
  Allocation a;
  a.entries[s.active()[0].id()] = {4.0, 2.0};
  a.entries[s.active()[1].id()] = {4.0, 2.0};
  EXPECT_FALSE(check_feasible(a, s, kF2));
  const auto si = b.make(4.0, 1, 0);
  Allocation c;
  c.entries[si.active()[0].id()] = {1.0, 1.5};
  EXPECT_FALSE(check_feasible(c, si, kF2));
  Allocation stray;
  stray.entries[999] = {1.0, 1.0};
  EXPECT_THROW(check_feasible(stray, si, kF2), ContractViolation);
}

TEST(Policies, EmptySnapshotIsRejected) {
  const SystemSnapshot empty(0.0, 4.0, {});
  const PolicyParams p;
  for (auto k : {PolicyKind::FractionalLcfs, PolicyKind::PaEqui, PolicyKind::BlindEqui,
                 PolicyKind::InelasticFirst, PolicyKind::PaFcfs}) {
    EXPECT_THROW(allocate(k, empty, p, kF2), ContractViolation);
  }
}

TEST(Policies, ParamValidationAndNames) {
  EXPECT_THROW((PolicyParams{0.5, 0.5, 0.25}.validate()), ValidationError);
  EXPECT_THROW((PolicyParams{1.5, 0.25, 0.25}.validate()), ValidationError);
  EXPECT_THROW((PolicyParams{0.5, 0.25, 1.0}.validate()), ValidationError);
  EXPECT_NO_THROW((PolicyParams{1.0, 0.25, 0.25}.validate()));
  for (auto k : {PolicyKind::FractionalLcfs, PolicyKind::PaEqui, PolicyKind::BlindEqui,
                 PolicyKind::InelasticFirst, PolicyKind::PaFcfs}) {
    EXPECT_EQ(parse_policy_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_policy_kind("srpt"), ValidationError);
}

// Random snapshots: feasibility, LCFS selection, equal speeds per phase,
// case predicates recomputed independently, PA-FCFS zero suffix.
TEST(PoliciesProperty, RandomSnapshots) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> nd(1, 200), nsv(1, 100);
  std::uniform_real_distribution<double> mix(0.0, 1.0), bd(0.05, 1.0);
  const double alphas[] = {1.5, 2.0, 3.0};
  const PolicyKind kinds[] = {PolicyKind::FractionalLcfs, PolicyKind::PaEqui, PolicyKind::BlindEqui,
                              PolicyKind::InelasticFirst, PolicyKind::PaFcfs};
  for (int trial = 0; trial < 10000; ++trial) {
    SnapshotBuilder b;
    const SpeedupFunction f(alphas[trial % 3]);
    const double servers = nsv(rng);
    const int n = nd(rng);
    const double frac = mix(rng);
    std::vector<PhaseKind> ks;
    for (int i = 0; i < n; ++i) ks.push_back(mix(rng) < frac ? PhaseKind::Inelastic : PhaseKind::Elastic);
    const auto s = b.make(servers, ks);
    PolicyParams p;
    p.beta = bd(rng);
    p.theta = p.beta * mix(rng) * 0.99 + 1e-3 * p.beta;
    p.delta = 0.01 + 0.98 * mix(rng);

    for (auto k : kinds) {
      const auto a = allocate(k, s, p, f);
      ASSERT_TRUE(check_feasible(a, s, f)) << to_string(k) << " trial " << trial;
      ASSERT_EQ(a.entries.size(), s.n());
    }

    const auto plan = plan_fractional_lcfs(s, p, f);
    const double nn = static_cast<double>(n);
    const std::size_t n_i = s.n_inelastic();
    PolicyBranch expect = servers / (p.beta * nn) <= 1.0 ? PolicyBranch::CaseI
                          : static_cast<double>(n_i) >= std::ceil(p.theta * nn - 1e-9)
                              ? PolicyBranch::CaseIIa
                              : PolicyBranch::CaseIIb;
    ASSERT_EQ(plan.branch, expect);

    const auto a = expand(plan, s);
    std::set<double> es, is;
    for (const auto& j : s.active()) {
      const double v = a.speed_of(j.id());
      if (v > 0) { (j.kind() == PhaseKind::Elastic ? es : is).insert(v); }
    }
    ASSERT_LE(es.size(), 1u);
    ASSERT_LE(is.size(), 1u);
    if (expect == PolicyBranch::CaseI) {
      const std::size_t m = static_cast<std::size_t>(std::ceil(p.beta * nn - 1e-9));
      for (int i = 0; i < n; ++i) {
        ASSERT_EQ(a.speed_of(s.active()[i].id()) > 0.0, static_cast<std::size_t>(i) >= n - m);
      }
    }

    const auto pe = pa_equi(s, p, f);
    std::set<double> pes, pis;
    for (const auto& j : s.active()) {
      const double v = pe.speed_of(j.id());
      if (v > 0) { (j.kind() == PhaseKind::Elastic ? pes : pis).insert(v); }
    }
    ASSERT_LE(pes.size(), 1u);
    ASSERT_LE(pis.size(), 1u);

    const auto fc = speeds(pa_fcfs(s, f), s);
    bool zero = false;
    for (double v : fc) {
      if (zero) {
        ASSERT_EQ(v, 0.0);
      }
      if (v == 0.0) zero = true;
    }
  }
}
