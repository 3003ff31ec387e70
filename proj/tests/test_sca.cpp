// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cogrelay/instance.hpp"
#include "cogrelay/sca/algorithm.hpp"

using namespace cogrelay;
using namespace cogrelay::sca;

namespace {

ProblemInstance blank(std::size_t K, std::size_t J, std::size_t N) {
  ProblemInstance inst;
  inst.channels = ChannelState(K, J, N);
  inst.r_req.assign(K, 0.0);
  return inst;
}

ProblemInstance random_instance(std::uint64_t seed, std::size_t K, std::size_t N, double r_req) {
  Topology topo;
  topo.num_pu = topo.num_su = K;
  topo.num_subcarriers = N;
  InstanceOverrides ov;
  ov.r_req = r_req;
  return generate_realization(topo, seed, ov);
}

// Every pair admissible on both subcarriers: G_j > H_k everywhere.
ProblemInstance all_admissible_222() {
  auto inst = blank(2, 2, 2);
  auto& ch = inst.channels;
  for (std::size_t i = 0; i < 2; ++i) {
    ch.f_relay_hop[i] = 300.0 + 50.0 * double(i);
    for (std::size_t k = 0; k < 2; ++k) {
      ch.f_direct(k, i) = 20.0 + 7.0 * double(k + i);
      ch.h_st_pu(k, i) = 5.0 + double(k) + double(i);
    }
    for (std::size_t j = 0; j < 2; ++j) ch.g_st_su(j, i) = 100.0 + 10.0 * double(j);
  }
  inst.r_req = {1.0, 1.0};
  return inst;
}

// Weak direct link, so the relayed pair is the best schedule.
ProblemInstance relay_pair_instance() {
  auto inst = blank(1, 1, 1);
  inst.channels.f_direct(0, 0) = 0.1;
  inst.channels.f_relay_hop[0] = 50.0;
  inst.channels.h_st_pu(0, 0) = 3.0;
  inst.channels.g_st_su(0, 0) = 40.0;
  return inst;
}

std::vector<double> random_box_point(const ScaModel& m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> x(m.num_vars());
  for (std::size_t n = 0; n < x.size(); ++n) x[n] = m.lower[n] + U(rng) * (m.upper[n] - m.lower[n]);
  return x;
}

double sum_value(const std::vector<LogTerm>& terms, const std::vector<double>& x) {
  double s = 0.0;
  for (const auto& t : terms) s += t.value(x);
  return s;
}

// Gradient read off the tangent coefficients.
std::vector<double> tangent_gradient(const std::vector<LogTerm>& terms, const std::vector<double>& x) {
  std::vector<double> g(x.size(), 0.0);
  for (const auto& t : terms) {
    const auto a = t.tangent(x);
    for (std::size_t n = 0; n < a.idx.size(); ++n) g[a.idx[n]] += a.coef[n];
  }
  return g;
}

// Largest relative mismatch between a gradient and central differences of f.
// Components below 1e-3 are compared in absolute terms.
template <class F>
double fd_mismatch(F&& f, const std::vector<double>& x, const std::vector<double>& grad) {
  double worst = 0.0;
  std::vector<double> y = x;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double h = 1e-6 * std::max(0.1, std::abs(x[n]));
    y[n] = x[n] + h;
    const double fp = f(y);
    y[n] = x[n] - h;
    const double fm = f(y);
    y[n] = x[n];
    const double fd = (fp - fm) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - grad[n]) / std::max(1e-3, std::abs(grad[n])));
  }
  return worst;
}

// Weighted utility straight from the rate formulas, on whatever tilde powers exist.
double utility_from_rates(const ScaModel& m, const ProblemInstance& inst, const std::vector<double>& x) {
  const auto& ch = inst.channels;
  double u = 0.0;
  for (std::size_t k = 0; k < m.K; ++k)
    for (std::size_t i = 0; i < m.N; ++i)
      u += inst.weight_pu * direct_rate(ScaModel::at(m.q_tilde(k, i), x), ch.f_direct(k, i));
  for (std::size_t t = 0; t < m.pairs.size(); ++t) {
    const auto [i, j, k] = m.pairs[t];
    const double pu = ScaModel::at(m.ppu_tilde[t], x), su = ScaModel::at(m.psu_tilde[t], x);
    u += inst.weight_pu * noma_pu_rate(pu, su, ch.h_st_pu(k, i)) + inst.weight_su * noma_su_rate(su, ch.g_st_su(j, i));
  }
  return u;
}

}  // namespace

TEST(ScaModel, HandCountTwoTwoTwo) {
  // Hand count, per subcarrier: variables 3*2 + 3 + 3*4 + 2 + 2 = 25; rows 3*2 + 3 + 6*4 + 2 + 1 + 1 + 4 = 41.
  // Globally: two budgets and two QoS rows.
  const auto inst = all_admissible_222();
  const auto m = build_relaxed_problem(inst);
  EXPECT_EQ(m.pairs.size(), 8u);
  EXPECT_EQ(m.num_vars(), 50u);
  EXPECT_EQ(m.num_rows(), 86u);
  EXPECT_EQ(m.binaries.size(), 2u * (2 + 1 + 4));
}

TEST(ScaModel, ZeroIndicatorForcesZeroPowers) {
  const auto inst = all_admissible_222();
  const auto m = build_relaxed_problem(inst);
  std::vector<double> x(m.num_vars(), 0.0);
  ASSERT_LE(max_violation(m, x), 0.0 + 1.0);  // QoS rows are violated at zero; look at the linear rows only
  auto linear_violation = [&](const std::vector<double>& y) {
    double v = -1e300;
    for (const auto& a : m.linear_rows) v = std::max(v, a.eval(y));
    return v;
  };
  EXPECT_LE(linear_violation(x), 0.0);
  auto y = x;
  y[std::size_t(m.psu_tilde[0])] = 0.1;  // s = 0 on that pair
  y[std::size_t(m.psu_raw(m.pairs[0].j, m.pairs[0].i))] = 0.1;
  EXPECT_GT(linear_violation(y), 0.0);
  y = x;
  y[std::size_t(m.ppu_tilde[0])] = 0.1;
  y[std::size_t(m.ppu_raw(m.pairs[0].k, m.pairs[0].i))] = 0.1;
  EXPECT_GT(linear_violation(y), 0.0);
}

TEST(ScaModel, UnitIndicatorTiesTildeToRaw) {
  const auto inst = all_admissible_222();
  const auto m = build_relaxed_problem(inst);
  std::vector<double> x(m.num_vars(), 0.0);
  auto linear_violation = [&](const std::vector<double>& y) {
    double v = -1e300;
    for (const auto& a : m.linear_rows) v = std::max(v, a.eval(y));
    return v;
  };
  x[std::size_t(m.c_bin(0, 0))] = 1.0;
  x[std::size_t(m.q_raw(0, 0))] = 2.0;
  x[std::size_t(m.q_tilde(0, 0))] = 2.0;
  EXPECT_LE(linear_violation(x), 0.0);
  x[std::size_t(m.q_tilde(0, 0))] = 1.5;
  EXPECT_GT(linear_violation(x), 0.0);
  x[std::size_t(m.q_tilde(0, 0))] = 2.5;
  EXPECT_GT(linear_violation(x), 0.0);
}

TEST(ScaModel, PenalizedObjectiveExamples) {
  const auto inst = all_admissible_222();
  const auto m = build_relaxed_problem(inst);
  std::vector<double> x(m.num_vars(), 0.0);
  EXPECT_DOUBLE_EQ(penalized_objective(m, x, 4.0), 0.0);
  x[m.binaries[3]] = 0.5;
  EXPECT_DOUBLE_EQ(penalized_objective(m, x, 4.0), 1.0);
}

TEST(ScaModel, DcPartsReproduceUtility) {
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto inst = random_instance(seed, 2, 3, 1.0);
    const auto m = build_relaxed_problem(inst);
    for (int rep = 0; rep < 20; ++rep) {
      const auto x = random_box_point(m, rng);
      const auto d = dc_parts(m, x);
      const double u = utility_from_rates(m, inst, x);
      EXPECT_NEAR(d.A - d.B, u, 1e-10 * std::max(1.0, u));
      EXPECT_GE(d.H - d.M, 0.0);
      const double rho = 7.5;
      EXPECT_NEAR(penalized_objective(m, x, rho), -(d.A - d.B) + rho * (d.H - d.M), 1e-10 * std::max(1.0, u));
    }
    std::vector<double> x(m.num_vars(), 0.0);
    for (auto b : m.binaries) x[b] = double(rng() % 2);
    const auto d = dc_parts(m, x);
    EXPECT_EQ(d.H - d.M, 0.0);
  }
}

TEST(ScaModel, TangentHandValues) {
  LogTerm t{0.5, {}};
  t.arg.constant = 1.0;
  t.arg.add(0, 1.0);
  const auto a = t.tangent({1.0});
  ASSERT_EQ(a.idx.size(), 1u);
  EXPECT_NEAR(a.coef[0], 0.36067376022224085, 1e-15);  // 1 / (4 ln 2)
  EXPECT_NEAR(a.eval({1.0}), 0.5, 1e-15);
  EXPECT_NEAR(a.eval({3.0}), 0.5 + 2.0 * 0.36067376022224085, 1e-14);

  // Convex tangent of s^2 at 0.5: 0.25 + (s - 0.5), below s^2 at s = 1.
  const auto inst = all_admissible_222();
  const auto m = build_relaxed_problem(inst);
  std::vector<double> x(m.num_vars(), 0.0);
  x[m.binaries[0]] = 0.5;
  const auto s = linearize_at(m, x);
  auto y = x;
  y[m.binaries[0]] = 1.0;
  EXPECT_NEAR(s.square.eval(x), 0.25, 1e-15);
  EXPECT_NEAR(s.square.eval(y), 0.75, 1e-15);
}

TEST(ScaModel, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto inst = random_instance(100 + rep % 10, 2, 2, 1.0);
    const auto m = build_relaxed_problem(inst);
    const auto x = random_box_point(m, rng);
    const auto d = dc_parts(m, x);
    worst = std::max(worst, fd_mismatch([&](const auto& y) { return dc_parts(m, y).A; }, x, d.grad_A));
    worst = std::max(worst, fd_mismatch([&](const auto& y) { return dc_parts(m, y).B; }, x, d.grad_B));
    std::vector<double> gm(x.size(), 0.0);
    for (auto b : m.binaries) gm[b] = 2.0 * x[b];
    worst = std::max(worst, fd_mismatch([&](const auto& y) { return dc_parts(m, y).M; }, x, gm));
    for (const auto* rows : {&m.relay_rows, &m.qos_rows})
      for (const auto& r : *rows) {
        worst = std::max(worst, fd_mismatch([&](const auto& y) { return sum_value(r.lin, y); }, x,
                                            tangent_gradient(r.lin, x)));
        worst = std::max(worst, fd_mismatch([&](const auto& y) { return sum_value(r.keep, y); }, x,
                                            tangent_gradient(r.keep, x)));
      }
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(ScaModel, SurrogatesBoundOnTheSafeSide) {
  std::mt19937_64 rng(3);
  const auto inst = random_instance(7, 2, 2, 1.0);
  const auto m = build_relaxed_problem(inst);
  for (int rep = 0; rep < 200; ++rep) {
    const auto x0 = random_box_point(m, rng);
    const auto x = random_box_point(m, rng);
    const auto s = linearize_at(m, x0);
    const auto d = dc_parts(m, x);
    EXPECT_NEAR(s.loss.eval(x0), dc_parts(m, x0).B, 1e-9);
    EXPECT_GE(s.loss.eval(x) + 1e-9, d.B);
    EXPECT_LE(s.square.eval(x), d.M + 1e-12);
    // Restricted rows dominate the original rows, so restricted feasibility implies feasibility.
    const auto p = restriction_at(m, x0, 1.0);
    for (std::size_t r = 0; r < m.relay_rows.size(); ++r) {
      EXPECT_NEAR(p.constraints[r].value(x0), m.relay_rows[r].value(x0), 1e-9);
      EXPECT_GE(p.constraints[r].value(x) + 1e-9, m.relay_rows[r].value(x));
    }
    for (std::size_t r = 0; r < m.qos_rows.size(); ++r) {
      const auto& c = p.constraints[m.relay_rows.size() + r];
      EXPECT_GE(c.value(x) + 1e-9, m.qos_rows[r].value(x));
    }
    // The restricted objective majorizes the penalized objective and touches it at x0.
    EXPECT_NEAR(p.objective.value(x0), penalized_objective(m, x0, 1.0), 1e-8);
    EXPECT_GE(p.objective.value(x) + 1e-8, penalized_objective(m, x, 1.0));
  }
}

TEST(ScaIteration, DescentAndFeasibilityOverTenSteps) {
  const double rho = reference_penalty();
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto inst = random_instance(seed, 2, 2, seed % 2 ? 1.0 : 0.0);
    const auto m = build_relaxed_problem(inst);
    auto x0 = initialize(m, inst);
    ASSERT_TRUE(x0.has_value());
    auto x = *x0;
    EXPECT_LE(max_violation(m, x), 1e-9);
    double prev = penalized_objective(m, x, rho);
    for (int it = 0; it < 10; ++it) {
      const auto step = sca_iteration(m, x, rho);
      const double cur = penalized_objective(m, step.x, rho);
      EXPECT_LE(cur, prev + 1e-9) << "seed " << seed << " iteration " << it;
      EXPECT_LE(max_violation(m, step.x), 1e-9);
      prev = cur;
      x = step.x;
    }
  }
}

TEST(ScaIteration, ConvergedIterateIsAFixedPoint) {
  const auto inst = random_instance(2, 2, 2, 1.0);
  const auto run = run_algorithm1(inst);
  ASSERT_TRUE(run.result.has_policy());
  const auto m = build_relaxed_problem(inst);
  const double before = penalized_objective(m, run.relaxed_x, run.final_rho);
  const auto step = sca_iteration(m, run.relaxed_x, run.final_rho);
  const double after = penalized_objective(m, step.x, run.final_rho);
  EXPECT_LE(after, before + 1e-9);
  EXPECT_LE(before - after, 1e-4 * std::abs(before));
}

TEST(Algorithm1, PenaltyFromReferenceBudgets) {
  // 10 log2(1 + 10 W / 1e-14 W) = 10 * 49.8289...
  EXPECT_NEAR(reference_penalty(), 498.289214233, 1e-6);
}

TEST(Algorithm1, AllZeroChannelsGiveZero) {
  const auto inst = blank(2, 2, 2);
  const auto r = algorithm1_solve(inst);
  ASSERT_TRUE(r.has_policy()) << r.message;
  EXPECT_EQ(r.objective, 0.0);
}

TEST(Algorithm1, SinglePuTakesFullDirectPower) {
  auto inst = blank(1, 0, 1);
  inst.channels.f_direct(0, 0) = 1000.0;
  inst.r_req = {1.0};
  const auto g = greedy_policy(inst, ReceiverModel::sic);
  ASSERT_TRUE(g.has_value());
  EXPECT_EQ(g->assignment.c_direct(0, 0), 1);
  EXPECT_NEAR(g->powers.q_direct(0, 0), inst.p_max_pt, 1e-6);
  const auto r = algorithm1_solve(inst);
  ASSERT_TRUE(r.has_policy());
  EXPECT_NEAR(r.objective, 2.0 * std::log2(1.0 + 10.0 * 1000.0), 1e-5);
}

TEST(Algorithm1, InitializerAlwaysFeasibleWithoutQos) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const auto inst = random_instance(seed, 1 + seed % 3, 4, 0.0);
    const auto g = greedy_policy(inst, ReceiverModel::sic);
    ASSERT_TRUE(g.has_value()) << seed;
    EXPECT_TRUE(validate_policy(*g, inst).feasible());
  }
}

TEST(Algorithm1, RelayPairMatchesGridSearch) {
  const auto inst = relay_pair_instance();
  const auto r = algorithm1_solve(inst);
  ASSERT_TRUE(r.has_policy()) << r.message;
  ASSERT_EQ(r.policy.assignment.c_relay[0], 1);
  ASSERT_EQ(r.policy.assignment.s_pair(0, 0, 0), 1);
  // Grid over (p_PU, p_SU, q_ST), refined twice around the incumbent.
  const auto& ch = inst.channels;
  auto value = [&](double ppu, double psu, double q) {
    if (ppu + psu > inst.p_max_st || q > inst.p_max_pt || ppu < 0 || psu < 0 || q < 0) return -1.0;
    const double rpu = noma_pu_rate(ppu, psu, ch.h_st_pu(0, 0));
    if (rpu > relay_hop_rate(q, ch.f_relay_hop[0])) return -1.0;
    return inst.weight_pu * rpu + inst.weight_su * noma_su_rate(psu, ch.g_st_su(0, 0));
  };
  double best = -1.0, bp = 0, bs = 0, bq = 0;
  double span_p = inst.p_max_st, span_q = inst.p_max_pt, cp = 0.5 * span_p, cs = 0.5 * span_p, cq = 0.5 * span_q;
  for (int round = 0; round < 3; ++round) {
    const int n = 60;
    for (int a = 0; a <= n; ++a)
      for (int b = 0; b <= n; ++b)
        for (int c = 0; c <= n; ++c) {
          const double ppu = cp + span_p * (double(a) / n - 0.5), psu = cs + span_p * (double(b) / n - 0.5);
          const double q = cq + span_q * (double(c) / n - 0.5);
          const double v = value(ppu, psu, q);
          if (v > best) best = v, bp = ppu, bs = psu, bq = q;
        }
    cp = bp, cs = bs, cq = bq;
    span_p /= 5.0;
    span_q /= 5.0;
  }
  EXPECT_NEAR(r.objective, best, 1e-2);
  EXPECT_GE(r.objective, best - 1e-2);
}

TEST(Algorithm1, ReturnsValidatedPoliciesWithTrace) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto inst = random_instance(seed, 2, 4, 1.0);
    const auto run = run_algorithm1(inst);
    const auto& r = run.result;
    ASSERT_TRUE(r.has_policy()) << r.message;
    EXPECT_TRUE(validate_policy(r.policy, inst).feasible());
    EXPECT_LE(run.max_fractionality, 1e-3);
    ASSERT_EQ(r.trace.columns.size(), 7u);
    for (const auto& row : r.trace.rows) EXPECT_LE(row[3], row[2] + 1e-9);
    EXPECT_EQ(r.trace.rows.size(), r.iterations);
  }
}

TEST(Algorithm1, FrozenProblemOnlyKeepsActiveEntities) {
  const auto inst = all_admissible_222();
  Assignment a(2, 2, 2);
  a.c_relay[0] = 1;
  a.s_pair(0, 1, 0) = 1;
  a.c_direct(1, 1) = 1;
  a.s_pair(0, 0, 1) = 1;
  const auto f = build_frozen_problem(inst, a);
  // relay power, relayed pair (two powers), direct power, SU-only pair (one power)
  EXPECT_EQ(f.num_vars(), 5u);
  EXPECT_EQ(f.relay_rows.size(), 1u);
  EXPECT_TRUE(f.binaries.empty());
}
