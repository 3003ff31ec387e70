// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "cogrelay/instance.hpp"
#include "cogrelay/rates.hpp"

using namespace cogrelay;

namespace {

ProblemInstance blank(std::size_t K, std::size_t J, std::size_t N) {
  ProblemInstance inst;
  inst.channels = ChannelState(K, J, N);
  inst.r_req.assign(K, 0.0);
  return inst;
}

// K = J = N = 1, SU stronger than PU at the relay.
ProblemInstance one_pair() {
  auto inst = blank(1, 1, 1);
  inst.channels.f_direct(0, 0) = 3.0;
  inst.channels.f_relay_hop[0] = 15.0;
  inst.channels.h_st_pu(0, 0) = 1.0;
  inst.channels.g_st_su(0, 0) = 7.0;
  return inst;
}

}  // namespace

TEST(Topology, NoiseAndPathLoss) {
  Topology t;
  EXPECT_NEAR(t.noise_watts(), 1e-14, 1e-28);
  EXPECT_NEAR(friis_reference_factor(t), 1.4228584142858625e-06, 1e-18);
  // 10 dBi at 100 m with exponent 3.6
  EXPECT_NEAR(pathloss_gain(100.0, t, 10.0), 3.574058744803894e-09, 1e-21);
  EXPECT_DOUBLE_EQ(pathloss_gain(10.0, t, 0.0), friis_reference_factor(t));
  EXPECT_THROW(pathloss_gain(5.0, t, 0.0), InvalidInput);
}

TEST(Topology, NormalizedDistanceRoundTrip) {
  Topology t;
  EXPECT_DOUBLE_EQ(t.separation_for_normalized(0.0), 10.0);
  EXPECT_DOUBLE_EQ(t.separation_for_normalized(1.0), 500.0);
  EXPECT_DOUBLE_EQ(t.separation_for_normalized(0.6), 304.0);
  t.distance_pt_st = 304.0;
  EXPECT_DOUBLE_EQ(t.normalized_separation(), 0.6);
}

TEST(Topology, RejectsBadSettings) {
  Topology t;
  t.d_st_max = 600.0;
  EXPECT_THROW(t.validate(), InvalidInput);
  t = Topology{};
  t.distance_pt_st = 1.0;
  EXPECT_THROW(t.validate(), InvalidInput);
  t = Topology{};
  t.num_subcarriers = 0;
  EXPECT_THROW(t.validate(), InvalidInput);
  t = Topology{};
  t.pathloss_exponent = 1.5;
  EXPECT_THROW(t.validate(), InvalidInput);
}

TEST(Generator, LayoutStaysInRange) {
  Topology t;
  t.num_pu = 5;
  t.num_su = 4;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto l = generate_layout(t, s);
    for (std::size_t k = 0; k < 5; ++k) {
      EXPECT_GE(l.pu_distance[k], t.d_ref);
      EXPECT_LE(l.pu_distance[k], t.d_pt_max);
      EXPECT_GE(l.pu_distance_st[k], t.d_ref);
      // triangle inequality around the two stations
      EXPECT_LE(l.pu_distance_st[k], l.pu_distance[k] + t.distance_pt_st + 1e-9);
      EXPECT_GE(l.pu_distance_st[k], std::abs(l.pu_distance[k] - t.distance_pt_st) - 1e-9);
    }
    for (double d : l.su_distance) {
      EXPECT_GE(d, t.d_ref);
      EXPECT_LE(d, t.d_st_max);
    }
  }
}

TEST(Generator, DeterministicPerSeed) {
  Topology t;
  const auto a = generate_realization(t, 42);
  const auto b = generate_realization(t, 42);
  const auto c = generate_realization(t, 43);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_EQ(a.K(), 2u);
  EXPECT_EQ(a.J(), 2u);
  EXPECT_EQ(a.N(), 8u);
  EXPECT_EQ(a.r_req, std::vector<double>(2, 1.0));
}

// Mean of the relay-hop gain over many realizations matches the path loss (Exp(1) fading).
TEST(Generator, RelayHopFadingHasUnitMean) {
  Topology t;
  t.num_subcarriers = 64;
  const double expected = pathloss_gain(t.distance_pt_st, t, t.gain_pt_dBi) / t.noise_watts();
  double sum = 0.0;
  std::size_t n = 0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    for (double f : generate_realization(t, s).channels.f_relay_hop) sum += f, ++n;
  }
  // 12800 draws, standard error of the mean is about 0.9%
  EXPECT_NEAR(sum / double(n) / expected, 1.0, 0.04);
}

TEST(Generator, AppliesOverrides) {
  Topology t;
  InstanceOverrides ov;
  ov.p_max_pt = 3.0;
  ov.p_max_st = 4.0;
  ov.r_req = 0.5;
  ov.weight_pu = 5.0;
  ov.weight_su = 0.5;
  const auto inst = generate_realization(t, 1, ov);
  EXPECT_EQ(inst.p_max_pt, 3.0);
  EXPECT_EQ(inst.p_max_st, 4.0);
  EXPECT_EQ(inst.r_req, std::vector<double>(2, 0.5));
  EXPECT_EQ(inst.weight_pu, 5.0);
  EXPECT_EQ(inst.weight_su, 0.5);
}

TEST(InstanceIo, RoundTripIsExact) {
  const auto inst = generate_realization(Topology{}, 9);
  std::stringstream ss;
  write_instance(ss, inst);
  EXPECT_EQ(read_instance(ss), inst);
}

TEST(InstanceIo, RejectsMalformedText) {
  std::stringstream a("bogus 1 1 1 1 10 10 2 1\n");
  EXPECT_THROW(read_instance(a), InvalidInput);
  std::stringstream b("cogrelay-instance 1 1 1 1 10 10 2 1\nr_req 1 2\n");
  EXPECT_THROW(read_instance(b), InvalidInput);
  std::stringstream c(
      "cogrelay-instance 1 1 1 1 10 10 2 1\nr_req 1\nf_direct -1\nf_relay_hop 1\nh_st_pu 1\ng_st_su 1\n");
  EXPECT_THROW(read_instance(c), InvalidInput);
}

TEST(Rates, HandValues) {
  EXPECT_DOUBLE_EQ(direct_rate(1.0, 3.0), 2.0);
  EXPECT_DOUBLE_EQ(relay_hop_rate(1.0, 15.0), 2.0);
  // PU: 0.5 log2(1 + 3*1/(1*1+1)) = 0.5 log2(2.5)
  EXPECT_DOUBLE_EQ(noma_pu_rate(3.0, 1.0, 1.0), 0.5 * std::log2(2.5));
  EXPECT_DOUBLE_EQ(noma_su_rate(1.0, 7.0), 1.5);
  EXPECT_DOUBLE_EQ(tin_su_rate(1.0, 1.0, 7.0), 0.5 * std::log2(1.0 + 7.0 / 8.0));
  EXPECT_DOUBLE_EQ(tin_su_rate(0.0, 1.0, 7.0), noma_su_rate(1.0, 7.0));
}

TEST(Rates, AdmissiblePairsOrdering) {
  auto inst = blank(2, 2, 2);
  auto& ch = inst.channels;
  ch.h_st_pu(0, 0) = 1.0, ch.h_st_pu(1, 0) = 5.0, ch.h_st_pu(0, 1) = 2.0, ch.h_st_pu(1, 1) = 2.0;
  ch.g_st_su(0, 0) = 3.0, ch.g_st_su(1, 0) = 5.0, ch.g_st_su(0, 1) = 1.0, ch.g_st_su(1, 1) = 2.0;
  const std::vector<Triple> expected = {{0, 0, 0}, {0, 1, 0}, {0, 1, 1}, {1, 1, 0}, {1, 1, 1}};
  EXPECT_EQ(sic_admissible_pairs(ch), expected);
  EXPECT_FALSE(pair_allowed(ch, ReceiverModel::sic, 1, 0, 0));
  EXPECT_TRUE(pair_allowed(ch, ReceiverModel::interference_as_noise, 1, 0, 0));
}

TEST(Validate, RelayedPairReport) {
  const auto inst = one_pair();
  auto p = Policy::zeros(inst);
  p.assignment.c_relay[0] = 1;
  p.assignment.s_pair(0, 0, 0) = 1;
  p.powers.q_relay[0] = 1.0;  // hop carries 2 bits
  p.powers.p_pu(0, 0) = 3.0;
  p.powers.p_su(0, 0) = 1.0;
  const auto v = validate_policy(p, inst);
  ASSERT_TRUE(v.feasible()) << v.summary();
  const double pu = 0.5 * std::log2(2.5), su = 1.5;
  EXPECT_DOUBLE_EQ(v.report.pu_rate[0], pu);
  EXPECT_DOUBLE_EQ(v.report.su_rate[0], su);
  EXPECT_DOUBLE_EQ(v.report.weighted_total, 2.0 * pu + su);
  EXPECT_DOUBLE_EQ(v.report.avg_user_throughput(), 0.5 * (pu + su));
  EXPECT_DOUBLE_EQ(subcarrier_throughput(p, inst, 0), 2.0 * pu + su);
  const auto tin = subcarrier_throughput(p, inst, 0, ReceiverModel::interference_as_noise);
  EXPECT_DOUBLE_EQ(tin, 2.0 * pu + 0.5 * std::log2(1.0 + 7.0 / 22.0));
}

TEST(Validate, FlagsEachViolation) {
  auto inst = one_pair();
  inst.r_req = {3.0};
  auto p = Policy::zeros(inst);
  p.assignment.c_relay[0] = 1;
  p.assignment.s_pair(0, 0, 0) = 1;
  p.powers.q_relay[0] = 0.01;  // hop too weak for the PU signal
  p.powers.p_pu(0, 0) = 8.0;
  p.powers.p_su(0, 0) = 4.0;  // 12 > 10
  auto names = [&](const ValidationResult& v) {
    std::set<std::string> s;
    for (const auto& x : v.violations) s.insert(x.constraint);
    return s;
  };
  auto v = validate_policy(p, inst);
  EXPECT_EQ(names(v), (std::set<std::string>{"relay", "qos", "st_budget"}));
  EXPECT_FALSE(v.report.relay_constraint_met);
  EXPECT_FALSE(v.report.qos_met[0]);

  auto q = Policy::zeros(inst);
  q.assignment.c_direct(0, 0) = 1;
  q.assignment.c_relay[0] = 1;
  q.powers.q_direct(0, 0) = 11.0;
  EXPECT_TRUE(names(validate_policy(q, inst)).count("subcarrier_exclusive"));
  EXPECT_TRUE(names(validate_policy(q, inst)).count("pt_budget"));

  inst.channels.g_st_su(0, 0) = 0.5;  // below H: SIC not possible
  EXPECT_TRUE(names(validate_policy(p, inst)).count("sic_order"));
  ValidationOptions tin;
  tin.model = ReceiverModel::interference_as_noise;
  EXPECT_FALSE(names(validate_policy(p, inst, tin)).count("sic_order"));

  auto neg = Policy::zeros(inst);
  neg.powers.p_su(0, 0) = -1.0;
  EXPECT_TRUE(names(validate_policy(neg, inst)).count("nonnegative_p_su"));
}

TEST(Validate, ShapeMismatchThrows) {
  const auto inst = one_pair();
  EXPECT_THROW(validate_policy(Policy(2, 1, 1), inst), InvalidInput);
  auto p = Policy::zeros(inst);
  p.assignment.c_direct(0, 0) = 1;
  p.assignment.c_relay[0] = 1;
  EXPECT_THROW(subcarrier_throughput(p, inst, 0), InvalidInput);
  EXPECT_THROW(subcarrier_throughput(Policy::zeros(inst), inst, 1), InvalidInput);
}

TEST(PolicyIo, RoundTripAndRejectsNonBinary) {
  const auto inst = one_pair();
  auto p = Policy::zeros(inst);
  p.assignment.c_direct(0, 0) = 1;
  p.powers.q_direct(0, 0) = 1.0 / 3.0;
  std::stringstream ss;
  write_policy(ss, p);
  EXPECT_EQ(read_policy(ss), p);
  std::string text;
  {
    std::stringstream t;
    write_policy(t, p);
    text = t.str();
  }
  text.replace(text.find("c_direct 1"), 10, "c_direct 2");
  std::stringstream bad(text);
  EXPECT_THROW(read_policy(bad), InvalidInput);
}
