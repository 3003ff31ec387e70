// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cogrelay/harness/compare.hpp"
#include "cogrelay/harness/sweep.hpp"

using namespace cogrelay;
using namespace cogrelay::harness;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig tiny(const std::string& dir) {
  std::stringstream ss(
      "[topology]\nnum_pu = 1\nnum_su = 1\nnum_subcarriers = 2\n"
      "[sweep]\naxis = normalized_distance\nvalues = 0.2, 0.8\n"
      "[run]\nschemes = optimal, sca, baseline1, baseline2\nrealizations = 2\nseed = 5\n");
  auto c = parse_config(ss);
  c.output_dir = (std::filesystem::path(::testing::TempDir()) / dir).string();
  return c;
}

MetricTable table(const std::string& csv) {
  std::stringstream ss(csv);
  return read_metrics_csv(ss);
}

}  // namespace

TEST(Config, ParsesSectionsAndComments) {
  std::stringstream ss(
      "# comment\n[topology]\ndistance_pt_st = 304  # trailing\nnum_subcarriers = 4\n"
      "[instance]\nr_req = 2\n[run]\nschemes = sca,optimal\nrealizations = 3\n"
      "sweep.axis = qos\nsweep.values = 0,1,2\n");
  const auto c = parse_config(ss);
  EXPECT_EQ(c.topology.distance_pt_st, 304.0);
  EXPECT_EQ(c.topology.num_subcarriers, 4u);
  EXPECT_EQ(c.overrides.r_req, 2.0);
  EXPECT_EQ(c.schemes, (std::vector<Scheme>{Scheme::sca, Scheme::optimal}));
  EXPECT_EQ(c.realizations, 3u);
  EXPECT_EQ(c.axis, SweepAxis::qos);
  EXPECT_EQ(c.values, (std::vector<double>{0, 1, 2}));
}

TEST(Config, RoundTripsThroughText) {
  ExperimentConfig c;
  c.values = {0.1, 0.2, 0.30000000000000004};
  c.schemes = {Scheme::oracle, Scheme::baseline2};
  c.topology.noise_dBm = -107.5;
  std::stringstream ss;
  write_config(ss, c);
  const auto back = parse_config(ss);
  EXPECT_EQ(back.values, c.values);
  EXPECT_EQ(back.schemes, c.schemes);
  EXPECT_EQ(back.topology.noise_dBm, -107.5);
  EXPECT_EQ(config_entries(back), config_entries(c));
}

TEST(Config, RejectsBadInput) {
  auto bad = [](const std::string& text) {
    std::stringstream ss(text);
    EXPECT_THROW(parse_config(ss), InvalidInput) << text;
  };
  bad("nonsense = 1\n");
  bad("run.realizations = 0\n");
  bad("run.realizations = 2.5\n");
  bad("run.schemes = sca, magic\n");
  bad("sweep.values = 0.5, 1.5\n");
  bad("sweep.axis = num_users\nsweep.values = 1, 2.5\n");
  bad("topology.d_ref = abc\n");
  bad("[topology\n");
  bad("just words\n");
  bad("optimal.epsilon = 0\n");
}

TEST(Config, SeedsArePairedAcrossSweepValues) {
  EXPECT_EQ(realization_seed(3, 4), derive_seed(3, 4));
  EXPECT_NE(realization_seed(3, 4), realization_seed(3, 5));
  ExperimentConfig c;
  c.axis = SweepAxis::qos;
  const auto a = instance_for(c, 1.0, 99), b = instance_for(c, 2.0, 99);
  EXPECT_EQ(a.channels, b.channels);
  EXPECT_EQ(b.r_req, std::vector<double>(2, 2.0));
  c.axis = SweepAxis::num_users;
  EXPECT_EQ(instance_for(c, 3.0, 99).K(), 3u);
  c.axis = SweepAxis::normalized_distance;
  // same fading draws, only the separation changes
  const auto near = instance_for(c, 0.2, 99), far = instance_for(c, 0.8, 99);
  EXPECT_LT(far.channels.f_relay_hop[0], near.channels.f_relay_hop[0]);
  EXPECT_EQ(far.channels.f_direct, near.channels.f_direct);
  EXPECT_EQ(far.channels.g_st_su, near.channels.g_st_su);
}

TEST(Sweep, OneRowPerSchemeAndPoint) {
  auto c = tiny("sweep_rows");
  c.realizations = 1;
  const auto out = run_sweep(c, false);
  ASSERT_EQ(out.samples.size(), 2u * 4u);
  ASSERT_EQ(out.rows.size(), 2u * 4u);
  for (std::size_t n = 0; n < out.rows.size(); ++n) {
    EXPECT_EQ(out.rows[n].scheme, c.schemes[n % 4]);
    EXPECT_EQ(out.rows[n].value, c.values[n / 4]);
    EXPECT_LE(out.rows[n].feasibility_rate, 1.0);
  }
  for (const auto& s : out.samples)
    if (s.ok()) EXPECT_NEAR(s.avg_user, 0.5 * (s.avg_pu + s.avg_su), 1e-12);
}

TEST(Sweep, OutputsAreReproducibleAcrossThreadCounts) {
  auto a = tiny("sweep_a"), b = tiny("sweep_b");
  b.threads = 3;
  run_sweep(a);
  run_sweep(b);
  const std::filesystem::path da(a.output_dir), db(b.output_dir);
  for (const char* f : {"metrics.csv", "samples.csv", "pu_throughput.csv", "su_throughput.csv",
                        "user_throughput.csv", "weighted_throughput.csv", "feasibility.csv"}) {
    ASSERT_TRUE(std::filesystem::exists(da / f)) << f;
    EXPECT_EQ(slurp(da / f), slurp(db / f)) << f;
  }
  EXPECT_TRUE(std::filesystem::exists(da / "timing.csv"));
  EXPECT_NE(slurp(da / "manifest.txt").find("run.seed = 5"), std::string::npos);
}

TEST(Sweep, ScaSamplesRecordMonotoneDescent) {
  auto c = tiny("sweep_descent");
  c.schemes = {Scheme::sca};
  const auto out = run_sweep(c, false);
  for (const auto& s : out.samples) EXPECT_LE(s.max_ascent, 1e-9);
}

TEST(Spearman, ExactPermutationValues) {
  // n = 4, perfect order: 2 of 24 permutations reach |rho| = 1
  const auto r = spearman({1, 2, 3, 4}, {10, 20, 30, 40});
  EXPECT_DOUBLE_EQ(r.rho, 1.0);
  EXPECT_TRUE(r.exact);
  EXPECT_DOUBLE_EQ(r.p_value, 2.0 / 24.0);
  const auto d = spearman({1, 2, 3, 4, 5, 6, 7}, {7, 6, 5, 4, 3, 2, 1});
  EXPECT_DOUBLE_EQ(d.rho, -1.0);
  EXPECT_DOUBLE_EQ(d.p_value, 2.0 / 5040.0);
  // rho = 0.8 for n = 4: one identity plus three adjacent swaps, and their reversals
  const auto m = spearman({1, 2, 3, 4}, {1, 3, 2, 4});
  EXPECT_DOUBLE_EQ(m.rho, 0.8);
  EXPECT_DOUBLE_EQ(m.p_value, 8.0 / 24.0);
}

TEST(Spearman, TiesUseAverageRanks) {
  EXPECT_EQ(ranks({3, 1, 3, 2}), (std::vector<double>{3.5, 1, 3.5, 2}));
  EXPECT_THROW(spearman({1, 2}, {1}), InvalidInput);
}

TEST(Compare, IdenticalInputsHaveNoGap) {
  const std::string csv =
      "normalized_distance,scheme,avg_pu_throughput,avg_su_throughput,avg_user_throughput,"
      "avg_weighted_throughput,feasibility_rate,max_resolution,realizations\n"
      "0.2,optimal,3,1,2,7,1,0,5\n0.2,oracle,3,1,2,7,1,0.5,5\n0.2,sca,2,1,1.5,5,1,0,5\n"
      "0.4,optimal,2,2,2,6,1,0,5\n0.4,oracle,2,2,2,6,1,0.5,5\n0.4,sca,2,1,1.5,5,1,0,5\n";
  const auto c = compare(table(csv));
  ASSERT_EQ(c.points.size(), 2u);
  for (const auto& p : c.points) {
    EXPECT_EQ(p.gap_to_oracle.at("optimal"), 0.0);
    EXPECT_EQ(p.oracle_resolution, 0.5);
    EXPECT_EQ(p.reference, "optimal");
    EXPECT_TRUE(p.expected_order.value());
  }
  EXPECT_DOUBLE_EQ(c.points[0].ratio.at("sca"), 5.0 / 7.0);
  EXPECT_EQ(c.points[0].order.back(), "sca");
  EXPECT_FALSE(format_comparison(c).empty());
}

TEST(Compare, MergeChecksAxisGridAndDuplicates) {
  const std::string head =
      ",scheme,avg_pu_throughput,avg_su_throughput,avg_user_throughput,"
      "avg_weighted_throughput,feasibility_rate,max_resolution,realizations\n";
  const auto a = table("qos" + head + "1,sca,1,1,1,3,1,0,2\n2,sca,1,1,1,3,1,0,2\n");
  const auto b = table("qos" + head + "1,optimal,1,1,1,3,1,0,2\n2,optimal,1,1,1,3,1,0,2\n");
  const auto other_grid = table("qos" + head + "1,optimal,1,1,1,3,1,0,2\n3,optimal,1,1,1,3,1,0,2\n");
  const auto other_axis = table("num_users" + head + "1,optimal,1,1,1,3,1,0,2\n2,optimal,1,1,1,3,1,0,2\n");
  EXPECT_EQ(merge_tables({a, b}).records.size(), 4u);
  EXPECT_THROW(merge_tables({a, other_grid}), InvalidInput);
  EXPECT_THROW(merge_tables({a, other_axis}), InvalidInput);
  EXPECT_THROW(merge_tables({a, a}), InvalidInput);
  EXPECT_THROW(table("qos,scheme\n"), InvalidInput);
  EXPECT_THROW(table("qos" + head + "1,sca,1,1\n"), InvalidInput);
}
