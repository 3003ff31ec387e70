// SPDX-License-Identifier: Apache-2.0
// Command-line front end: generate, solve, sweep, compare.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "cogrelay/harness/compare.hpp"
#include "cogrelay/harness/sweep.hpp"

using namespace cogrelay;

namespace {

enum Exit { kOk = 0, kInfeasible = 2, kValidation = 3, kBadConfig = 4 };

std::string config_help() {
  std::ostringstream os;
  os << "Config file: one `key = value` per line, `[section]` headers prefix later keys, `#` comments.\n"
        "Keys and defaults:\n";
  for (const auto& [k, v] : harness::config_entries(harness::ExperimentConfig{})) os << "  " << k << " = " << v << '\n';
  os << "Exit codes: 0 success, 2 infeasible, 3 validation failure, 4 bad config.\n";
  return os.str();
}

int cmd_generate(const std::string& config_path, double distance, std::size_t users, std::size_t subcarriers,
                 double r_req, std::uint64_t seed, const std::string& out) {
  harness::ExperimentConfig c;
  if (!config_path.empty()) c = harness::load_config(config_path);
  if (users) c.topology.num_pu = c.topology.num_su = users;
  if (subcarriers) c.topology.num_subcarriers = subcarriers;
  if (r_req >= 0.0) c.overrides.r_req = r_req;
  if (distance >= 0.0) {
    if (distance > 1.0) throw InvalidInput("normalized distance must lie in [0, 1]");
    c.topology.distance_pt_st = c.topology.separation_for_normalized(distance);
  }
  const auto inst = generate_realization(c.topology, seed, c.overrides);
  if (out.empty() || out == "-") {
    write_instance(std::cout, inst);
  } else {
    std::ofstream os(out);
    write_instance(os, inst);
  }
  return kOk;
}

int cmd_solve(const std::string& instance_path, const std::string& scheme_name, std::uint64_t seed,
              const std::string& policy_out, const std::string& trace_out) {
  std::ifstream in(instance_path);
  if (!in) throw InvalidInput("cannot open " + instance_path);
  const auto inst = read_instance(in);
  const auto scheme = harness::parse_scheme(scheme_name);
  const auto res = harness::run_scheme(scheme, inst, seed, harness::ExperimentConfig{});
  std::printf("method     %s\nstatus     %s\nseconds    %.3f\niterations %zu\n", res.method.c_str(),
              to_string(res.status), res.seconds, res.iterations);
  if (!res.message.empty()) std::printf("message    %s\n", res.message.c_str());
  if (!trace_out.empty() && !res.trace.columns.empty()) {
    std::ofstream os(trace_out);
    res.trace.write_csv(os);
  }
  if (!res.has_policy()) return res.status == SolveStatus::infeasible ? kInfeasible : kValidation;
  ValidationOptions vo;
  vo.model = harness::receiver_of(scheme);
  const auto v = validate_policy(res.policy, inst, vo);
  std::printf("objective  %.6f\n", v.report.weighted_total);
  if (std::isfinite(res.bound)) std::printf("bound      %.6f\n", res.bound);
  if (std::isfinite(res.resolution)) std::printf("resolution %.3g\n", res.resolution);
  std::printf("avg PU     %.6f\navg SU     %.6f\navg user   %.6f\n", v.report.avg_pu_throughput(),
              v.report.avg_su_throughput(), v.report.avg_user_throughput());
  if (!policy_out.empty()) {
    std::ofstream os(policy_out);
    write_policy(os, res.policy);
  }
  if (!v.feasible()) {
    std::fprintf(stderr, "validation failed:\n%s", v.summary().c_str());
    return kValidation;
  }
  return kOk;
}

int cmd_sweep(const std::string& config_path, const std::string& output, std::size_t threads, bool quiet) {
  harness::ExperimentConfig c;
  try {
    c = harness::load_config(config_path);
    if (!output.empty()) c.output_dir = output;
    if (threads) c.threads = threads;
    c.validate();
  } catch (const InvalidInput& e) {
    std::fprintf(stderr, "bad config: %s\n", e.what());
    return kBadConfig;
  }
  const std::size_t total = c.values.size() * c.realizations * c.schemes.size();
  std::size_t done = 0;
  auto progress = [&](const harness::Sample&) {
    if (!quiet && (++done % 20 == 0 || done == total)) std::fprintf(stderr, "\r%zu / %zu solves", done, total);
  };
  try {
    const auto out = harness::run_sweep(c, true, progress);
    if (!quiet) std::fprintf(stderr, "\n");
    std::cout << harness::format_comparison(harness::compare(harness::to_table(c.axis, out.rows)));
    std::printf("\nwrote %s/{metrics,samples,timing,pu_throughput,su_throughput,user_throughput,"
                "weighted_throughput,feasibility}.csv and manifest.txt\n",
                c.output_dir.c_str());
  } catch (const harness::ValidationFailure& e) {
    std::fprintf(stderr, "\n%s\ninstance saved to %s\n", e.what(), e.replay_path.c_str());
    return kValidation;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint power and subcarrier allocation for cooperative cognitive relaying with NOMA"};
  app.require_subcommand(1);
  app.footer(config_help());

  auto* gen = app.add_subcommand("generate", "Draw one channel realization and write it as an instance file");
  std::string gen_config, gen_out;
  double gen_distance = -1.0, gen_rreq = -1.0;
  std::size_t gen_users = 0, gen_n = 0;
  std::uint64_t gen_seed = 1;
  gen->add_option("--config", gen_config, "Config file supplying topology and instance keys");
  gen->add_option("--distance", gen_distance, "Normalized PT-ST distance in [0, 1] (default: topology.distance_pt_st)");
  gen->add_option("--users", gen_users, "Number of PUs = number of SUs (default 2)");
  gen->add_option("--subcarriers", gen_n, "Number of subcarriers (default 8)");
  gen->add_option("--r-req", gen_rreq, "Minimum PU rate, bits/s/Hz (default 1)");
  gen->add_option("--seed", gen_seed, "Realization seed")->capture_default_str();
  gen->add_option("-o,--out", gen_out, "Output file (default stdout)");

  auto* solve = app.add_subcommand("solve", "Solve an instance file with one scheme");
  std::string solve_in, solve_scheme = "sca", solve_policy, solve_trace;
  std::uint64_t solve_seed = 1;
  solve->add_option("instance", solve_in, "Instance file")->required();
  solve->add_option("-s,--scheme", solve_scheme, "optimal | sca | baseline1 | baseline2 | oracle")->capture_default_str();
  solve->add_option("--seed", solve_seed, "Seed of the random baseline")->capture_default_str();
  solve->add_option("-p,--policy", solve_policy, "Write the policy here");
  solve->add_option("-t,--trace", solve_trace, "Write the iteration trace (CSV) here");

  auto* sweep = app.add_subcommand("sweep", "Monte-Carlo sweep from a config file");
  std::string sweep_config, sweep_out;
  std::size_t sweep_threads = 0;
  bool sweep_quiet = false;
  sweep->add_option("config", sweep_config, "Config file")->required();
  sweep->add_option("-o,--output", sweep_out, "Override run.output");
  sweep->add_option("-j,--threads", sweep_threads, "Override run.threads");
  sweep->add_flag("-q,--quiet", sweep_quiet, "No progress output");

  auto* cmp = app.add_subcommand("compare", "Compare metrics.csv files from one or more sweeps");
  std::vector<std::string> cmp_files;
  cmp->add_option("metrics", cmp_files, "metrics.csv files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kBadConfig;
  }
  try {
    if (*gen) return cmd_generate(gen_config, gen_distance, gen_users, gen_n, gen_rreq, gen_seed, gen_out);
    if (*solve) return cmd_solve(solve_in, solve_scheme, solve_seed, solve_policy, solve_trace);
    if (*sweep) return cmd_sweep(sweep_config, sweep_out, sweep_threads, sweep_quiet);
    if (*cmp) {
      std::cout << harness::compare_report(cmp_files);
      return kOk;
    }
  } catch (const InvalidInput& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kBadConfig;
  }
  return kOk;
}
