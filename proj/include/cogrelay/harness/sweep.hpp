// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cogrelay/baselines/baselines.hpp"
#include "cogrelay/baselines/oracle.hpp"
#include "cogrelay/harness/config.hpp"
#include "cogrelay/monotonic/polyblock.hpp"
#include "cogrelay/sca/algorithm.hpp"

namespace cogrelay::harness {

inline constexpr const char* kVersion = "cogrelay 0.1.0";

/// A returned policy broke a constraint. `replay_path` holds the offending instance.
class ValidationFailure : public std::runtime_error {
 public:
  ValidationFailure(const std::string& what, std::string replay) : std::runtime_error(what), replay_path(std::move(replay)) {}
  std::string replay_path;
};

inline ReceiverModel receiver_of(Scheme s) {
  return s == Scheme::baseline1 ? ReceiverModel::interference_as_noise : ReceiverModel::sic;
}

/// Seed of realization r. Shared by every sweep point (common random numbers): along the distance
/// axis the same users and fading are seen at each separation, and sweeps that differ only in
/// the QoS target see the same channels.
inline std::uint64_t realization_seed(std::uint64_t master, std::size_t r) { return derive_seed(master, r); }

inline ProblemInstance instance_for(const ExperimentConfig& c, double value, std::uint64_t seed) {
  Topology topo = c.topology;
  InstanceOverrides ov = c.overrides;
  switch (c.axis) {
    case SweepAxis::normalized_distance: topo.distance_pt_st = topo.separation_for_normalized(value); break;
    case SweepAxis::num_users: topo.num_pu = topo.num_su = static_cast<std::size_t>(value); break;
    case SweepAxis::qos: ov.r_req = value; break;
  }
  return generate_realization(topo, seed, ov);
}

inline SolveResult run_scheme(Scheme s, const ProblemInstance& inst, std::uint64_t seed, const ExperimentConfig& c) {
  switch (s) {
    case Scheme::optimal: {
      monotonic::PolyblockOptions o;
      o.epsilon = c.epsilon;
      o.trace = false;
      return monotonic::polyblock_solve(inst, o);
    }
    case Scheme::sca: return sca::algorithm1_solve(inst);
    case Scheme::baseline1: return baselines::baseline1_solve(inst);
    case Scheme::baseline2: return baselines::baseline2_solve(inst, seed);
    case Scheme::oracle: {
      baselines::OracleOptions o;
      o.levels = c.oracle_levels;
      o.threads = 1;
      return baselines::brute_force(inst, o);
    }
  }
  throw InvalidInput("unknown scheme");
}

/// One scheme on one realization.
struct Sample {
  std::size_t point = 0, realization = 0;
  double value = 0.0;
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::sca;
  SolveStatus status = SolveStatus::failed;
  double objective = std::numeric_limits<double>::quiet_NaN();  // weighted throughput
  double avg_pu = std::numeric_limits<double>::quiet_NaN();
  double avg_su = std::numeric_limits<double>::quiet_NaN();
  double avg_user = std::numeric_limits<double>::quiet_NaN();
  double resolution = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
  double max_ascent = -std::numeric_limits<double>::infinity();  // worst per-step increase in an MM trace
  std::string message;
  bool invalid = false;  // returned a policy that failed validation
  bool ok() const { return std::isfinite(objective); }
};

/// Averages over the successful realizations of one scheme at one sweep point.
struct MetricRow {
  double value = 0.0;
  Scheme scheme = Scheme::sca;
  double avg_pu = 0.0, avg_su = 0.0, avg_user = 0.0, avg_weighted = 0.0;
  double feasibility_rate = 0.0;
  double max_resolution = 0.0;
  double seconds = 0.0;
  std::size_t realizations = 0;  // successful ones
};

struct SweepOutput {
  ExperimentConfig config;
  std::vector<Sample> samples;  // (point, realization, scheme) order
  std::vector<MetricRow> rows;  // (point, scheme) order
};

namespace detail {

inline std::string replay_file(const ExperimentConfig& c, const Sample& s) {
  std::ostringstream name;
  name << "replay_point" << s.point << "_r" << s.realization << ".txt";
  return (std::filesystem::path(c.output_dir) / name.str()).string();
}

/// Largest `penalized_objective - objective_before` over a trace; -inf when the trace has no such columns.
inline double max_ascent(const IterationTrace& t) {
  const auto col = [&](const char* name) {
    return std::size_t(std::find(t.columns.begin(), t.columns.end(), name) - t.columns.begin());
  };
  const std::size_t b = col("objective_before"), a = col("penalized_objective");
  double worst = -std::numeric_limits<double>::infinity();
  if (b == t.columns.size() || a == t.columns.size()) return worst;
  for (const auto& r : t.rows) worst = std::max(worst, r[a] - r[b]);
  return worst;
}

inline Sample solve_sample(const ExperimentConfig& c, std::size_t point, std::size_t r, Scheme scheme,
                           const ProblemInstance& inst) {
  Sample s;
  s.point = point;
  s.realization = r;
  s.value = c.values[point];
  s.seed = realization_seed(c.seed, r);
  s.scheme = scheme;
  SolveResult res;
  try {
    res = run_scheme(scheme, inst, s.seed, c);
  } catch (const NumericalError& e) {
    res.status = SolveStatus::failed;
    res.message = e.what();
  }
  s.status = res.status;
  s.seconds = res.seconds;
  s.message = res.message;
  s.resolution = res.resolution;
  s.max_ascent = detail::max_ascent(res.trace);
  if (!res.has_policy()) return s;
  ValidationOptions vo;
  vo.model = receiver_of(scheme);
  const auto v = validate_policy(res.policy, inst, vo);
  if (!v.feasible()) {
    s.message = v.summary();
    s.status = SolveStatus::failed;
    s.invalid = true;
    return s;  // the caller aborts the sweep
  }
  s.objective = v.report.weighted_total;
  s.avg_pu = v.report.avg_pu_throughput();
  s.avg_su = v.report.avg_su_throughput();
  s.avg_user = v.report.avg_user_throughput();
  return s;
}

}  // namespace detail

inline std::vector<MetricRow> summarize(const ExperimentConfig& c, const std::vector<Sample>& samples) {
  std::vector<MetricRow> rows;
  for (std::size_t p = 0; p < c.values.size(); ++p)
    for (auto scheme : c.schemes) {
      MetricRow m;
      m.value = c.values[p];
      m.scheme = scheme;
      std::size_t tried = 0;
      for (const auto& s : samples) {
        if (s.point != p || s.scheme != scheme) continue;
        ++tried;
        m.seconds += s.seconds;
        if (!s.ok()) continue;
        ++m.realizations;
        m.avg_pu += s.avg_pu;
        m.avg_su += s.avg_su;
        m.avg_user += s.avg_user;
        m.avg_weighted += s.objective;
        if (std::isfinite(s.resolution)) m.max_resolution = std::max(m.max_resolution, s.resolution);
      }
      if (m.realizations) {
        const double n = double(m.realizations);
        m.avg_pu /= n, m.avg_su /= n, m.avg_user /= n, m.avg_weighted /= n;
      }
      m.feasibility_rate = tried ? double(m.realizations) / double(tried) : 0.0;
      m.seconds = tried ? m.seconds / double(tried) : 0.0;
      rows.push_back(m);
    }
  return rows;
}

inline void write_sweep(const SweepOutput& out);

/// Run every scheme on every (point, realization). Validation failures abort the sweep after
/// writing the instance for replay; other output files are skipped when `write` is false.
inline SweepOutput run_sweep(const ExperimentConfig& config, bool write = true,
                             const std::function<void(const Sample&)>& progress = {}) {
  config.validate();
  SweepOutput out;
  out.config = config;
  const std::size_t P = config.values.size(), R = config.realizations, S = config.schemes.size();
  std::vector<Sample> samples(P * R * S);
  std::vector<std::string> failures(P * R);
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (std::size_t task; (task = next++) < P * R;) {
      const std::size_t p = task / R, r = task % R;
      const auto inst = instance_for(config, config.values[p], realization_seed(config.seed, r));
      for (std::size_t s = 0; s < S; ++s) {
        auto& slot = samples[task * S + s];
        slot = detail::solve_sample(config, p, r, config.schemes[s], inst);
        if (slot.invalid) {
          std::ostringstream os;
          write_instance(os, inst);
          failures[task] = os.str();
        }
        if (progress) {
          std::lock_guard lock(progress_mutex);
          progress(slot);
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(config.threads, P * R); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t task = 0; task < P * R; ++task) {
    if (failures[task].empty()) continue;
    std::filesystem::create_directories(config.output_dir);
    const auto& bad = samples[task * S];
    std::string path = detail::replay_file(config, bad);
    std::ofstream(path) << failures[task];
    std::string what = "validation failed at point " + std::to_string(task / R) + ", realization " +
                       std::to_string(task % R);
    for (std::size_t s = 0; s < S; ++s)
      if (samples[task * S + s].invalid)
        what += "; " + std::string(to_string(config.schemes[s])) + ": " + samples[task * S + s].message;
    throw ValidationFailure(what, path);
  }
  out.samples = std::move(samples);
  out.rows = summarize(config, out.samples);
  if (write) write_sweep(out);
  return out;
}

// ---------------------------------------------------------------------------
// Output files

namespace detail {

inline void put(std::ostream& os, double v) {
  if (std::isfinite(v)) os << v;
}

}  // namespace detail

inline void write_metrics_csv(std::ostream& os, SweepAxis axis, const std::vector<MetricRow>& rows) {
  os << std::setprecision(12);
  os << to_string(axis) << ",scheme,avg_pu_throughput,avg_su_throughput,avg_user_throughput,avg_weighted_throughput,"
        "feasibility_rate,max_resolution,realizations\n";
  for (const auto& m : rows) {
    os << m.value << ',' << to_string(m.scheme) << ',' << m.avg_pu << ',' << m.avg_su << ',' << m.avg_user << ','
       << m.avg_weighted << ',' << m.feasibility_rate << ',' << m.max_resolution << ',' << m.realizations << '\n';
  }
}

inline void write_samples_csv(std::ostream& os, SweepAxis axis, const std::vector<Sample>& samples) {
  os << std::setprecision(12);
  os << "point," << to_string(axis) << ",realization,seed,scheme,status,weighted,avg_pu,avg_su,avg_user\n";
  for (const auto& s : samples) {
    os << s.point << ',' << s.value << ',' << s.realization << ',' << s.seed << ',' << to_string(s.scheme) << ','
       << to_string(s.status) << ',';
    detail::put(os, s.objective);
    os << ',';
    detail::put(os, s.avg_pu);
    os << ',';
    detail::put(os, s.avg_su);
    os << ',';
    detail::put(os, s.avg_user);
    os << '\n';
  }
}

/// Writes metrics.csv, one wide CSV per metric (plot data), samples.csv, timing.csv and manifest.txt.
inline void write_sweep(const SweepOutput& out) {
  const auto& c = out.config;
  const std::filesystem::path dir(c.output_dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "metrics.csv");
    write_metrics_csv(os, c.axis, out.rows);
  }
  {
    std::ofstream os(dir / "samples.csv");
    write_samples_csv(os, c.axis, out.samples);
  }
  const std::vector<std::pair<const char*, double MetricRow::*>> metrics = {
      {"pu_throughput.csv", &MetricRow::avg_pu},
      {"su_throughput.csv", &MetricRow::avg_su},
      {"user_throughput.csv", &MetricRow::avg_user},
      {"weighted_throughput.csv", &MetricRow::avg_weighted},
      {"feasibility.csv", &MetricRow::feasibility_rate}};
  for (const auto& [file, field] : metrics) {
    std::ofstream os(dir / file);
    os << std::setprecision(12) << to_string(c.axis);
    for (auto s : c.schemes) os << ',' << to_string(s);
    os << '\n';
    for (std::size_t p = 0; p < c.values.size(); ++p) {
      os << c.values[p];
      for (std::size_t s = 0; s < c.schemes.size(); ++s) os << ',' << out.rows[p * c.schemes.size() + s].*field;
      os << '\n';
    }
  }
  {
    std::ofstream os(dir / "timing.csv");
    os << std::setprecision(6) << to_string(c.axis) << ",scheme,mean_seconds\n";
    for (const auto& m : out.rows) os << m.value << ',' << to_string(m.scheme) << ',' << m.seconds << '\n';
  }
  {
    std::ofstream os(dir / "manifest.txt");
    os << "version = " << kVersion << '\n';
    os << "seed_rule = derive_seed(run.seed, realization), shared by all sweep points\n";
    write_config(os, c);
    os << "seeds =";
    for (std::size_t r = 0; r < c.realizations; ++r) os << ' ' << realization_seed(c.seed, r);
    os << '\n';
  }
}

}  // namespace cogrelay::harness
