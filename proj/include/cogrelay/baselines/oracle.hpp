// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "cogrelay/common.hpp"
#include "cogrelay/instance.hpp"
#include "cogrelay/rates.hpp"
#include "cogrelay/solve_result.hpp"

namespace cogrelay::baselines {

struct OracleOptions {
  std::size_t levels = 16;       // grid points per active power variable
  std::size_t refinements = 2;   // rounds of x5 shrink around the incumbent
  std::size_t max_subcarriers = 2, max_pu = 2, max_su = 2;
  std::size_t threads = 0;       // 0: hardware concurrency

  void validate() const {
    if (levels < 8) throw InvalidInput("oracle: need at least 8 grid levels");
    if (max_subcarriers > 2 || max_pu > 2 || max_su > 2)
      throw InvalidInput("oracle: size caps cannot exceed N_F = 2, K = 2, J = 2");
  }
};

namespace detail {

// One subcarrier's schedule. pair_k/pair_j < 0: no pair.
struct OracleSlot {
  long direct = -1;
  bool relay = false;
  long pair_k = -1, pair_j = -1;
};

/// Every per-subcarrier schedule allowed by the exclusivity rules and the SIC ordering.
inline std::vector<OracleSlot> slot_options(const ProblemInstance& inst, std::size_t i) {
  std::vector<OracleSlot> out;
  for (int relay = 0; relay < 2; ++relay)
    for (long d = -1; d < long(inst.K()); ++d) {
      if (relay && d >= 0) continue;
      out.push_back({d, relay != 0, -1, -1});
      for (std::size_t k = 0; k < inst.K(); ++k) {
        if (long(k) == d) continue;
        for (std::size_t j = 0; j < inst.J(); ++j)
          if (sic_admissible(inst.channels, i, k, j)) out.push_back({d, relay != 0, long(k), long(j)});
      }
    }
  return out;
}

enum class PowerVar { q_direct, p_pu, p_su };

struct GridVar {
  std::size_t slot;
  PowerVar kind;
  double cap;       // budget of the station that pays for it
  double lipschitz; // bound on |d objective / d power| over the box
};

/// Grid search for one schedule. Relay powers are the closed-form minimum for the relayed rate.
class ScheduleGrid {
 public:
  ScheduleGrid(const ProblemInstance& inst, std::vector<OracleSlot> slots) : inst_(inst), slots_(std::move(slots)) {
    const auto& ch = inst.channels;
    const double w = inst.weight_pu, mu = inst.weight_su;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      const auto& s = slots_[i];
      if (s.direct >= 0)
        vars_.push_back({i, PowerVar::q_direct, inst.p_max_pt, w * ch.f_direct(std::size_t(s.direct), i) / kLn2});
      if (s.pair_k < 0) continue;
      const double h = ch.h_st_pu(std::size_t(s.pair_k), i), g = ch.g_st_su(std::size_t(s.pair_j), i);
      // Without a usable relay hop the PU part of the pair carries nothing, so its power stays 0.
      if (s.relay && h > 0.0 && ch.f_relay_hop[i] > 0.0)
        vars_.push_back({i, PowerVar::p_pu, inst.p_max_st, 0.5 * w * h / kLn2});
      vars_.push_back({i, PowerVar::p_su, inst.p_max_st, 0.5 * (w * h + mu * g) / kLn2});
    }
    std::stable_sort(vars_.begin(), vars_.end(),
                     [](const GridVar& a, const GridVar& b) { return a.kind == PowerVar::q_direct && b.kind != PowerVar::q_direct; });
    x_.assign(vars_.size(), 0.0);
  }

  double lipschitz() const {
    double s = 0.0;
    for (const auto& v : vars_) s += v.lipschitz;
    return s;
  }

  /// Coarse grid plus refinements; returns the best value, -inf if no grid point is feasible.
  double search(std::size_t levels, std::size_t refinements) {
    std::vector<double> lo(vars_.size(), 0.0), step(vars_.size());
    for (std::size_t v = 0; v < vars_.size(); ++v) step[v] = vars_[v].cap / double(levels - 1);
    sweep(lo, step, levels);
    for (std::size_t r = 0; r < refinements && std::isfinite(best_); ++r) {
      for (std::size_t v = 0; v < vars_.size(); ++v) {
        step[v] /= 5.0;
        lo[v] = best_x_[v] - 0.5 * double(levels - 1) * step[v];
      }
      sweep(lo, step, levels);
    }
    return best_;
  }

  Policy policy() const {
    Policy p = Policy::zeros(inst_);
    auto& a = p.assignment;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      const auto& s = slots_[i];
      if (s.direct >= 0) a.c_direct(std::size_t(s.direct), i) = 1;
      if (s.relay) a.c_relay[i] = 1;
      if (s.pair_k >= 0) a.s_pair(std::size_t(s.pair_k), std::size_t(s.pair_j), i) = 1;
    }
    if (std::isfinite(best_)) evaluate(best_x_, &p.powers);
    return p;
  }

 private:
  void sweep(const std::vector<double>& lo, const std::vector<double>& step, std::size_t levels) {
    recurse(0, 0.0, 0.0, lo, step, levels);
  }

  void recurse(std::size_t d, double pt, double st, const std::vector<double>& lo, const std::vector<double>& step,
               std::size_t levels) {
    if (d == vars_.size()) {
      const double v = evaluate(x_, nullptr);
      if (v > best_) best_ = v, best_x_ = x_;
      return;
    }
    const auto& var = vars_[d];
    for (std::size_t l = 0; l < levels; ++l) {
      const double x = lo[d] + double(l) * step[d];
      if (x < 0.0) continue;
      if (x > var.cap) break;
      const bool on_pt = var.kind == PowerVar::q_direct;
      const double pt2 = pt + (on_pt ? x : 0.0), st2 = st + (on_pt ? 0.0 : x);
      if (pt2 > inst_.p_max_pt || st2 > inst_.p_max_st) break;  // larger levels only add load
      x_[d] = x;
      recurse(d + 1, pt2, st2, lo, step, levels);
    }
    x_[d] = 0.0;
  }

  /// Objective at grid point x; -inf when the relay budget or a QoS target fails.
  double evaluate(const std::vector<double>& x, PowerAllocation* out) const {
    const auto& ch = inst_.channels;
    const std::size_t N = slots_.size();
    std::vector<double> q(N, 0.0), ppu(N, 0.0), psu(N, 0.0);
    for (std::size_t v = 0; v < vars_.size(); ++v) {
      const auto& var = vars_[v];
      (var.kind == PowerVar::q_direct ? q : var.kind == PowerVar::p_pu ? ppu : psu)[var.slot] = x[v];
    }
    std::vector<double> pu_rate(inst_.K(), 0.0);
    double pt = 0.0, value = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const auto& s = slots_[i];
      double q_st = 0.0;
      if (s.direct >= 0) {
        const double r = direct_rate(q[i], ch.f_direct(std::size_t(s.direct), i));
        pu_rate[std::size_t(s.direct)] += r;
        value += inst_.weight_pu * r;
        pt += q[i];
      }
      if (s.pair_k >= 0) {
        const auto k = std::size_t(s.pair_k), j = std::size_t(s.pair_j);
        const double r_pu = noma_pu_rate(ppu[i], psu[i], ch.h_st_pu(k, i));
        const double r_su = noma_su_rate(psu[i], ch.g_st_su(j, i));
        if (r_pu > 0.0) q_st = (std::exp2(2.0 * r_pu) - 1.0) / ch.f_relay_hop[i] * (1.0 + 1e-12);
        pu_rate[k] += r_pu;
        value += inst_.weight_pu * r_pu + inst_.weight_su * r_su;
      }
      pt += q_st;
      if (out) {
        if (s.direct >= 0) out->q_direct(std::size_t(s.direct), i) = q[i];
        out->q_relay[i] = s.relay ? q_st : 0.0;
        if (s.pair_k >= 0) {
          out->p_pu(std::size_t(s.pair_k), i) = ppu[i];
          out->p_su(std::size_t(s.pair_j), i) = psu[i];
        }
      }
    }
    if (pt > inst_.p_max_pt) return -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < inst_.K(); ++k)
      if (pu_rate[k] < inst_.r_req[k]) return -std::numeric_limits<double>::infinity();
    return value;
  }

  const ProblemInstance& inst_;
  std::vector<OracleSlot> slots_;
  std::vector<GridVar> vars_;
  std::vector<double> x_, best_x_;
  double best_ = -std::numeric_limits<double>::infinity();
};

}  // namespace detail

/// Exhaustive schedule enumeration with a refined power grid per schedule. The value is a lower
/// bound on the optimum; `resolution` = L * delta bounds its gap, with L the largest summed
/// rate-function Lipschitz constant over schedules and delta the coarse grid step.
inline SolveResult brute_force(const ProblemInstance& inst, const OracleOptions& opt = {}) {
  inst.validate();
  opt.validate();
  if (inst.N() > opt.max_subcarriers || inst.K() > opt.max_pu || inst.J() > opt.max_su)
    throw InvalidInput("oracle: instance exceeds the size caps");
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t N = inst.N();
  std::vector<std::vector<detail::OracleSlot>> options(N);
  for (std::size_t i = 0; i < N; ++i) options[i] = detail::slot_options(inst, i);

  // Joint schedules in mixed-radix order. Exclusivity is per subcarrier, so every combination is valid.
  std::size_t total = 1;
  for (const auto& o : options) total *= o.size();
  auto schedule = [&](std::size_t idx) {
    std::vector<detail::OracleSlot> s(N);
    for (std::size_t i = 0; i < N; ++i) s[i] = options[i][idx % options[i].size()], idx /= options[i].size();
    return s;
  };

  struct Outcome {
    double value = -std::numeric_limits<double>::infinity();
    double lipschitz = 0.0;
    Policy policy;
  };
  std::vector<Outcome> outcome(total);
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(total, opt.threads ? opt.threads : std::thread::hardware_concurrency()));
  auto work = [&](std::size_t first) {
    for (std::size_t idx = first; idx < total; idx += workers) {
      detail::ScheduleGrid g(inst, schedule(idx));
      auto& o = outcome[idx];
      o.lipschitz = g.lipschitz();
      o.value = g.search(opt.levels, opt.refinements);
      if (std::isfinite(o.value)) o.policy = g.policy();
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work, t);
  work(0);
  for (auto& t : pool) t.join();

  SolveResult res;
  res.method = "oracle";
  res.iterations = total;
  double lipschitz = 0.0;
  std::size_t best = total;
  for (std::size_t idx = 0; idx < total; ++idx) {  // index order: ties go to the first schedule
    lipschitz = std::max(lipschitz, outcome[idx].lipschitz);
    if (std::isfinite(outcome[idx].value) && (best == total || outcome[idx].value > outcome[best].value)) best = idx;
  }
  const double delta = std::max(inst.p_max_pt, inst.p_max_st) / double(opt.levels - 1);
  res.resolution = lipschitz * delta;
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (best == total) {
    res.status = SolveStatus::infeasible;
    res.message = "no grid point meets the QoS targets";
    return res;
  }
  res.policy = outcome[best].policy;
  const auto v = validate_policy(res.policy, inst);
  if (!v.feasible()) {
    res.status = SolveStatus::failed;
    res.message = "oracle policy failed validation: " + v.summary();
    return res;
  }
  res.objective = v.report.weighted_total;
  res.bound = res.objective + res.resolution;
  res.status = SolveStatus::optimal;
  return res;
}

}  // namespace cogrelay::baselines
