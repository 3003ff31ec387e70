// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cogrelay/sca/algorithm.hpp"

namespace cogrelay::baselines {

/// Scheme 1: secondary users decode without SIC and treat the PU signal as noise; any pair may
/// share a subcarrier. Same penalty-SCA machinery, relay and QoS rows unchanged.
inline SolveResult baseline1_solve(const ProblemInstance& inst, sca::ScaOptions opt = {}) {
  opt.receiver = ReceiverModel::interference_as_noise;
  auto r = sca::algorithm1_solve(inst, opt);
  r.method = "baseline1";
  return r;
}

struct Baseline2Options {
  sca::ScaOptions sca;            // frozen power solve settings
  std::size_t max_draws = 20;     // redraws when a drawn schedule cannot meet QoS
  bool secondary_only = false;    // keep the greedy primary schedule, randomize only the pairing
};

namespace detail {

/// Per-subcarrier slot, same encoding as the greedy initializer.
using sca::detail::SlotChoice;

inline Assignment to_assignment(const ProblemInstance& inst, const std::vector<SlotChoice>& slots) {
  Assignment a(inst.K(), inst.J(), inst.N());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& s = slots[i];
    if (s.direct >= 0) a.c_direct(std::size_t(s.direct), i) = 1;
    if (s.relay) a.c_relay[i] = 1;
    if (s.pair_k >= 0) a.s_pair(std::size_t(s.pair_k), std::size_t(s.pair_j), i) = 1;
  }
  return a;
}

/// Uniform draw over {relayed admissible pair, direct PU, idle} on every subcarrier.
inline std::vector<SlotChoice> draw_full(const ProblemInstance& inst, std::mt19937_64& eng) {
  const auto& ch = inst.channels;
  std::vector<SlotChoice> slots(inst.N());
  for (std::size_t i = 0; i < inst.N(); ++i) {
    std::vector<SlotChoice> options;
    for (std::size_t k = 0; k < inst.K(); ++k)
      for (std::size_t j = 0; j < inst.J(); ++j)
        if (sic_admissible(ch, i, k, j)) options.push_back({-1, true, long(k), long(j)});
    for (std::size_t k = 0; k < inst.K(); ++k) options.push_back({long(k), false, -1, -1});
    options.push_back({});
    slots[i] = options[uniform_index(eng, options.size())];
  }
  return slots;
}

/// Keep the primary side of `base`, draw the secondary pair uniformly among the admissible ones
/// (or none, where the primary side leaves that open).
inline std::vector<SlotChoice> draw_secondary(const ProblemInstance& inst, const Assignment& base,
                                              std::mt19937_64& eng) {
  const auto& ch = inst.channels;
  std::vector<SlotChoice> slots(inst.N());
  for (std::size_t i = 0; i < inst.N(); ++i) {
    auto& s = slots[i];
    for (std::size_t k = 0; k < inst.K(); ++k)
      if (base.c_direct(k, i)) s.direct = long(k);
    s.relay = base.c_relay[i] != 0;
    std::vector<std::pair<long, long>> options;
    if (!s.relay) options.push_back({-1, -1});
    for (std::size_t k = 0; k < inst.K(); ++k) {
      if (long(k) == s.direct) continue;
      for (std::size_t j = 0; j < inst.J(); ++j)
        if (sic_admissible(ch, i, k, j)) options.push_back({long(k), long(j)});
    }
    if (options.empty()) {
      s.relay = false;  // a relay hop with nobody to forward to carries nothing
      continue;
    }
    std::tie(s.pair_k, s.pair_j) = options[uniform_index(eng, options.size())];
  }
  return slots;
}

/// Starting powers for a fixed schedule: minimum direct powers for QoS, then even shares.
inline Policy split_powers(const ProblemInstance& inst, const std::vector<SlotChoice>& slots) {
  const auto& ch = inst.channels;
  Policy p = Policy::zeros(inst);
  p.assignment = to_assignment(inst, slots);
  auto& pw = p.powers;
  double pt_left = inst.p_max_pt;
  for (std::size_t k = 0; k < inst.K(); ++k) {
    if (!(inst.r_req[k] > 0.0)) continue;
    std::vector<std::size_t> serving;
    std::vector<double> gains;
    for (std::size_t i = 0; i < slots.size(); ++i)
      if (slots[i].direct == long(k)) serving.push_back(i), gains.push_back(ch.f_direct(k, i));
    const auto q = sca::detail::waterfill_min_power(gains, inst.r_req[k] * (1.0 + 1e-6) + 1e-6);
    for (std::size_t n = 0; n < q.size(); ++n) pw.q_direct(k, serving[n]) = q[n], pt_left -= q[n];
  }
  pt_left = std::max(0.0, pt_left);
  std::size_t pt_slots = 0, st_slots = 0;
  for (const auto& s : slots) pt_slots += (s.direct >= 0) + s.relay, st_slots += s.pair_k >= 0;
  const double pt_share = pt_slots ? pt_left / double(pt_slots) * (1.0 - 1e-9) : 0.0;
  const double st_share = st_slots ? inst.p_max_st / double(st_slots) * (1.0 - 1e-9) : 0.0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& s = slots[i];
    if (s.direct >= 0) pw.q_direct(std::size_t(s.direct), i) += pt_share;
    if (s.relay) pw.q_relay[i] = pt_share;
    if (s.pair_k < 0) continue;
    const auto k = std::size_t(s.pair_k), j = std::size_t(s.pair_j);
    if (s.relay) {
      pw.p_su(j, i) = 0.5 * st_share;
      pw.p_pu(k, i) = sca::detail::relay_capped_pu_power(0.5 * st_share, pw.p_su(j, i), ch.h_st_pu(k, i),
                                                         pw.q_relay[i], ch.f_relay_hop[i]);
    } else {
      pw.p_su(j, i) = st_share;
    }
  }
  // Over-budget QoS powers leave the start infeasible; the frozen solve then searches from it.
  return p;
}

}  // namespace detail

/// Scheme 2: random schedule per subcarrier, powers optimized for it. Deterministic per seed.
inline SolveResult baseline2_solve(const ProblemInstance& inst, std::uint64_t seed, const Baseline2Options& opt = {}) {
  inst.validate();
  const auto t0 = std::chrono::steady_clock::now();
  SolveResult res;
  res.method = "baseline2";
  auto finish = [&] {
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
  };
  std::optional<Assignment> base;
  if (opt.secondary_only) {
    const auto g = sca::greedy_policy(inst, ReceiverModel::sic);
    if (!g) {
      res.status = SolveStatus::infeasible;
      res.message = "no primary schedule meets the QoS targets";
      return finish();
    }
    base = g->assignment;
  }
  std::string last;
  for (std::size_t draw = 0; draw < opt.max_draws; ++draw) {
    std::mt19937_64 eng(derive_seed(seed, draw));
    const auto slots = base ? detail::draw_secondary(inst, *base, eng) : detail::draw_full(inst, eng);
    const Policy start = detail::split_powers(inst, slots);
    const auto f = sca::build_frozen_problem(inst, start.assignment);
    auto frozen = sca::solve_frozen(inst, start.assignment, sca::embed_policy(f, start), f, opt.sca);
    res.iterations += frozen.iterations;
    if (!frozen.policy) {
      last = frozen.message;
      continue;
    }
    res.policy = std::move(*frozen.policy);
    res.objective = validate_policy(res.policy, inst).report.weighted_total;
    res.status = SolveStatus::converged;
    res.message = "draw " + std::to_string(draw);
    return finish();
  }
  res.status = SolveStatus::infeasible;
  res.message = "no QoS-feasible draw in " + std::to_string(opt.max_draws) + " attempts; last: " + last;
  return finish();
}

}  // namespace cogrelay::baselines
