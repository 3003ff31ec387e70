// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cogrelay/convex/barrier.hpp"
#include "cogrelay/instance.hpp"
#include "cogrelay/rates.hpp"
#include "cogrelay/sca/model.hpp"
#include "cogrelay/solve_result.hpp"

namespace cogrelay::sca {

/// rho = 10 log2(1 + P_max / sigma^2).
inline double default_penalty(double p_max_watts, double noise_watts) {
  return 10.0 * std::log2(1.0 + p_max_watts / noise_watts);
}

/// Default penalty for the reference setup (40 dBm budget, -110 dBm noise).
inline double reference_penalty() { return default_penalty(10.0, Topology{}.noise_watts()); }

struct ScaOptions {
  double rho = reference_penalty();
  double delta_obj = 1e-5;
  double frozen_delta_obj = 1e-9;  // stopping rule of the power re-solve after rounding
  double theta_bin = 1e-3;
  std::size_t max_outer = 100;
  std::size_t max_escalations = 3;
  double escalation_factor = 4.0;
  ReceiverModel receiver = ReceiverModel::sic;
  std::uint64_t seed = 0;  // 0: plain greedy start; otherwise scores are jittered
  convex::SolverOptions inner{};
  ValidationOptions validation{};
};

// ---------------------------------------------------------------------------
// Initial point

namespace detail {

/// Minimum total power reaching `target` bits over parallel links log2(1 + q F), by water-filling.
/// Returns per-link powers; empty if no link has positive gain.
inline std::vector<double> waterfill_min_power(const std::vector<double>& gains, double target) {
  std::vector<double> q(gains.size(), 0.0);
  if (!(target > 0.0)) return q;
  bool any = false;
  for (double f : gains) any = any || f > 0.0;
  if (!any) return {};
  auto rate = [&](double level) {
    double r = 0.0;
    for (double f : gains)
      if (f > 0.0) r += std::max(0.0, std::log2(level * f));
    return r;
  };
  double lo = 0.0, hi = 1.0;
  for (double f : gains)
    if (f > 0.0) hi = std::max(hi, 1.0 / f);
  while (rate(hi) < target) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (rate(mid) < target ? lo : hi) = mid;
  }
  for (std::size_t n = 0; n < gains.size(); ++n)
    if (gains[n] > 0.0) q[n] = std::max(0.0, hi - 1.0 / gains[n]);
  return q;
}

struct SlotChoice {
  long direct = -1;               // PU served directly by the primary station
  bool relay = false;             // relay hop active, carrying pair_k
  long pair_k = -1, pair_j = -1;  // co-scheduled pair on the secondary station
};

/// Largest PU power keeping the relayed rate within the relay hop rate.
inline double relay_capped_pu_power(double p_pu, double p_su, double h, double q_st, double f_st) {
  if (!(h > 0.0)) return 0.0;
  return std::min(p_pu, (1.0 - 1e-6) * q_st * f_st * (p_su * h + 1.0) / h);
}

}  // namespace detail

/// Greedy feasible policy: best option per subcarrier under an equal power split, then enough
/// direct subcarriers for every QoS target, minimum QoS powers by water-filling, and the rest of
/// both budgets shared evenly. Deterministic for a given seed.
inline std::optional<Policy> greedy_policy(const ProblemInstance& inst, ReceiverModel rx, std::uint64_t seed = 0) {
  inst.validate();
  const std::size_t K = inst.K(), J = inst.J(), N = inst.N();
  const auto& ch = inst.channels;
  const double w = inst.weight_pu, mu = inst.weight_su;
  const double q0 = inst.p_max_pt / double(N), p0 = inst.p_max_st / double(N);
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> jitter(0.9, 1.1);
  auto score = [&](double v) { return seed == 0 ? v : v * jitter(eng); };

  std::vector<detail::SlotChoice> slot(N);
  for (std::size_t i = 0; i < N; ++i) {
    double best = 0.0;
    // Direct PU, optionally with an SU-only pair labelled by another PU.
    for (long k = -1; k < long(K); ++k) {
      const double vd = k < 0 ? 0.0 : w * direct_rate(q0, ch.f_direct(std::size_t(k), i));
      double vs = 0.0;
      long bk = -1, bj = -1;
      for (std::size_t j = 0; j < J; ++j)
        for (std::size_t k2 = 0; k2 < K; ++k2) {
          if (long(k2) == k || !pair_allowed(ch, rx, i, k2, j)) continue;
          const double v = mu * noma_su_rate(p0, ch.g_st_su(j, i));
          if (v > vs) vs = v, bk = long(k2), bj = long(j);
        }
      const double v = score(vd + vs);
      if (v > best) {
        best = v;
        slot[i] = {k, false, bk, bj};
      }
    }
    // Relayed pair.
    for (std::size_t j = 0; j < J; ++j)
      for (std::size_t k = 0; k < K; ++k) {
        if (!pair_allowed(ch, rx, i, k, j) || !detail::relay_usable(inst, i, k)) continue;
        const double h = ch.h_st_pu(k, i), g = ch.g_st_su(j, i);
        const double psu = 0.5 * p0, ppu = detail::relay_capped_pu_power(0.5 * p0, psu, h, q0, ch.f_relay_hop[i]);
        const double rsu = rx == ReceiverModel::sic ? noma_su_rate(psu, g) : tin_su_rate(ppu, psu, g);
        const double v = score(w * noma_pu_rate(ppu, psu, h) + mu * rsu);
        if (v > best) {
          best = v;
          slot[i] = {-1, true, long(k), long(j)};
        }
      }
  }

  // Reserve direct subcarriers for QoS PUs: one each by strongest gain, then more for the neediest
  // PU until the minimum powers fit the primary budget.
  std::vector<long> reserved(N, -1);
  std::vector<std::vector<std::size_t>> serving(K);
  auto rebuild = [&] {
    for (auto& s : serving) s.clear();
    for (std::size_t i = 0; i < N; ++i) {
      const long d = reserved[i] >= 0 ? reserved[i] : slot[i].direct;
      if (d >= 0) serving[std::size_t(d)].push_back(i);
    }
  };
  auto min_powers = [&](std::size_t k) {
    std::vector<double> f;
    for (auto i : serving[k]) f.push_back(ch.f_direct(k, i));
    return detail::waterfill_min_power(f, inst.r_req[k] * (1.0 + 1e-6) + 1e-6);
  };
  auto reserve_best = [&](std::size_t k) {
    long pick = -1;
    for (std::size_t i = 0; i < N; ++i)
      if (reserved[i] < 0 && ch.f_direct(k, i) > 0.0 &&
          (pick < 0 || ch.f_direct(k, i) > ch.f_direct(k, std::size_t(pick))))
        pick = long(i);
    if (pick >= 0) reserved[std::size_t(pick)] = long(k);
    return pick >= 0;
  };
  {
    std::vector<std::size_t> order;
    for (std::size_t k = 0; k < K; ++k)
      if (inst.r_req[k] > 0.0) order.push_back(k);
    std::vector<bool> done(K, false);
    for (std::size_t n = 0; n < order.size(); ++n) {
      // Next PU: the one whose best free subcarrier is strongest.
      long bk = -1;
      double bf = -1.0;
      for (auto k : order) {
        if (done[k]) continue;
        for (std::size_t i = 0; i < N; ++i)
          if (reserved[i] < 0 && ch.f_direct(k, i) > bf) bf = ch.f_direct(k, i), bk = long(k);
      }
      if (bk < 0 || !(bf > 0.0) || !reserve_best(std::size_t(bk))) return std::nullopt;
      done[std::size_t(bk)] = true;
    }
    // Swap and move reservations while the summed direct rate at the equal split improves.
    auto gain = [&](long k, std::size_t i) { return k < 0 ? 0.0 : direct_rate(q0, ch.f_direct(std::size_t(k), i)); };
    for (bool improved = true; improved;) {
      improved = false;
      for (std::size_t a = 0; a < N; ++a)
        for (std::size_t b = 0; b < N; ++b) {
          if (a == b || reserved[a] < 0) continue;
          const long ka = reserved[a], kb = reserved[b];
          if (gain(ka, b) + gain(kb, a) > gain(ka, a) + gain(kb, b) + 1e-12 &&
              (kb < 0 || ch.f_direct(std::size_t(kb), a) > 0.0) && ch.f_direct(std::size_t(ka), b) > 0.0) {
            std::swap(reserved[a], reserved[b]);
            improved = true;
          }
        }
    }
  }
  for (;;) {
    rebuild();
    double total = 0.0, worst = -1.0;
    long worst_k = -1;
    for (std::size_t k = 0; k < K; ++k) {
      if (!(inst.r_req[k] > 0.0)) continue;
      const auto q = min_powers(k);
      double s = q.empty() ? std::numeric_limits<double>::infinity() : 0.0;
      for (double v : q) s += v;
      total += s;
      if (s > worst) worst = s, worst_k = long(k);
    }
    if (total <= inst.p_max_pt * (1.0 - 1e-9)) break;
    if (!reserve_best(std::size_t(worst_k))) return std::nullopt;
  }
  for (std::size_t i = 0; i < N; ++i) {
    if (reserved[i] < 0) continue;
    auto& s = slot[i];
    const long k = reserved[i];
    if (s.direct == k) continue;
    s.direct = k;
    s.relay = false;
    s.pair_k = s.pair_j = -1;
  }
  // Every subcarrier without a relay carries the strongest SU it can, labelled by a PU other than
  // the direct one.
  for (std::size_t i = 0; i < N; ++i) {
    auto& s = slot[i];
    if (s.relay) continue;
    double vs = 0.0;
    s.pair_k = s.pair_j = -1;
    for (std::size_t j = 0; j < J; ++j)
      for (std::size_t k2 = 0; k2 < K; ++k2) {
        if (long(k2) == s.direct || !pair_allowed(ch, rx, i, k2, j)) continue;
        if (ch.g_st_su(j, i) > vs) vs = ch.g_st_su(j, i), s.pair_k = long(k2), s.pair_j = long(j);
      }
  }
  rebuild();

  Policy p = Policy::zeros(inst);
  auto& a = p.assignment;
  auto& pw = p.powers;
  std::size_t pt_slots = 0, st_slots = 0;
  for (std::size_t i = 0; i < N; ++i) {
    const auto& s = slot[i];
    if (s.direct >= 0) a.c_direct(std::size_t(s.direct), i) = 1, ++pt_slots;
    if (s.relay) a.c_relay[i] = 1, ++pt_slots;
    if (s.pair_k >= 0) a.s_pair(std::size_t(s.pair_k), std::size_t(s.pair_j), i) = 1, ++st_slots;
  }
  double pt_left = inst.p_max_pt;
  for (std::size_t k = 0; k < K; ++k) {
    if (!(inst.r_req[k] > 0.0)) continue;
    const auto q = min_powers(k);
    for (std::size_t n = 0; n < q.size(); ++n) {
      pw.q_direct(k, serving[k][n]) = q[n];
      pt_left -= q[n];
    }
  }
  pt_left = std::max(0.0, pt_left);
  const double pt_share = pt_slots ? pt_left / double(pt_slots) * (1.0 - 1e-9) : 0.0;
  const double st_share = st_slots ? inst.p_max_st / double(st_slots) * (1.0 - 1e-9) : 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const auto& s = slot[i];
    if (s.direct >= 0) pw.q_direct(std::size_t(s.direct), i) += pt_share;
    if (s.relay) pw.q_relay[i] = pt_share;
    if (s.pair_k < 0) continue;
    const std::size_t k = std::size_t(s.pair_k), j = std::size_t(s.pair_j);
    if (s.relay) {
      pw.p_su(j, i) = 0.5 * st_share;
      pw.p_pu(k, i) = detail::relay_capped_pu_power(0.5 * st_share, pw.p_su(j, i), ch.h_st_pu(k, i),
                                                    pw.q_relay[i], ch.f_relay_hop[i]);
    } else {
      pw.p_su(j, i) = st_share;
    }
  }
  ValidationOptions vo;
  vo.model = rx;
  if (!validate_policy(p, inst, vo).feasible()) return std::nullopt;
  return p;
}

/// Variable vector of `m` matching a policy: tilde and raw powers follow the active entities,
/// binaries follow the assignment.
inline std::vector<double> embed_policy(const ScaModel& m, const Policy& p) {
  std::vector<double> x(m.num_vars(), 0.0);
  const auto& a = p.assignment;
  const auto& w = p.powers;
  auto set = [&](long idx, double v) {
    if (idx >= 0) x[std::size_t(idx)] = std::clamp(v, m.lower[std::size_t(idx)], m.upper[std::size_t(idx)]);
  };
  for (std::size_t i = 0; i < m.N; ++i) {
    for (std::size_t k = 0; k < m.K; ++k) {
      const double q = a.c_direct(k, i) ? w.q_direct(k, i) : 0.0;
      set(m.q_tilde(k, i), q);
      set(m.q_raw(k, i), q);
      set(m.c_bin(k, i), a.c_direct(k, i));
    }
    const double qs = a.c_relay[i] ? w.q_relay[i] : 0.0;
    set(m.qst_tilde[i], qs);
    set(m.qst_raw[i], qs);
    set(m.cst_bin[i], a.c_relay[i]);
  }
  for (std::size_t t = 0; t < m.pairs.size(); ++t) {
    const auto [i, j, k] = m.pairs[t];
    if (!a.s_pair(k, j, i)) continue;
    set(m.ppu_tilde[t], w.p_pu(k, i));
    set(m.psu_tilde[t], w.p_su(j, i));
    set(m.s_bin[t], 1.0);
    set(m.ppu_raw(k, i), w.p_pu(k, i));
    set(m.psu_raw(j, i), w.p_su(j, i));
  }
  return x;
}

/// Relaxed starting point from the greedy policy; nullopt when the QoS repair fails.
inline std::optional<std::vector<double>> initialize(const ScaModel& relaxed, const ProblemInstance& inst,
                                                     std::uint64_t seed = 0) {
  const auto p = greedy_policy(inst, relaxed.receiver, seed);
  if (!p) return std::nullopt;
  return embed_policy(relaxed, *p);
}

// ---------------------------------------------------------------------------
// Iterations

struct IterationResult {
  std::vector<double> x;
  std::size_t newton_steps = 0;
  bool accepted = false;  // false: the inner solve failed or did not descend; x is the old iterate
  std::string message;
};

namespace detail {

/// A point strictly inside the box and every linear row: small equal binaries, small tilde powers,
/// raw powers at twice the tilde powers.
inline std::vector<double> linear_interior_point(const ScaModel& m) {
  std::size_t crowd = 1;
  std::vector<std::size_t> pairs_on(m.N, 0), pt_vars(m.N, 0), st_vars(m.N, 0);
  for (const auto& pr : m.pairs) ++pairs_on[pr.i];
  for (std::size_t i = 0; i < m.N; ++i) crowd = std::max({crowd, m.K + 1, m.J + 1, pairs_on[i] + 1});
  std::size_t pt = 0, st = 0;
  for (const auto& v : m.vars) {
    if (v.kind == VarKind::q_tilde || v.kind == VarKind::qst_tilde) ++pt;
    if (v.kind == VarKind::ppu_tilde || v.kind == VarKind::psu_tilde) ++st;
  }
  const double beta = m.relaxed ? 0.5 / double(crowd) : 1.0;
  std::vector<double> x(m.num_vars(), 0.0);
  for (std::size_t n = 0; n < m.num_vars(); ++n) {
    const auto kind = m.vars[n].kind;
    const double cap = m.upper[n];
    const bool pt_side = kind == VarKind::q_tilde || kind == VarKind::qst_tilde || kind == VarKind::q ||
                         kind == VarKind::qst;
    const double share = 0.25 * cap / double(std::max<std::size_t>(1, pt_side ? pt : st));
    switch (kind) {
      case VarKind::c:
      case VarKind::cst:
      case VarKind::s: x[n] = beta; break;
      case VarKind::q_tilde:
      case VarKind::qst_tilde:
      case VarKind::psu_tilde: x[n] = std::min(0.25 * beta * cap, share); break;
      // A small relayed part keeps the relay rows negative along the blend.
      case VarKind::ppu_tilde: x[n] = 1e-3 * std::min(0.25 * beta * cap, share); break;
      case VarKind::ppu: x[n] = 2e-3 * std::min(0.25 * beta * cap, share); break;
      default: x[n] = 2.0 * std::min(0.25 * beta * cap, share); break;
    }
  }
  return x;
}

inline bool strictly_feasible(const convex::SmoothConvexProgram& p, const std::vector<double>& x) {
  for (std::size_t n = 0; n < p.num_vars; ++n)
    if (!(x[n] > p.lower[n] && x[n] < p.upper[n])) return false;
  for (const auto& c : p.constraints)
    if (!c.in_domain(x) || !(c.value(x) < 0.0)) return false;
  return true;
}

/// Strictly feasible start for the restriction at x: x itself when possible, otherwise the first
/// blend of x with the linear interior point that is strictly feasible. Both are feasible for the
/// convex restriction, so short blends stay feasible once the nonlinear rows have slack at x.
inline std::vector<double> restriction_start(const ScaModel& m, const convex::SmoothConvexProgram& p,
                                             const std::vector<double>& x) {
  if (strictly_feasible(p, x)) return x;
  const auto z = linear_interior_point(m);
  std::vector<double> y(x.size());
  for (double theta = 0.5; theta > 1e-12; theta *= 0.25) {
    for (std::size_t n = 0; n < x.size(); ++n) y[n] = (1.0 - theta) * x[n] + theta * z[n];
    if (strictly_feasible(p, y)) return y;
  }
  return x;  // the solver's own phase one takes over
}

}  // namespace detail

/// One majorize-minimize step: solve the convex restriction at x and keep the result only if the
/// penalized objective does not increase.
inline IterationResult sca_iteration(const ScaModel& m, const std::vector<double>& x, double rho,
                                     const convex::SolverOptions& inner = {}) {
  IterationResult out;
  out.x = x;
  if (m.num_vars() == 0) return out;
  const auto prog = restriction_at(m, x, rho);
  convex::NlpSolution sol;
  try {
    sol = convex::solve_convex(prog, detail::restriction_start(m, prog, x), inner);
  } catch (const NumericalError& e) {
    out.message = e.what();
    return out;
  }
  out.newton_steps = sol.newton_steps;
  if (sol.status == convex::NlpStatus::infeasible) {
    out.message = "restriction infeasible";
    return out;
  }
  if (penalized_objective(m, sol.x, rho) <= penalized_objective(m, x, rho)) {
    out.x = std::move(sol.x);
    out.accepted = true;
  }
  return out;
}

/// Everything the penalized SCA run produced, including the relaxed iterate before rounding.
struct ScaRun {
  SolveResult result;
  std::vector<double> relaxed_x;
  double relaxed_utility = 0.0;
  double final_rho = 0.0;
  double max_fractionality = 0.0;
  std::size_t escalations = 0;
  Assignment rounded;
};

namespace detail {

inline Assignment round_assignment(const ScaModel& m, const std::vector<double>& x) {
  Assignment a(m.K, m.J, m.N);
  for (std::size_t i = 0; i < m.N; ++i) {
    for (std::size_t k = 0; k < m.K; ++k) a.c_direct(k, i) = x[std::size_t(m.c_bin(k, i))] > 0.5;
    a.c_relay[i] = x[std::size_t(m.cst_bin[i])] > 0.5;
  }
  for (std::size_t t = 0; t < m.pairs.size(); ++t) {
    const auto [i, j, k] = m.pairs[t];
    a.s_pair(k, j, i) = x[std::size_t(m.s_bin[t])] > 0.5;
  }
  return a;
}

inline Policy frozen_policy(const ScaModel& f, const Assignment& a, const std::vector<double>& x) {
  Policy p(f.K, f.J, f.N);
  p.assignment = a;
  for (std::size_t i = 0; i < f.N; ++i) {
    for (std::size_t k = 0; k < f.K; ++k) p.powers.q_direct(k, i) = ScaModel::at(f.q_tilde(k, i), x);
    p.powers.q_relay[i] = ScaModel::at(f.qst_tilde[i], x);
  }
  for (std::size_t t = 0; t < f.pairs.size(); ++t) {
    const auto [i, j, k] = f.pairs[t];
    p.powers.p_pu(k, i) = ScaModel::at(f.ppu_tilde[t], x);
    p.powers.p_su(j, i) = ScaModel::at(f.psu_tilde[t], x);
  }
  return p;
}

/// Starting point of the frozen problem taken from the relaxed iterate's tilde powers.
inline std::vector<double> frozen_start(const ScaModel& f, const ScaModel& r, const std::vector<double>& xr) {
  std::vector<double> x(f.num_vars(), 0.0);
  auto copy = [&](long dst, long src) {
    if (dst >= 0) x[std::size_t(dst)] = std::clamp(ScaModel::at(src, xr), 0.0, f.upper[std::size_t(dst)]);
  };
  for (std::size_t i = 0; i < f.N; ++i) {
    for (std::size_t k = 0; k < f.K; ++k) copy(f.q_tilde(k, i), r.q_tilde(k, i));
    copy(f.qst_tilde[i], r.qst_tilde[i]);
  }
  for (std::size_t t = 0; t < f.pairs.size(); ++t) {
    const auto& pr = f.pairs[t];
    for (std::size_t u = 0; u < r.pairs.size(); ++u)
      if (r.pairs[u] == pr) {
        copy(f.ppu_tilde[t], r.ppu_tilde[u]);
        copy(f.psu_tilde[t], r.psu_tilde[u]);
      }
  }
  return x;
}

}  // namespace detail

struct FrozenSolve {
  std::optional<Policy> policy;
  std::size_t iterations = 0;
  std::string message;
};

/// Power optimization for a fixed assignment by the same majorize-minimize loop (no penalty).
inline FrozenSolve solve_frozen(const ProblemInstance& inst, const Assignment& a, std::vector<double> x,
                                const ScaModel& f, const ScaOptions& opt) {
  FrozenSolve out;
  ValidationOptions vo = opt.validation;
  vo.model = f.receiver;
  if (f.num_vars() == 0) {
    Policy p = detail::frozen_policy(f, a, x);
    if (validate_policy(p, inst, vo).feasible()) out.policy = p;
    else out.message = "empty schedule violates QoS";
    return out;
  }
  bool feasible = max_violation(f, x) <= 0.0;
  std::size_t stable = 0;
  for (std::size_t r = 0; r < opt.max_outer; ++r) {
    const double before = penalized_objective(f, x, 0.0);
    auto step = sca_iteration(f, x, 0.0, opt.inner);
    ++out.iterations;
    if (!step.accepted) {
      if (!feasible) {
        out.message = "frozen power problem: " + (step.message.empty() ? "no feasible descent" : step.message);
        return out;
      }
      break;
    }
    x = std::move(step.x);
    if (!feasible) {
      // The start violated a row and the restriction found a feasible point; restart the count.
      feasible = max_violation(f, x) <= 0.0;
      continue;
    }
    const double after = penalized_objective(f, x, 0.0);
    stable = std::abs(before - after) <= opt.frozen_delta_obj * std::max(1.0, std::abs(before)) ? stable + 1 : 0;
    if (stable >= 2) break;
  }
  Policy p = detail::frozen_policy(f, a, x);
  const auto v = validate_policy(p, inst, vo);
  if (!v.feasible()) {
    out.message = "frozen power problem: " + v.summary();
    return out;
  }
  out.policy = std::move(p);
  return out;
}

/// Penalized SCA with penalty escalation, rounding and a frozen power re-solve.
inline ScaRun run_algorithm1(const ProblemInstance& inst, const ScaOptions& opt = {},
                             const std::optional<std::vector<double>>& start = std::nullopt) {
  if (!(opt.rho > 0.0)) throw InvalidInput("algorithm1: rho must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  ScaRun run;
  auto& res = run.result;
  res.method = opt.receiver == ReceiverModel::sic ? "sca" : "baseline1";
  res.trace.columns = {"iteration", "rho", "objective_before", "penalized_objective", "utility", "max_fractionality", "inner_iterations"};
  auto finish = [&] {
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return run;
  };
  const ScaModel m = build_relaxed_problem(inst, opt.receiver);
  std::vector<double> x;
  if (start) {
    if (start->size() != m.num_vars()) throw InvalidInput("algorithm1: start has wrong size");
    x = *start;
  } else {
    auto init = initialize(m, inst, opt.seed);
    if (!init) {
      res.status = SolveStatus::infeasible;
      res.message = "initializer could not meet the QoS targets";
      return finish();
    }
    x = std::move(*init);
  }
  double rho = opt.rho;
  bool hit_limit = false;
  for (;;) {
    std::size_t stable = 0, r = 0;
    for (; r < opt.max_outer; ++r) {
      const double before = penalized_objective(m, x, rho);
      auto step = sca_iteration(m, x, rho, opt.inner);
      ++res.iterations;
      const double after = penalized_objective(m, step.x, rho);
      res.trace.rows.push_back({double(res.iterations), rho, before, after, m.utility(step.x), m.max_fractionality(step.x),
                                double(step.newton_steps)});
      if (!step.accepted) break;  // fixed point of the safeguarded map
      x = std::move(step.x);
      stable = std::abs(before - after) <= opt.delta_obj * std::max(1.0, std::abs(before)) ? stable + 1 : 0;
      if (stable >= 2) break;
    }
    hit_limit = r == opt.max_outer;
    run.max_fractionality = m.max_fractionality(x);
    if (run.max_fractionality <= opt.theta_bin || run.escalations == opt.max_escalations) break;
    rho *= opt.escalation_factor;
    ++run.escalations;
  }
  run.final_rho = rho;
  run.relaxed_x = x;
  run.relaxed_utility = m.utility(x);
  run.rounded = detail::round_assignment(m, x);

  const ScaModel f = build_frozen_problem(inst, run.rounded, opt.receiver);
  auto frozen = solve_frozen(inst, run.rounded, detail::frozen_start(f, m, x), f, opt);
  if (!frozen.policy) {
    // Rounding broke QoS; fall back to re-optimizing the initializer's assignment.
    const auto g = greedy_policy(inst, opt.receiver, opt.seed);
    if (g) {
      const ScaModel fg = build_frozen_problem(inst, g->assignment, opt.receiver);
      auto retry = solve_frozen(inst, g->assignment, detail::frozen_start(fg, m, embed_policy(m, *g)), fg, opt);
      if (retry.policy) {
        frozen = std::move(retry);
        frozen.message = "rounded schedule infeasible; kept the initial schedule";
      }
    }
  }
  if (!frozen.policy) {
    res.status = SolveStatus::failed;
    res.message = frozen.message;
    return finish();
  }
  res.policy = *frozen.policy;
  ValidationOptions vo = opt.validation;
  vo.model = opt.receiver;
  res.objective = validate_policy(res.policy, inst, vo).report.weighted_total;
  if (run.max_fractionality > opt.theta_bin) res.status = SolveStatus::fractional;
  else if (hit_limit) res.status = SolveStatus::max_iterations;
  else res.status = SolveStatus::converged;
  if (res.message.empty()) res.message = frozen.message;
  return finish();
}

inline SolveResult algorithm1_solve(const ProblemInstance& inst, const ScaOptions& opt = {},
                                    const std::optional<std::vector<double>>& start = std::nullopt) {
  return run_algorithm1(inst, opt, start).result;
}

}  // namespace cogrelay::sca
