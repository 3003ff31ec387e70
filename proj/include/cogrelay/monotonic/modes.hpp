// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "cogrelay/convex/barrier.hpp"
#include "cogrelay/monotonic/aux_space.hpp"

namespace cogrelay::monotonic {

/// A maximal schedule of one subcarrier. Coordinates are handled in log2 form:
/// x_u = log2 u, x_v = log2 v, x_xi = log2 xi.
struct Mode {
  enum class Kind { relay, su, direct };
  Kind kind = Kind::direct;
  long triple = -1;      // pair providing u/v coordinates (relay, su)
  long direct_pu = -1;   // PU served directly by the primary station (su, direct)
  // log2 box bounds of the coordinates the mode uses
  double x_u_max = 0.0, x_v_max = 0.0, x_xi_max = 0.0;
};

/// Maximal schedules per subcarrier: relayed pairs; an SU-only pair next to a direct PU (one
/// per SU and direct PU, labelled by any admissible PU other than the direct one); a lone direct
/// PU only where no SU-only mode contains it.
inline std::vector<std::vector<Mode>> enumerate_modes(const AuxSpace& sp, const ProblemInstance& inst) {
  const auto& ch = inst.channels;
  std::vector<std::vector<Mode>> out(sp.N());
  for (std::size_t i = 0; i < sp.N(); ++i) {
    auto& modes = out[i];
    const double relay_cap = std::log2(1.0 + inst.p_max_pt * ch.f_relay_hop[i]);
    for (std::size_t t : sp.triples_on(i)) {
      Mode m;
      m.kind = Mode::Kind::relay;
      m.triple = static_cast<long>(t);
      m.x_u_max = std::min(std::log2(sp.box().upper[sp.u_index(t)]), relay_cap);
      m.x_v_max = std::log2(sp.box().upper[sp.v_index(t)]);
      if (m.x_u_max > 0.0) modes.push_back(m);
    }
    std::vector<bool> direct_covered(sp.K(), false);
    for (std::size_t j = 0; j < sp.J(); ++j) {
      std::vector<long> labels(sp.K(), -1);
      long any = -1;
      for (std::size_t t : sp.triples_on(i)) {
        const auto& tr = sp.triples()[t];
        if (tr.j != j) continue;
        labels[tr.k] = static_cast<long>(t);
        if (any < 0) any = static_cast<long>(t);
      }
      if (any < 0 || ch.g_st_su(j, i) <= 0.0) continue;
      const double xv = std::log2(sp.box().upper[sp.v_index(static_cast<std::size_t>(any))]);
      bool produced = false;
      for (std::size_t kd = 0; kd < sp.K(); ++kd) {
        if (ch.f_direct(kd, i) <= 0.0) continue;
        long label = -1;
        for (std::size_t k = 0; k < sp.K() && label < 0; ++k)
          if (k != kd && labels[k] >= 0) label = labels[k];
        if (label < 0) continue;
        Mode m;
        m.kind = Mode::Kind::su;
        m.triple = label;
        m.direct_pu = static_cast<long>(kd);
        m.x_v_max = xv;
        m.x_xi_max = std::log2(sp.box().upper[sp.xi_index(kd, i)]);
        modes.push_back(m);
        direct_covered[kd] = true;
        produced = true;
      }
      if (!produced) {
        Mode m;
        m.kind = Mode::Kind::su;
        m.triple = any;
        m.x_v_max = xv;
        modes.push_back(m);
      }
    }
    for (std::size_t kd = 0; kd < sp.K(); ++kd) {
      if (direct_covered[kd] || ch.f_direct(kd, i) <= 0.0) continue;
      Mode m;
      m.kind = Mode::Kind::direct;
      m.direct_pu = static_cast<long>(kd);
      m.x_xi_max = std::log2(sp.box().upper[sp.xi_index(kd, i)]);
      modes.push_back(m);
    }
  }
  return out;
}

/// Best response of one mode to prices alpha (PT power), beta (ST power), nu (QoS).
struct ModeResponse {
  double value = 0.0;   // priced objective
  double pt = 0.0, st = 0.0;
  double x_u = 0.0, x_v = 0.0, x_xi = 0.0;
  long qos_pu_relay = -1, qos_pu_direct = -1;  // PUs receiving 1/2 x_u and x_xi
};

struct Prices {
  double alpha = 0.0, beta = 0.0;
  std::vector<double> nu;  // per PU
};

namespace detail {

/// argmax over [0, cap] of g x - price (2^x - 1) / gain.
inline double best_single(double g, double price, double gain, double cap) {
  if (cap <= 0.0 || g <= 0.0) return 0.0;
  if (price <= 0.0) return cap;
  return std::clamp(std::log2(g * gain / (price * kLn2)), 0.0, cap);
}

}  // namespace detail

inline ModeResponse respond(const Mode& m, std::size_t i, const AuxSpace& sp, const ProblemInstance& inst,
                            const Prices& pr) {
  const auto& ch = inst.channels;
  const double w = inst.weight_pu, mu = inst.weight_su;
  ModeResponse r;
  if (m.direct_pu >= 0) {
    const auto k = static_cast<std::size_t>(m.direct_pu);
    const double F = ch.f_direct(k, i);
    const double g = w + pr.nu[k];
    r.x_xi = detail::best_single(g, pr.alpha, F, m.x_xi_max);
    r.pt += std::expm1(kLn2 * r.x_xi) / F;
    r.value += g * r.x_xi;
    r.qos_pu_direct = m.direct_pu;
  }
  if (m.kind == Mode::Kind::su) {
    const auto& tr = sp.triples()[static_cast<std::size_t>(m.triple)];
    const double G = ch.g_st_su(tr.j, i);
    r.x_v = detail::best_single(0.5 * mu, pr.beta, G, m.x_v_max);
    r.st += std::expm1(kLn2 * r.x_v) / G;
    r.value += 0.5 * mu * r.x_v;
  } else if (m.kind == Mode::Kind::relay) {
    const auto& tr = sp.triples()[static_cast<std::size_t>(m.triple)];
    const double G = ch.g_st_su(tr.j, i), H = ch.h_st_pu(tr.k, i), Fst = ch.f_relay_hop[i];
    const double a = 0.5 * (w + pr.nu[tr.k]), b = 0.5 * mu;
    const double X = m.x_u_max, Y = m.x_v_max;
    const double inv_g = G > 0.0 ? 1.0 / G : 0.0;
    const double inv_h = 1.0 / H;  // H > 0 whenever the relay mode exists
    // Optimal x_v for fixed x_u is clip(Lv - x_u, 0, Y).
    double Lv;
    if (b <= 0.0 || Y <= 0.0) Lv = -std::numeric_limits<double>::infinity();
    else if (pr.beta <= 0.0) Lv = std::numeric_limits<double>::infinity();
    else Lv = std::log2(b * G / (pr.beta * kLn2));
    auto y_of = [&](double x) { return std::clamp(Lv - x, 0.0, Y); };
    auto slope = [&](double x) {
      const double y = y_of(x);
      return a - kLn2 * std::exp2(x) *
                     (pr.alpha / Fst + pr.beta * (std::expm1(kLn2 * y) * inv_g + inv_h));
    };
    double x = 0.0;
    if (X > 0.0 && slope(0.0) > 0.0) {
      if (slope(X) >= 0.0) {
        x = X;
      } else {
        // Piecewise closed form: the slope is a - shift - ln2 2^x c on each regime.
        std::vector<double> br{0.0, X};
        for (double q : {Lv - Y, Lv})
          if (q > 0.0 && q < X) br.push_back(q);
        std::sort(br.begin(), br.end());
        for (std::size_t s = 0; s + 1 < br.size(); ++s) {
          const double l = br[s], rr = br[s + 1];
          if (slope(rr) >= 0.0) continue;
          const double mid = 0.5 * (l + rr);
          const double y = y_of(mid);
          double shift = 0.0, c;
          if (y > 0.0 && y < Y) {
            shift = b;
            c = pr.alpha / Fst + pr.beta * (inv_h - inv_g);
          } else {
            c = pr.alpha / Fst + pr.beta * (std::expm1(kLn2 * y) * inv_g + inv_h);
          }
          const double A = a - shift;
          x = (A <= 0.0 || c <= 0.0) ? l : std::clamp(std::log2(A / (kLn2 * c)), l, rr);
          break;
        }
      }
    }
    const double y = y_of(x);
    r.x_u = x;
    r.x_v = y;
    const double u = std::exp2(x);
    r.pt += std::expm1(kLn2 * x) / Fst;
    r.st += u * std::expm1(kLn2 * y) * inv_g + std::expm1(kLn2 * x) * inv_h;
    r.value += a * x + b * y;
    r.qos_pu_relay = static_cast<long>(tr.k);
  }
  r.value -= pr.alpha * r.pt + pr.beta * r.st;
  return r;
}

/// Exact maximization for a fixed schedule pattern (one mode or idle per subcarrier).
/// Convex in log2 coordinates: objective linear, budgets are sums of exponentials.
struct PatternSolution {
  double value = 0.0;        // monotone objective at the solution
  double upper_bound = 0.0;  // value + barrier duality gap
  AuxiliaryPoint point;      // linear coordinates
};

inline std::optional<PatternSolution> solve_pattern(const AuxSpace& sp, const ProblemInstance& inst,
                                                    const std::vector<std::vector<Mode>>& modes,
                                                    const std::vector<int>& pattern,
                                                    const convex::SolverOptions& opt = {}) {
  using convex::SparseAffine;
  const auto& ch = inst.channels;
  const double w = inst.weight_pu, mu = inst.weight_su;
  struct Var { std::size_t coord; double cap; double weight; };
  std::vector<Var> vars;
  std::vector<std::size_t> block;
  convex::ConvexFunction pt, st;
  std::vector<SparseAffine> qos(sp.K());
  for (std::size_t k = 0; k < sp.K(); ++k) qos[k].constant = inst.r_req[k];
  double pt_const = -inst.p_max_pt, st_const = -inst.p_max_st;
  auto new_var = [&](std::size_t coord, double cap, double weight, std::size_t i) {
    vars.push_back({coord, cap, weight});
    block.push_back(i);
    return vars.size() - 1;
  };
  auto exp_arg = [](std::size_t v, double scale) {
    SparseAffine a;
    a.add(v, scale);
    return a;
  };
  for (std::size_t i = 0; i < sp.N(); ++i) {
    if (pattern[i] < 0) continue;
    const Mode& m = modes[i][static_cast<std::size_t>(pattern[i])];
    if (m.direct_pu >= 0 && m.x_xi_max > 0.0) {
      const auto k = static_cast<std::size_t>(m.direct_pu);
      const double F = ch.f_direct(k, i);
      const auto v = new_var(sp.xi_index(k, i), m.x_xi_max, w, i);
      pt.add_exp(1.0 / F, exp_arg(v, kLn2));
      pt_const -= 1.0 / F;
      qos[k].add(v, -1.0);
    }
    if (m.kind == Mode::Kind::su && m.x_v_max > 0.0) {
      const auto t = static_cast<std::size_t>(m.triple);
      const double G = ch.g_st_su(sp.triples()[t].j, i);
      const auto v = new_var(sp.v_index(t), m.x_v_max, 0.5 * mu, i);
      st.add_exp(1.0 / G, exp_arg(v, kLn2));
      st_const -= 1.0 / G;
    }
    if (m.kind == Mode::Kind::relay) {
      const auto t = static_cast<std::size_t>(m.triple);
      const auto& tr = sp.triples()[t];
      const double G = ch.g_st_su(tr.j, i), H = ch.h_st_pu(tr.k, i), Fst = ch.f_relay_hop[i];
      const auto vu = new_var(sp.u_index(t), m.x_u_max, 0.5 * w, i);
      pt.add_exp(1.0 / Fst, exp_arg(vu, kLn2));
      pt_const -= 1.0 / Fst;
      qos[tr.k].add(vu, -0.5);
      // ST power u (v - 1) / G + (u - 1) / H = 2^(xu+xv)/G + 2^xu (1/H - 1/G) - 1/H.
      // SIC admissibility gives H <= G, so the 2^xu coefficient is nonnegative.
      const bool has_v = m.x_v_max > 0.0;
      st.add_exp(has_v ? std::max(0.0, 1.0 / H - 1.0 / G) : 1.0 / H, exp_arg(vu, kLn2));
      st_const -= 1.0 / H;
      if (has_v) {
        const auto vv = new_var(sp.v_index(t), m.x_v_max, 0.5 * mu, i);
        SparseAffine both;
        both.add(vu, kLn2).add(vv, kLn2);
        st.add_exp(1.0 / G, both);
      }
    }
  }
  PatternSolution sol;
  sol.point = sp.ones();
  // QoS rows without any variable decide feasibility directly.
  for (std::size_t k = 0; k < sp.K(); ++k)
    if (qos[k].idx.empty() && qos[k].constant > 0.0) return std::nullopt;
  if (vars.empty()) return sol;
  convex::SmoothConvexProgram prog(vars.size());
  prog.block_of = block;
  for (std::size_t v = 0; v < vars.size(); ++v) {
    prog.lower[v] = 0.0;
    prog.upper[v] = vars[v].cap;
    prog.objective.linear.add(v, -vars[v].weight);
  }
  pt.linear.constant = pt_const;
  st.linear.constant = st_const;
  prog.constraints.push_back(pt);
  prog.constraints.push_back(st);
  for (std::size_t k = 0; k < sp.K(); ++k)
    if (!qos[k].idx.empty() && qos[k].constant > 0.0) {
      convex::ConvexFunction f;
      f.linear = qos[k];
      prog.constraints.push_back(f);
    }
  std::vector<double> start(vars.size());
  for (std::size_t v = 0; v < vars.size(); ++v) start[v] = 0.5 * vars[v].cap;
  const auto res = convex::solve_convex(prog, start, opt);
  if (res.status == convex::NlpStatus::infeasible) return std::nullopt;
  for (std::size_t v = 0; v < vars.size(); ++v) sol.point.x[vars[v].coord] = std::exp2(res.x[v]);
  sol.value = -res.objective;
  const double m_total = static_cast<double>(prog.constraints.size() + 2 * vars.size());
  sol.upper_bound = sol.value + m_total * res.mu + 1e-9 * std::max(1.0, sol.value);
  return sol;
}

}  // namespace cogrelay::monotonic
