// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "cogrelay/convex/lp_feasibility.hpp"
#include "cogrelay/instance.hpp"
#include "cogrelay/rates.hpp"

namespace cogrelay::monotonic {

/// Coordinates of the monotonic reformulation, flattened as
/// [u over admissible triples | v over admissible triples | xi over (k, i)].
/// Every coordinate is a linear SINR-type ratio >= 1.
struct AuxiliaryPoint {
  std::vector<double> x;
  bool operator==(const AuxiliaryPoint&) const = default;
};

/// Per-coordinate upper bounds obtained by giving one link the whole budget.
struct BoxBounds {
  std::vector<double> upper;  // same layout as AuxiliaryPoint::x
};

/// Products of indicators and powers (one copy per admissible pair for the secondary powers).
struct TildePowers {
  Array2<double> q_direct;           // [k][i]
  std::vector<double> q_relay;       // [i]
  std::vector<double> p_pu, p_su;    // per admissible triple
};

struct Interference {
  double i_pu = 0.0;  // at PU k from co-channel transmissions, scaled by H
  double i_su = 0.0;  // at SU j, scaled by G
  double s_pu = 0.0;  // at PU k on the direct link, scaled by F
};

/// Index bookkeeping for one instance.
class AuxSpace {
 public:
  explicit AuxSpace(const ProblemInstance& inst)
      : K_(inst.K()), J_(inst.J()), N_(inst.N()), triple_id_(inst.K(), inst.J(), inst.N(), -1) {
    triples_ = sic_admissible_pairs(inst.channels);
    per_subcarrier_.resize(N_);
    for (std::size_t t = 0; t < triples_.size(); ++t) {
      const auto& tr = triples_[t];
      triple_id_(tr.k, tr.j, tr.i) = static_cast<long>(t);
      per_subcarrier_[tr.i].push_back(t);
    }
    const auto& ch = inst.channels;
    box_.upper.assign(dim(), 1.0);
    for (std::size_t t = 0; t < triples_.size(); ++t) {
      const auto& tr = triples_[t];
      box_.upper[u_index(t)] = 1.0 + inst.p_max_st * ch.h_st_pu(tr.k, tr.i);
      box_.upper[v_index(t)] = 1.0 + inst.p_max_st * ch.g_st_su(tr.j, tr.i);
    }
    for (std::size_t k = 0; k < K_; ++k)
      for (std::size_t i = 0; i < N_; ++i)
        box_.upper[xi_index(k, i)] = 1.0 + inst.p_max_pt * ch.f_direct(k, i);
  }

  std::size_t K() const { return K_; }
  std::size_t J() const { return J_; }
  std::size_t N() const { return N_; }
  std::size_t num_triples() const { return triples_.size(); }
  std::size_t dim() const { return 2 * triples_.size() + K_ * N_; }
  const std::vector<Triple>& triples() const { return triples_; }
  const std::vector<std::size_t>& triples_on(std::size_t i) const { return per_subcarrier_[i]; }
  long triple_id(std::size_t k, std::size_t j, std::size_t i) const { return triple_id_(k, j, i); }

  std::size_t u_index(std::size_t t) const { return t; }
  std::size_t v_index(std::size_t t) const { return triples_.size() + t; }
  std::size_t xi_index(std::size_t k, std::size_t i) const { return 2 * triples_.size() + k * N_ + i; }

  const BoxBounds& box() const { return box_; }

  /// Coordinates whose box collapses to 1 (zero gain) are not search dimensions.
  std::vector<std::size_t> active_coordinates() const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < dim(); ++c)
      if (box_.upper[c] > 1.0) out.push_back(c);
    return out;
  }

  AuxiliaryPoint ones() const { return {std::vector<double>(dim(), 1.0)}; }
  AuxiliaryPoint corner() const { return {box_.upper}; }

  TildePowers zero_tilde() const {
    TildePowers t;
    t.q_direct = Array2<double>(K_, N_, 0.0);
    t.q_relay.assign(N_, 0.0);
    t.p_pu.assign(triples_.size(), 0.0);
    t.p_su.assign(triples_.size(), 0.0);
    return t;
  }

 private:
  std::size_t K_, J_, N_;
  std::vector<Triple> triples_;
  std::vector<std::vector<std::size_t>> per_subcarrier_;
  Array3<long> triple_id_;
  BoxBounds box_;
};

/// Co-channel interference sums of the penalty reformulation on subcarrier i for PU k and SU j:
/// secondary pairs (m, n) with m != k and n != j, plus the direct-link signal to k.
inline Interference penalty_interference(const TildePowers& tp, const AuxSpace& sp,
                                         const ChannelState& ch, std::size_t i, std::size_t k,
                                         std::size_t j) {
  double others = 0.0;
  for (std::size_t t : sp.triples_on(i)) {
    const auto& tr = sp.triples()[t];
    if (tr.k != k && tr.j != j) others += tp.p_pu[t] + tp.p_su[t];
  }
  Interference out;
  const double base = tp.q_direct(k, i) + others;
  out.i_pu = base * ch.h_st_pu(k, i);
  out.i_su = j < ch.num_su() ? base * ch.g_st_su(j, i) : 0.0;
  double direct_others = tp.q_relay[i];
  for (std::size_t m = 0; m < sp.K(); ++m)
    if (m != k) direct_others += tp.q_direct(m, i);
  out.s_pu = direct_others * ch.f_direct(k, i);
  return out;
}

/// Lower-bound objective: sum of 1/2 (w log2 u + mu log2 v) over pairs plus w log2 xi.
inline double monotone_objective(const AuxiliaryPoint& p, const AuxSpace& sp, double w, double mu) {
  double s = 0.0;
  for (std::size_t t = 0; t < sp.num_triples(); ++t)
    s += 0.5 * (w * std::log2(p.x[sp.u_index(t)]) + mu * std::log2(p.x[sp.v_index(t)]));
  for (std::size_t k = 0; k < sp.K(); ++k)
    for (std::size_t i = 0; i < sp.N(); ++i) s += w * std::log2(p.x[sp.xi_index(k, i)]);
  return s;
}

/// Per-coordinate weight of log2 in the objective.
inline std::vector<double> objective_weights(const AuxSpace& sp, double w, double mu) {
  std::vector<double> c(sp.dim(), w);
  for (std::size_t t = 0; t < sp.num_triples(); ++t) {
    c[sp.u_index(t)] = 0.5 * w;
    c[sp.v_index(t)] = 0.5 * mu;
  }
  return c;
}

inline bool within_box(const AuxiliaryPoint& p, const AuxSpace& sp) {
  for (std::size_t c = 0; c < sp.dim(); ++c)
    if (!(p.x[c] >= 1.0) || p.x[c] > sp.box().upper[c]) return false;
  return true;
}

/// Whether the coordinates above 1 on subcarrier i describe one admissible schedule:
/// at most one secondary pair, at most one direct PU, no direct PU next to a relayed pair,
/// and a direct PU next to an SU-only pair must differ from the pair's PU label.
inline bool support_valid_on(const AuxiliaryPoint& p, const AuxSpace& sp, std::size_t i) {
  long pair = -1;
  bool relayed = false;
  for (std::size_t t : sp.triples_on(i)) {
    const bool u_on = p.x[sp.u_index(t)] > 1.0;
    const bool v_on = p.x[sp.v_index(t)] > 1.0;
    if (!u_on && !v_on) continue;
    if (pair >= 0) return false;
    pair = static_cast<long>(t);
    relayed = u_on;
  }
  long direct = -1;
  for (std::size_t k = 0; k < sp.K(); ++k) {
    if (!(p.x[sp.xi_index(k, i)] > 1.0)) continue;
    if (direct >= 0) return false;
    direct = static_cast<long>(k);
  }
  if (pair < 0 || direct < 0) return true;
  if (relayed) return false;
  return sp.triples()[static_cast<std::size_t>(pair)].k != static_cast<std::size_t>(direct);
}

inline bool support_valid(const AuxiliaryPoint& p, const AuxSpace& sp) {
  for (std::size_t i = 0; i < sp.N(); ++i)
    if (!support_valid_on(p, sp, i)) return false;
  return true;
}

/// Minimal tilde powers realizing a point with a valid schedule (no interference remains).
inline TildePowers minimal_powers(const AuxiliaryPoint& p, const AuxSpace& sp, const ProblemInstance& inst) {
  const auto& ch = inst.channels;
  TildePowers tp = sp.zero_tilde();
  for (std::size_t t = 0; t < sp.num_triples(); ++t) {
    const auto& tr = sp.triples()[t];
    const double u = p.x[sp.u_index(t)], v = p.x[sp.v_index(t)];
    if (v > 1.0) tp.p_su[t] = (v - 1.0) / ch.g_st_su(tr.j, tr.i);
    if (u > 1.0) {
      const double H = ch.h_st_pu(tr.k, tr.i);
      tp.p_pu[t] = (u - 1.0) * (tp.p_su[t] * H + 1.0) / H;
      tp.q_relay[tr.i] = std::max(tp.q_relay[tr.i], (u - 1.0) / ch.f_relay_hop[tr.i]);
    }
  }
  for (std::size_t k = 0; k < sp.K(); ++k)
    for (std::size_t i = 0; i < sp.N(); ++i) {
      const double xi = p.x[sp.xi_index(k, i)];
      if (xi > 1.0) tp.q_direct(k, i) = (xi - 1.0) / ch.f_direct(k, i);
    }
  return tp;
}

/// Variable layout of the membership LP: [q_direct (k, i) | q_relay i | p_pu t | p_su t].
struct MembershipLayout {
  std::size_t K, N, T;
  std::size_t q(std::size_t k, std::size_t i) const { return k * N + i; }
  std::size_t q_relay(std::size_t i) const { return K * N + i; }
  std::size_t p_pu(std::size_t t) const { return K * N + N + t; }
  std::size_t p_su(std::size_t t) const { return K * N + N + T + t; }
  std::size_t size() const { return K * N + N + 2 * T; }
};

/// Linear system in the tilde powers that certifies a point of G: rate rows with the penalty
/// interference, the relay hop row, and both budgets.
///
/// Column c holds power column_scale[c] * y_c. The scale is the closed-form minimal power of the
/// entity, and 0 for entities whose coordinate sits at 1: such powers only ever add interference
/// or budget load, so fixing them at zero loses nothing. Without this, high-SINR rows carry
/// interference coefficients up to (v - 1) G ~ 1e13 next to O(1) signal terms and the row-relative
/// LP tolerance turns into a visible rate error.
inline convex::LinearFeasibilityProblem membership_lp(const AuxiliaryPoint& p, const AuxSpace& sp,
                                                      const ProblemInstance& inst, double tol,
                                                      std::vector<double>* column_scale = nullptr) {
  const auto& ch = inst.channels;
  const MembershipLayout L{sp.K(), sp.N(), sp.num_triples()};
  convex::LinearFeasibilityProblem lp;
  lp.num_vars = L.size();
  lp.tolerance = tol;
  // Shared interference pattern: q_k plus pairs (m, n) with m != k, n != j.
  auto interference_row = [&](std::vector<double>& row, std::size_t i, std::size_t k, std::size_t j,
                              double scale) {
    row[L.q(k, i)] += scale;
    for (std::size_t t : sp.triples_on(i)) {
      const auto& tr = sp.triples()[t];
      if (tr.k != k && tr.j != j) {
        row[L.p_pu(t)] += scale;
        row[L.p_su(t)] += scale;
      }
    }
  };
  for (std::size_t t = 0; t < sp.num_triples(); ++t) {
    const auto& tr = sp.triples()[t];
    const double H = ch.h_st_pu(tr.k, tr.i), G = ch.g_st_su(tr.j, tr.i);
    const double u = p.x[sp.u_index(t)], v = p.x[sp.v_index(t)];
    if (u > 1.0) {
      std::vector<double> row(L.size(), 0.0);
      row[L.p_su(t)] += (u - 1.0) * H;
      interference_row(row, tr.i, tr.k, tr.j, (u - 1.0) * H);
      row[L.p_pu(t)] -= H;
      lp.add_row(std::move(row), -(u - 1.0));
      std::vector<double> relay(L.size(), 0.0);
      relay[L.q_relay(tr.i)] = -ch.f_relay_hop[tr.i];
      lp.add_row(std::move(relay), 1.0 - u);
    }
    if (v > 1.0) {
      std::vector<double> row(L.size(), 0.0);
      interference_row(row, tr.i, tr.k, tr.j, (v - 1.0) * G);
      row[L.p_su(t)] -= G;
      lp.add_row(std::move(row), -(v - 1.0));
    }
  }
  for (std::size_t k = 0; k < sp.K(); ++k)
    for (std::size_t i = 0; i < sp.N(); ++i) {
      const double xi = p.x[sp.xi_index(k, i)];
      if (!(xi > 1.0)) continue;
      const double F = ch.f_direct(k, i);
      std::vector<double> row(L.size(), 0.0);
      row[L.q_relay(i)] += (xi - 1.0) * F;
      for (std::size_t m = 0; m < sp.K(); ++m)
        if (m != k) row[L.q(m, i)] += (xi - 1.0) * F;
      row[L.q(k, i)] -= F;
      lp.add_row(std::move(row), -(xi - 1.0));
    }
  std::vector<double> st(L.size(), 0.0), pt(L.size(), 0.0);
  for (std::size_t t = 0; t < sp.num_triples(); ++t) st[L.p_pu(t)] = st[L.p_su(t)] = 1.0;
  for (std::size_t i = 0; i < sp.N(); ++i) {
    pt[L.q_relay(i)] = 1.0;
    for (std::size_t k = 0; k < sp.K(); ++k) pt[L.q(k, i)] = 1.0;
  }
  lp.add_row(std::move(st), inst.p_max_st);
  lp.add_row(std::move(pt), inst.p_max_pt);

  const TildePowers floor = minimal_powers(p, sp, inst);
  std::vector<double> scale(L.size(), 0.0);
  for (std::size_t i = 0; i < sp.N(); ++i) {
    scale[L.q_relay(i)] = floor.q_relay[i];
    for (std::size_t k = 0; k < sp.K(); ++k) scale[L.q(k, i)] = floor.q_direct(k, i);
  }
  for (std::size_t t = 0; t < sp.num_triples(); ++t) {
    scale[L.p_pu(t)] = floor.p_pu[t];
    scale[L.p_su(t)] = floor.p_su[t];
  }
  for (auto& row : lp.rows)
    for (std::size_t c = 0; c < L.size(); ++c) row[c] *= scale[c];
  if (column_scale) *column_scale = std::move(scale);
  return lp;
}

struct MembershipOptions {
  double lp_tolerance = 1e-9;
};

/// Point of G: within the box, a valid per-subcarrier schedule, and the membership LP feasible.
inline bool in_G(const AuxiliaryPoint& p, const AuxSpace& sp, const ProblemInstance& inst,
                 const MembershipOptions& opt = {}, TildePowers* witness = nullptr) {
  if (!within_box(p, sp) || !support_valid(p, sp)) return false;
  std::vector<double> scale;
  auto res = convex::lp_feasible(membership_lp(p, sp, inst, opt.lp_tolerance, &scale));
  if (!res.feasible) return false;
  for (std::size_t c = 0; c < scale.size(); ++c) res.witness[c] *= scale[c];
  if (witness) {
    const MembershipLayout L{sp.K(), sp.N(), sp.num_triples()};
    *witness = sp.zero_tilde();
    for (std::size_t i = 0; i < sp.N(); ++i) {
      witness->q_relay[i] = res.witness[L.q_relay(i)];
      for (std::size_t k = 0; k < sp.K(); ++k) witness->q_direct(k, i) = res.witness[L.q(k, i)];
    }
    for (std::size_t t = 0; t < sp.num_triples(); ++t) {
      witness->p_pu[t] = res.witness[L.p_pu(t)];
      witness->p_su[t] = res.witness[L.p_su(t)];
    }
  }
  return true;
}

/// Point of H: every PU's QoS target is met by the rates encoded in the coordinates.
inline bool in_H(const AuxiliaryPoint& p, const AuxSpace& sp, const ProblemInstance& inst) {
  std::vector<double> rate(sp.K(), 0.0);
  for (std::size_t k = 0; k < sp.K(); ++k)
    for (std::size_t i = 0; i < sp.N(); ++i) rate[k] += std::log2(p.x[sp.xi_index(k, i)]);
  for (std::size_t t = 0; t < sp.num_triples(); ++t)
    rate[sp.triples()[t].k] += 0.5 * std::log2(p.x[sp.u_index(t)]);
  for (std::size_t k = 0; k < sp.K(); ++k)
    if (rate[k] < inst.r_req[k]) return false;
  return true;
}

/// Largest lambda in [0, 1] with 1 + lambda (vertex - 1) in G, by bisection.
inline AuxiliaryPoint project_onto_G(const AuxiliaryPoint& vertex, const AuxSpace& sp,
                                     const ProblemInstance& inst, double bisection_tol = 1e-4,
                                     const MembershipOptions& opt = {}) {
  auto at = [&](double lambda) {
    AuxiliaryPoint p = vertex;
    for (auto& c : p.x) c = 1.0 + lambda * (c - 1.0);
    return p;
  };
  if (in_G(vertex, sp, inst, opt)) return vertex;
  double lo = 0.0, hi = 1.0;
  const int steps = static_cast<int>(std::ceil(std::log2(1.0 / bisection_tol)));
  for (int s = 0; s < steps; ++s) {
    const double mid = 0.5 * (lo + hi);
    if (in_G(at(mid), sp, inst, opt)) lo = mid;
    else hi = mid;
  }
  return at(lo);
}

class RecoveryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Turn a point of G intersect H into a policy: tilde powers from the membership LP witness,
/// powers of entities whose coordinate sits at 1 cleared, indicators from the remaining support.
inline Policy recover_policy(const AuxiliaryPoint& p, const AuxSpace& sp, const ProblemInstance& inst,
                             const MembershipOptions& opt = {}) {
  TildePowers tp;
  if (!in_G(p, sp, inst, opt, &tp)) throw RecoveryError("recover_policy: point is not in G");
  Policy pol = Policy::zeros(inst);
  auto& a = pol.assignment;
  auto& w = pol.powers;
  for (std::size_t i = 0; i < sp.N(); ++i) {
    bool relay_needed = false;
    for (std::size_t t : sp.triples_on(i)) {
      const auto& tr = sp.triples()[t];
      const bool u_on = p.x[sp.u_index(t)] > 1.0, v_on = p.x[sp.v_index(t)] > 1.0;
      if (!u_on && !v_on) continue;
      if (a.s_pair(tr.k, tr.j, i)) throw RecoveryError("recover_policy: duplicate pair");
      a.s_pair(tr.k, tr.j, i) = 1;
      w.p_pu(tr.k, i) = u_on ? tp.p_pu[t] : 0.0;
      w.p_su(tr.j, i) = v_on ? tp.p_su[t] : 0.0;
      relay_needed = relay_needed || u_on;
    }
    if (relay_needed) {
      a.c_relay[i] = 1;
      w.q_relay[i] = tp.q_relay[i];
    }
    for (std::size_t k = 0; k < sp.K(); ++k) {
      if (!(p.x[sp.xi_index(k, i)] > 1.0)) continue;
      a.c_direct(k, i) = 1;
      w.q_direct(k, i) = tp.q_direct(k, i);
    }
  }
  std::vector<Violation> v;
  for (std::size_t i = 0; i < sp.N(); ++i) detail::structural_violations(pol, inst, i, ReceiverModel::sic, v);
  if (!v.empty()) throw RecoveryError("recover_policy: schedule violates exclusivity: " + v.front().describe());
  return pol;
}

}  // namespace cogrelay::monotonic
