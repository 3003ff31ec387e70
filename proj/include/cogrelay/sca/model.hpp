// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cogrelay/common.hpp"
#include "cogrelay/convex/barrier.hpp"
#include "cogrelay/instance.hpp"
#include "cogrelay/rates.hpp"

namespace cogrelay::sca {

using convex::SparseAffine;

/// weight * log2(arg(x)); arg is affine and >= 1 on the nonnegative orthant.
struct LogTerm {
  double weight = 0.0;
  SparseAffine arg;

  double value(const std::vector<double>& x) const { return weight * std::log2(arg.eval(x)); }

  /// First-order expansion at x0, as an affine map.
  SparseAffine tangent(const std::vector<double>& x0) const {
    const double z0 = arg.eval(x0);
    const double slope = weight / (z0 * kLn2);
    SparseAffine out;
    out.constant = weight * std::log2(z0);
    for (std::size_t n = 0; n < arg.idx.size(); ++n) {
      out.add(arg.idx[n], slope * arg.coef[n]);
      out.constant -= slope * arg.coef[n] * x0[arg.idx[n]];
    }
    return out;
  }
};

/// constant + sum(lin) - sum(keep), where every term is a concave log.
/// The restriction linearizes `lin` (the tangent overestimates it) and keeps `-keep`, which is convex.
struct DcExpr {
  double constant = 0.0;
  std::vector<LogTerm> lin, keep;

  double lin_value(const std::vector<double>& x) const {
    double s = 0.0;
    for (const auto& t : lin) s += t.value(x);
    return s;
  }
  double keep_value(const std::vector<double>& x) const {
    double s = 0.0;
    for (const auto& t : keep) s += t.value(x);
    return s;
  }
  double value(const std::vector<double>& x) const { return constant + lin_value(x) - keep_value(x); }

  SparseAffine lin_tangent(const std::vector<double>& x0) const {
    SparseAffine out;
    out.constant = constant;
    for (const auto& t : lin) {
      auto a = t.tangent(x0);
      out.constant += a.constant;
      for (std::size_t n = 0; n < a.idx.size(); ++n) out.add(a.idx[n], a.coef[n]);
    }
    return out;
  }
  /// Convex majorant at x0 in solver form: affine part plus (weight / ln 2) * (-ln arg) terms.
  convex::ConvexFunction restriction(const std::vector<double>& x0) const {
    convex::ConvexFunction f;
    f.linear = lin_tangent(x0);
    for (const auto& t : keep) f.add_neg_log(t.weight / kLn2, t.arg);
    return f;
  }
};

enum class VarKind { q_tilde, q, c, qst_tilde, qst, cst, ppu_tilde, psu_tilde, s, ppu, psu };

struct VarInfo {
  VarKind kind;
  std::size_t i = 0, k = 0, j = 0;
};

/// Variables, bounds and rows of the penalized problem. In the relaxed form every entity has a
/// tilde power, a raw power and a relaxed binary tied by big-M rows. The frozen form fixes an
/// assignment: only active entities keep a (tilde) power variable and the big-M and scheduling
/// rows disappear.
struct ScaModel {
  bool relaxed = true;
  ReceiverModel receiver = ReceiverModel::sic;
  std::size_t K = 0, J = 0, N = 0;
  std::vector<Triple> pairs;  // candidate (i, j, k)

  std::vector<VarInfo> vars;
  std::vector<double> lower, upper;
  std::vector<std::size_t> block_of;

  Array2<long> q_tilde, q_raw, c_bin;  // [k][i]
  std::vector<long> qst_tilde, qst_raw, cst_bin;  // [i]
  std::vector<long> ppu_tilde, psu_tilde, s_bin;  // [pair]
  Array2<long> ppu_raw;  // [k][i]
  Array2<long> psu_raw;  // [j][i]
  std::vector<std::size_t> binaries;

  DcExpr gain;                     // A, stored in `keep`: the minimized objective subtracts it
  DcExpr loss;                     // B, stored in `lin`; utility = A - B
  std::vector<DcExpr> relay_rows;  // relayed PU rate <= relay hop rate, per pair
  std::vector<std::size_t> relay_row_pair;
  std::vector<DcExpr> qos_rows;    // requirement - PU rate <= 0, per PU with r_req > 0
  std::vector<std::size_t> qos_row_pu;
  std::vector<SparseAffine> linear_rows;  // a(x) <= 0
  std::vector<std::string> linear_row_names;

  std::size_t num_vars() const { return vars.size(); }
  std::size_t num_rows() const { return relay_rows.size() + qos_rows.size() + linear_rows.size(); }

  static double at(long idx, const std::vector<double>& x) { return idx < 0 ? 0.0 : x[static_cast<std::size_t>(idx)]; }

  double utility(const std::vector<double>& x) const { return gain.keep_value(x) - loss.lin_value(x); }
  double penalty(const std::vector<double>& x) const {
    double h = 0.0;
    for (auto b : binaries) h += x[b] - x[b] * x[b];
    return h;
  }
  double max_fractionality(const std::vector<double>& x) const {
    double f = 0.0;
    for (auto b : binaries) f = std::max(f, std::min(x[b], 1.0 - x[b]));
    return f;
  }
};

namespace detail {

inline long add_var(ScaModel& m, VarKind kind, std::size_t i, std::size_t k, std::size_t j, double ub) {
  m.vars.push_back({kind, i, k, j});
  m.lower.push_back(0.0);
  m.upper.push_back(ub);
  m.block_of.push_back(i);
  return static_cast<long>(m.vars.size() - 1);
}

inline SparseAffine one_plus(std::initializer_list<std::pair<long, double>> terms) {
  SparseAffine a;
  a.constant = 1.0;
  for (auto [idx, c] : terms)
    if (idx >= 0) a.add(static_cast<std::size_t>(idx), c);
  return a;
}

inline SparseAffine row(std::initializer_list<std::pair<long, double>> terms, double constant = 0.0) {
  SparseAffine a;
  a.constant = constant;
  for (auto [idx, c] : terms)
    if (idx >= 0) a.add(static_cast<std::size_t>(idx), c);
  return a;
}

/// Utility, relay and QoS expressions over whichever tilde variables exist.
inline void build_rate_expressions(ScaModel& m, const ProblemInstance& inst) {
  const auto& ch = inst.channels;
  const double w = inst.weight_pu, mu = inst.weight_su;
  for (std::size_t k = 0; k < m.K; ++k)
    for (std::size_t i = 0; i < m.N; ++i)
      if (m.q_tilde(k, i) >= 0)
        m.gain.keep.push_back({w, one_plus({{m.q_tilde(k, i), ch.f_direct(k, i)}})});
  std::vector<DcExpr> qos(m.K);
  for (std::size_t k = 0; k < m.K; ++k) {
    qos[k].constant = inst.r_req[k];
    for (std::size_t i = 0; i < m.N; ++i)
      if (m.q_tilde(k, i) >= 0) qos[k].keep.push_back({1.0, one_plus({{m.q_tilde(k, i), ch.f_direct(k, i)}})});
  }
  for (std::size_t t = 0; t < m.pairs.size(); ++t) {
    const auto [i, j, k] = m.pairs[t];
    const long pu = m.ppu_tilde[t], su = m.psu_tilde[t];
    if (pu < 0 && su < 0) continue;
    const double h = ch.h_st_pu(k, i), g = ch.g_st_su(j, i);
    // PU rate = 1/2 log2(1 + (pu + su) H) - 1/2 log2(1 + su H).
    const LogTerm pu_total{0.5, one_plus({{pu, h}, {su, h}})};
    const LogTerm pu_noise{0.5, one_plus({{su, h}})};
    m.gain.keep.push_back({w * 0.5, pu_total.arg});
    m.loss.lin.push_back({w * 0.5, pu_noise.arg});
    if (m.receiver == ReceiverModel::sic) {
      m.gain.keep.push_back({mu * 0.5, one_plus({{su, g}})});
    } else {
      m.gain.keep.push_back({mu * 0.5, one_plus({{pu, g}, {su, g}})});
      m.loss.lin.push_back({mu * 0.5, one_plus({{pu, g}})});
    }
    qos[k].lin.push_back(pu_noise);
    qos[k].keep.push_back(pu_total);
    if (pu >= 0) {
      DcExpr r;
      r.lin.push_back(pu_total);
      r.keep.push_back(pu_noise);
      r.keep.push_back({0.5, one_plus({{m.qst_tilde[i], ch.f_relay_hop[i]}})});
      m.relay_rows.push_back(std::move(r));
      m.relay_row_pair.push_back(t);
    }
  }
  for (std::size_t k = 0; k < m.K; ++k) {
    if (!(inst.r_req[k] > 0.0)) continue;
    m.qos_rows.push_back(std::move(qos[k]));
    m.qos_row_pu.push_back(k);
  }
}

inline void add_budget_rows(ScaModel& m, const ProblemInstance& inst) {
  SparseAffine st, pt;
  st.constant = -inst.p_max_st;
  pt.constant = -inst.p_max_pt;
  for (std::size_t t = 0; t < m.pairs.size(); ++t) {
    if (m.ppu_tilde[t] >= 0) st.add(static_cast<std::size_t>(m.ppu_tilde[t]), 1.0);
    if (m.psu_tilde[t] >= 0) st.add(static_cast<std::size_t>(m.psu_tilde[t]), 1.0);
  }
  for (std::size_t i = 0; i < m.N; ++i) {
    if (m.qst_tilde[i] >= 0) pt.add(static_cast<std::size_t>(m.qst_tilde[i]), 1.0);
    for (std::size_t k = 0; k < m.K; ++k)
      if (m.q_tilde(k, i) >= 0) pt.add(static_cast<std::size_t>(m.q_tilde(k, i)), 1.0);
  }
  if (!st.idx.empty()) {
    m.linear_rows.push_back(std::move(st));
    m.linear_row_names.push_back("st_budget");
  }
  if (!pt.idx.empty()) {
    m.linear_rows.push_back(std::move(pt));
    m.linear_row_names.push_back("pt_budget");
  }
}

inline void init_index_maps(ScaModel& m) {
  m.q_tilde = m.q_raw = m.c_bin = Array2<long>(m.K, m.N, -1);
  m.qst_tilde.assign(m.N, -1);
  m.qst_raw.assign(m.N, -1);
  m.cst_bin.assign(m.N, -1);
  m.ppu_tilde.assign(m.pairs.size(), -1);
  m.psu_tilde.assign(m.pairs.size(), -1);
  m.s_bin.assign(m.pairs.size(), -1);
  m.ppu_raw = Array2<long>(m.K, m.N, -1);
  m.psu_raw = Array2<long>(m.J, m.N, -1);
}

/// The relayed PU part can carry rate only if both hops have a channel.
inline bool relay_usable(const ProblemInstance& inst, std::size_t i, std::size_t k) {
  return inst.channels.h_st_pu(k, i) > 0.0 && inst.channels.f_relay_hop[i] > 0.0;
}

inline std::vector<Triple> candidate_pairs(const ProblemInstance& inst, ReceiverModel model) {
  std::vector<Triple> out;
  for (std::size_t i = 0; i < inst.N(); ++i)
    for (std::size_t j = 0; j < inst.J(); ++j)
      for (std::size_t k = 0; k < inst.K(); ++k)
        if (pair_allowed(inst.channels, model, i, k, j)) out.push_back({i, j, k});
  return out;
}

}  // namespace detail

/// Relaxed penalized problem: tilde and raw powers, binaries in [0, 1], big-M rows, scheduling rows.
/// Per subcarrier: 3K + 3 + 3T_i + K + J variables (a pair's PU part is omitted when a hop of its
/// relay path has zero gain). Rows per subcarrier: 3K (big-M bound and two linking rows per direct
/// PU) + 3 (the same for the relay) + 6 T_i (two of each per pair) + K + 1 (PU and subcarrier
/// exclusivity) + 1 (one pair, when T_i > 0) + T_i (relay rate); plus both budgets and one QoS row
/// per PU with a positive requirement.
inline ScaModel build_relaxed_problem(const ProblemInstance& inst, ReceiverModel receiver = ReceiverModel::sic) {
  inst.validate();
  ScaModel m;
  m.relaxed = true;
  m.receiver = receiver;
  m.K = inst.K();
  m.J = inst.J();
  m.N = inst.N();
  m.pairs = detail::candidate_pairs(inst, receiver);
  detail::init_index_maps(m);
  const double P = inst.p_max_pt, S = inst.p_max_st;
  std::size_t t0 = 0;
  for (std::size_t i = 0; i < m.N; ++i) {
    for (std::size_t k = 0; k < m.K; ++k) {
      m.q_tilde(k, i) = detail::add_var(m, VarKind::q_tilde, i, k, 0, P);
      m.q_raw(k, i) = detail::add_var(m, VarKind::q, i, k, 0, P);
      m.c_bin(k, i) = detail::add_var(m, VarKind::c, i, k, 0, 1.0);
    }
    m.qst_tilde[i] = detail::add_var(m, VarKind::qst_tilde, i, 0, 0, P);
    m.qst_raw[i] = detail::add_var(m, VarKind::qst, i, 0, 0, P);
    m.cst_bin[i] = detail::add_var(m, VarKind::cst, i, 0, 0, 1.0);
    std::size_t t1 = t0;
    while (t1 < m.pairs.size() && m.pairs[t1].i == i) {
      const auto& pr = m.pairs[t1];
      if (detail::relay_usable(inst, i, pr.k))
        m.ppu_tilde[t1] = detail::add_var(m, VarKind::ppu_tilde, i, pr.k, pr.j, S);
      m.psu_tilde[t1] = detail::add_var(m, VarKind::psu_tilde, i, pr.k, pr.j, S);
      m.s_bin[t1] = detail::add_var(m, VarKind::s, i, pr.k, pr.j, 1.0);
      ++t1;
    }
    for (std::size_t k = 0; k < m.K; ++k) m.ppu_raw(k, i) = detail::add_var(m, VarKind::ppu, i, k, 0, S);
    for (std::size_t j = 0; j < m.J; ++j) m.psu_raw(j, i) = detail::add_var(m, VarKind::psu, i, 0, j, S);

    auto lin = [&](SparseAffine a, std::string name) {
      m.linear_rows.push_back(std::move(a));
      m.linear_row_names.push_back(std::move(name));
    };
    using detail::row;
    for (std::size_t k = 0; k < m.K; ++k) {
      const long qt = m.q_tilde(k, i), q = m.q_raw(k, i), c = m.c_bin(k, i);
      lin(row({{qt, 1.0}, {c, -P}}), "direct_bigM");
      lin(row({{q, 1.0}, {c, P}, {qt, -1.0}}, -P), "direct_link_lo");
      lin(row({{qt, 1.0}, {q, -1.0}}), "direct_link_hi");
    }
    {
      const long qt = m.qst_tilde[i], q = m.qst_raw[i], c = m.cst_bin[i];
      lin(row({{qt, 1.0}, {c, -P}}), "relay_bigM");
      lin(row({{q, 1.0}, {c, P}, {qt, -1.0}}, -P), "relay_link_lo");
      lin(row({{qt, 1.0}, {q, -1.0}}), "relay_link_hi");
    }
    for (std::size_t t = t0; t < t1; ++t) {
      const auto& pr = m.pairs[t];
      const long s = m.s_bin[t];
      if (m.ppu_tilde[t] >= 0) {
        lin(row({{m.ppu_tilde[t], 1.0}, {s, -S}}), "pair_pu_bigM");
        lin(row({{m.ppu_raw(pr.k, i), 1.0}, {s, S}, {m.ppu_tilde[t], -1.0}}, -S), "pair_pu_link_lo");
        lin(row({{m.ppu_tilde[t], 1.0}, {m.ppu_raw(pr.k, i), -1.0}}), "pair_pu_link_hi");
      }
      lin(row({{m.psu_tilde[t], 1.0}, {s, -S}}), "pair_su_bigM");
      lin(row({{m.psu_raw(pr.j, i), 1.0}, {s, S}, {m.psu_tilde[t], -1.0}}, -S), "pair_su_link_lo");
      lin(row({{m.psu_tilde[t], 1.0}, {m.psu_raw(pr.j, i), -1.0}}), "pair_su_link_hi");
    }
    for (std::size_t k = 0; k < m.K; ++k) {
      SparseAffine a = row({{m.c_bin(k, i), 1.0}}, -1.0);
      for (std::size_t t = t0; t < t1; ++t)
        if (m.pairs[t].k == k) a.add(static_cast<std::size_t>(m.s_bin[t]), 1.0);
      lin(std::move(a), "pu_exclusive");
    }
    {
      SparseAffine a = row({{m.cst_bin[i], 1.0}}, -1.0);
      for (std::size_t k = 0; k < m.K; ++k) a.add(static_cast<std::size_t>(m.c_bin(k, i)), 1.0);
      lin(std::move(a), "subcarrier_exclusive");
    }
    if (t1 > t0) {
      SparseAffine a = row({}, -1.0);
      for (std::size_t t = t0; t < t1; ++t) a.add(static_cast<std::size_t>(m.s_bin[t]), 1.0);
      lin(std::move(a), "single_pair");
    }
    t0 = t1;
  }
  for (std::size_t v = 0; v < m.vars.size(); ++v) {
    const auto kind = m.vars[v].kind;
    if (kind == VarKind::c || kind == VarKind::cst || kind == VarKind::s) m.binaries.push_back(v);
  }
  detail::add_budget_rows(m, inst);
  detail::build_rate_expressions(m, inst);
  return m;
}

/// Power-only problem for a fixed assignment. A pair's PU part exists only when the relay is active
/// on its subcarrier; otherwise the relay row forces it to zero anyway.
inline ScaModel build_frozen_problem(const ProblemInstance& inst, const Assignment& a,
                                     ReceiverModel receiver = ReceiverModel::sic) {
  inst.validate();
  ScaModel m;
  m.relaxed = false;
  m.receiver = receiver;
  m.K = inst.K();
  m.J = inst.J();
  m.N = inst.N();
  for (std::size_t i = 0; i < m.N; ++i)
    for (std::size_t j = 0; j < m.J; ++j)
      for (std::size_t k = 0; k < m.K; ++k)
        if (a.s_pair(k, j, i)) m.pairs.push_back({i, j, k});
  detail::init_index_maps(m);
  const double P = inst.p_max_pt, S = inst.p_max_st;
  std::size_t t = 0;
  for (std::size_t i = 0; i < m.N; ++i) {
    for (std::size_t k = 0; k < m.K; ++k)
      if (a.c_direct(k, i)) m.q_tilde(k, i) = detail::add_var(m, VarKind::q_tilde, i, k, 0, P);
    if (a.c_relay[i]) m.qst_tilde[i] = detail::add_var(m, VarKind::qst_tilde, i, 0, 0, P);
    for (; t < m.pairs.size() && m.pairs[t].i == i; ++t) {
      const auto& pr = m.pairs[t];
      if (a.c_relay[i] && detail::relay_usable(inst, i, pr.k))
        m.ppu_tilde[t] = detail::add_var(m, VarKind::ppu_tilde, i, pr.k, pr.j, S);
      m.psu_tilde[t] = detail::add_var(m, VarKind::psu_tilde, i, pr.k, pr.j, S);
    }
  }
  detail::add_budget_rows(m, inst);
  detail::build_rate_expressions(m, inst);
  return m;
}

/// Minimized objective: -(A - B) + rho (H - M).
inline double penalized_objective(const ScaModel& m, const std::vector<double>& x, double rho) {
  return -m.utility(x) + rho * m.penalty(x);
}

/// Values of the four parts of the objective at x.
struct DcParts {
  double A = 0.0, B = 0.0, H = 0.0, M = 0.0;
  std::vector<double> grad_A, grad_B;
};

inline DcParts dc_parts(const ScaModel& m, const std::vector<double>& x) {
  DcParts d;
  d.A = m.gain.keep_value(x);
  d.B = m.loss.lin_value(x);
  for (auto b : m.binaries) {
    d.H += x[b];
    d.M += x[b] * x[b];
  }
  auto grad = [&](const std::vector<LogTerm>& terms) {
    std::vector<double> g(x.size(), 0.0);
    for (const auto& t : terms) {
      const double s = t.weight / (t.arg.eval(x) * kLn2);
      for (std::size_t n = 0; n < t.arg.idx.size(); ++n) g[t.arg.idx[n]] += s * t.arg.coef[n];
    }
    return g;
  };
  d.grad_A = grad(m.gain.keep);
  d.grad_B = grad(m.loss.lin);
  return d;
}

/// Affine surrogates at an expansion point.
struct Surrogates {
  SparseAffine loss;                 // tangent of B
  SparseAffine square;               // tangent of M
  std::vector<SparseAffine> relay;   // tangent of each relay row's positive part
  std::vector<SparseAffine> qos;     // tangent of each QoS row's positive part (with the requirement)
};

inline Surrogates linearize_at(const ScaModel& m, const std::vector<double>& x0) {
  Surrogates s;
  s.loss = m.loss.lin_tangent(x0);
  for (auto b : m.binaries) {
    s.square.add(b, 2.0 * x0[b]);
    s.square.constant -= x0[b] * x0[b];
  }
  for (const auto& r : m.relay_rows) s.relay.push_back(r.lin_tangent(x0));
  for (const auto& r : m.qos_rows) s.qos.push_back(r.lin_tangent(x0));
  return s;
}

/// Convex restriction at x0: keeps -A and H, linearizes B and M, and in every rate row keeps the
/// subtracted logs while linearizing the positive ones. Its feasible set lies inside the original.
inline convex::SmoothConvexProgram restriction_at(const ScaModel& m, const std::vector<double>& x0, double rho) {
  convex::SmoothConvexProgram p(m.num_vars());
  p.lower = m.lower;
  p.upper = m.upper;
  p.block_of = m.block_of;
  const Surrogates s = linearize_at(m, x0);
  auto& obj = p.objective;
  obj.linear = s.loss;
  for (std::size_t n = 0; n < s.square.idx.size(); ++n) obj.linear.add(s.square.idx[n], -rho * s.square.coef[n]);
  obj.linear.constant -= rho * s.square.constant;
  for (auto b : m.binaries) obj.linear.add(b, rho);
  for (const auto& t : m.gain.keep) obj.add_neg_log(t.weight / kLn2, t.arg);
  for (const auto& r : m.relay_rows) p.constraints.push_back(r.restriction(x0));
  for (const auto& r : m.qos_rows) p.constraints.push_back(r.restriction(x0));
  for (const auto& a : m.linear_rows) {
    convex::ConvexFunction f;
    f.linear = a;
    p.constraints.push_back(std::move(f));
  }
  return p;
}

/// Largest violation over every row of the original (unlinearized) problem and the box.
inline double max_violation(const ScaModel& m, const std::vector<double>& x) {
  double v = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) v = std::max({v, m.lower[n] - x[n], x[n] - m.upper[n]});
  for (const auto& r : m.relay_rows) v = std::max(v, r.value(x));
  for (const auto& r : m.qos_rows) v = std::max(v, r.value(x));
  for (const auto& a : m.linear_rows) v = std::max(v, a.eval(x));
  return v;
}

}  // namespace cogrelay::sca
