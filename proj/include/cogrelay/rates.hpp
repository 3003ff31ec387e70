// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cogrelay/common.hpp"
#include "cogrelay/instance.hpp"

namespace cogrelay {

// ---------------------------------------------------------------------------
// Rate formulas (bits/s/Hz per subcarrier)

/// Direct primary-station link.
inline double direct_rate(double q, double f) { return log2p1(q * f); }

/// First hop to the relay; half-duplex decode-and-forward halves the pre-log.
inline double relay_hop_rate(double q_st, double f_st) { return 0.5 * log2p1(q_st * f_st); }

/// Relayed PU signal, decoded with the co-scheduled SU signal as noise.
inline double noma_pu_rate(double p_pu, double p_su, double h) {
  return 0.5 * log2p1(p_pu * h / (p_su * h + 1.0));
}

/// SU rate after cancelling the PU signal.
inline double noma_su_rate(double p_su, double g) { return 0.5 * log2p1(p_su * g); }

/// SU rate when the PU signal is treated as noise.
inline double tin_su_rate(double p_pu, double p_su, double g) {
  return 0.5 * log2p1(p_su * g / (p_pu * g + 1.0));
}

/// Receiver capability of the secondary users.
enum class ReceiverModel { sic, interference_as_noise };

struct Triple {
  std::size_t i, j, k;
  bool operator==(const Triple&) const = default;
};

/// SU j can cancel PU k's signal on subcarrier i when its channel is at least as strong.
inline bool sic_admissible(const ChannelState& ch, std::size_t i, std::size_t k, std::size_t j) {
  return ch.h_st_pu(k, i) <= ch.g_st_su(j, i);
}

/// All (i, j, k) with H_k^i <= G_j^i, ordered by i, then j, then k.
inline std::vector<Triple> sic_admissible_pairs(const ChannelState& ch) {
  std::vector<Triple> out;
  for (std::size_t i = 0; i < ch.num_subcarriers(); ++i)
    for (std::size_t j = 0; j < ch.num_su(); ++j)
      for (std::size_t k = 0; k < ch.num_pu(); ++k)
        if (sic_admissible(ch, i, k, j)) out.push_back({i, j, k});
  return out;
}

/// Whether pair (k, j) may be scheduled on subcarrier i under the receiver model.
inline bool pair_allowed(const ChannelState& ch, ReceiverModel model, std::size_t i, std::size_t k,
                         std::size_t j) {
  return model == ReceiverModel::interference_as_noise || sic_admissible(ch, i, k, j);
}

// ---------------------------------------------------------------------------
// Policies

struct Assignment {
  Array2<std::uint8_t> c_direct;  // [k][i]
  std::vector<std::uint8_t> c_relay;  // [i]
  Array3<std::uint8_t> s_pair;    // [k][j][i]

  Assignment() = default;
  Assignment(std::size_t K, std::size_t J, std::size_t N)
      : c_direct(K, N, 0), c_relay(N, 0), s_pair(K, J, N, 0) {}
  bool operator==(const Assignment&) const = default;
};

struct PowerAllocation {
  Array2<double> q_direct;  // [k][i]
  std::vector<double> q_relay;  // [i]
  Array2<double> p_pu;      // [k][i]
  Array2<double> p_su;      // [j][i]

  PowerAllocation() = default;
  PowerAllocation(std::size_t K, std::size_t J, std::size_t N)
      : q_direct(K, N, 0.0), q_relay(N, 0.0), p_pu(K, N, 0.0), p_su(J, N, 0.0) {}
  bool operator==(const PowerAllocation&) const = default;
};

struct Policy {
  Assignment assignment;
  PowerAllocation powers;

  Policy() = default;
  Policy(std::size_t K, std::size_t J, std::size_t N) : assignment(K, J, N), powers(K, J, N) {}
  static Policy zeros(const ProblemInstance& inst) { return Policy(inst.K(), inst.J(), inst.N()); }

  std::size_t K() const { return assignment.c_direct.rows(); }
  std::size_t J() const { return assignment.s_pair.dim1(); }
  std::size_t N() const { return assignment.c_relay.size(); }
  bool operator==(const Policy&) const = default;
};

struct RateReport {
  std::vector<double> pu_rate;           // [k], left side of the QoS constraint
  std::vector<double> su_rate;           // [j]
  std::vector<double> per_subcarrier_u;  // [i], weighted throughput
  double weighted_total = 0.0;
  std::vector<bool> qos_met;             // [k]
  bool relay_constraint_met = true;

  /// (sum of PU rates + sum of SU rates) / (K + J).
  double avg_user_throughput() const {
    double s = 0.0;
    for (double r : pu_rate) s += r;
    for (double r : su_rate) s += r;
    const std::size_t n = pu_rate.size() + su_rate.size();
    return n ? s / static_cast<double>(n) : 0.0;
  }
  double avg_pu_throughput() const {
    double s = 0.0;
    for (double r : pu_rate) s += r;
    return pu_rate.empty() ? 0.0 : s / static_cast<double>(pu_rate.size());
  }
  double avg_su_throughput() const {
    double s = 0.0;
    for (double r : su_rate) s += r;
    return su_rate.empty() ? 0.0 : s / static_cast<double>(su_rate.size());
  }
};

struct Violation {
  std::string constraint;  // e.g. "relay", "qos", "st_budget"
  std::size_t i = 0, k = 0, j = 0;
  double margin = 0.0;  // amount by which the constraint is exceeded
  std::string describe() const {
    std::ostringstream os;
    os << constraint << " (i=" << i << ", k=" << k << ", j=" << j << ") exceeded by " << margin;
    return os.str();
  }
};

struct ValidationOptions {
  double rate_tol = 1e-6;
  double budget_rel_tol = 1e-9;
  ReceiverModel model = ReceiverModel::sic;
};

struct ValidationResult {
  RateReport report;
  std::vector<Violation> violations;
  bool feasible() const { return violations.empty(); }
  std::string summary() const {
    std::string s;
    for (const auto& v : violations) s += v.describe() + "\n";
    return s;
  }
};

namespace detail {

inline void check_policy_shape(const Policy& p, const ProblemInstance& inst) {
  const std::size_t K = inst.K(), J = inst.J(), N = inst.N();
  const auto& a = p.assignment;
  const auto& w = p.powers;
  bool ok = a.c_direct.rows() == K && a.c_direct.cols() == N && a.c_relay.size() == N &&
            a.s_pair.dim0() == K && a.s_pair.dim1() == J && a.s_pair.dim2() == N &&
            w.q_direct.rows() == K && w.q_direct.cols() == N && w.q_relay.size() == N &&
            w.p_pu.rows() == K && w.p_pu.cols() == N && w.p_su.rows() == J && w.p_su.cols() == N;
  if (!ok) throw InvalidInput("policy shape does not match instance");
}

inline double su_rate_for(ReceiverModel model, double p_pu, double p_su, double g) {
  return model == ReceiverModel::sic ? noma_su_rate(p_su, g) : tin_su_rate(p_pu, p_su, g);
}

/// Structural checks on one subcarrier: binary entries, per-PU exclusivity, per-subcarrier
/// exclusivity, at most one co-scheduled pair, pairing rule.
inline void structural_violations(const Policy& p, const ProblemInstance& inst, std::size_t i,
                                  ReceiverModel model, std::vector<Violation>& out) {
  const auto& a = p.assignment;
  const std::size_t K = inst.K(), J = inst.J();
  auto binary = [&](std::uint8_t v, const char* name, std::size_t k, std::size_t j) {
    if (v > 1) out.push_back({std::string("binary_") + name, i, k, j, double(v) - 1.0});
  };
  binary(a.c_relay[i], "c_relay", 0, 0);
  double occupied = a.c_relay[i];
  std::size_t pairs = 0;
  for (std::size_t k = 0; k < K; ++k) {
    binary(a.c_direct(k, i), "c_direct", k, 0);
    occupied += a.c_direct(k, i);
    double per_pu = a.c_direct(k, i);
    for (std::size_t j = 0; j < J; ++j) {
      binary(a.s_pair(k, j, i), "s_pair", k, j);
      per_pu += a.s_pair(k, j, i);
      pairs += a.s_pair(k, j, i);
      if (a.s_pair(k, j, i) && !pair_allowed(inst.channels, model, i, k, j))
        out.push_back({"sic_order", i, k, j,
                       inst.channels.h_st_pu(k, i) - inst.channels.g_st_su(j, i)});
    }
    if (per_pu > 1.0) out.push_back({"pu_exclusive", i, k, 0, per_pu - 1.0});
  }
  if (occupied > 1.0) out.push_back({"subcarrier_exclusive", i, 0, 0, occupied - 1.0});
  if (pairs > 1) out.push_back({"single_pair", i, 0, 0, double(pairs) - 1.0});
}

}  // namespace detail

/// Weighted throughput on subcarrier i. Throws if the subcarrier's assignment is malformed.
inline double subcarrier_throughput(const Policy& p, const ProblemInstance& inst, std::size_t i,
                                    ReceiverModel model = ReceiverModel::sic) {
  detail::check_policy_shape(p, inst);
  if (i >= inst.N()) throw InvalidInput("subcarrier index out of range");
  std::vector<Violation> v;
  detail::structural_violations(p, inst, i, model, v);
  if (!v.empty()) throw InvalidInput("subcarrier_throughput: " + v.front().describe());
  const auto& a = p.assignment;
  const auto& w = p.powers;
  const auto& ch = inst.channels;
  double u = 0.0;
  for (std::size_t k = 0; k < inst.K(); ++k) {
    for (std::size_t j = 0; j < inst.J(); ++j) {
      if (!a.s_pair(k, j, i)) continue;
      u += inst.weight_pu * noma_pu_rate(w.p_pu(k, i), w.p_su(j, i), ch.h_st_pu(k, i)) +
           inst.weight_su * detail::su_rate_for(model, w.p_pu(k, i), w.p_su(j, i), ch.g_st_su(j, i));
    }
    if (a.c_direct(k, i)) u += inst.weight_pu * direct_rate(w.q_direct(k, i), ch.f_direct(k, i));
  }
  return u;
}

/// Check every constraint of the allocation problem and compute the rate report.
inline ValidationResult validate_policy(const Policy& p, const ProblemInstance& inst,
                                        const ValidationOptions& opt = {}) {
  detail::check_policy_shape(p, inst);
  const std::size_t K = inst.K(), J = inst.J(), N = inst.N();
  const auto& a = p.assignment;
  const auto& w = p.powers;
  const auto& ch = inst.channels;
  ValidationResult res;
  auto& rep = res.report;
  auto& out = res.violations;
  rep.pu_rate.assign(K, 0.0);
  rep.su_rate.assign(J, 0.0);
  rep.per_subcarrier_u.assign(N, 0.0);
  rep.qos_met.assign(K, true);

  auto nonneg = [&](double x, const char* name, std::size_t i, std::size_t k, std::size_t j) {
    if (!(x >= 0.0) || !std::isfinite(x)) out.push_back({std::string("nonnegative_") + name, i, k, j, -x});
  };
  double pt_used = 0.0, st_used = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    detail::structural_violations(p, inst, i, opt.model, out);
    nonneg(w.q_relay[i], "q_relay", i, 0, 0);
    pt_used += a.c_relay[i] * w.q_relay[i];
    const double c_st = a.c_relay[i] * relay_hop_rate(w.q_relay[i], ch.f_relay_hop[i]);
    for (std::size_t k = 0; k < K; ++k) {
      nonneg(w.q_direct(k, i), "q_direct", i, k, 0);
      nonneg(w.p_pu(k, i), "p_pu", i, k, 0);
      pt_used += a.c_direct(k, i) * w.q_direct(k, i);
      if (a.c_direct(k, i)) {
        const double r = direct_rate(w.q_direct(k, i), ch.f_direct(k, i));
        rep.pu_rate[k] += r;
        rep.per_subcarrier_u[i] += inst.weight_pu * r;
      }
      for (std::size_t j = 0; j < J; ++j) {
        if (!a.s_pair(k, j, i)) continue;
        st_used += w.p_pu(k, i) + w.p_su(j, i);
        const double r_pu = noma_pu_rate(w.p_pu(k, i), w.p_su(j, i), ch.h_st_pu(k, i));
        const double r_su = detail::su_rate_for(opt.model, w.p_pu(k, i), w.p_su(j, i), ch.g_st_su(j, i));
        rep.pu_rate[k] += r_pu;
        rep.su_rate[j] += r_su;
        rep.per_subcarrier_u[i] += inst.weight_pu * r_pu + inst.weight_su * r_su;
        if (r_pu - c_st > opt.rate_tol) {
          out.push_back({"relay", i, k, j, r_pu - c_st});
          rep.relay_constraint_met = false;
        }
      }
    }
    for (std::size_t j = 0; j < J; ++j) nonneg(w.p_su(j, i), "p_su", i, 0, j);
  }
  for (std::size_t k = 0; k < K; ++k) {
    if (inst.r_req[k] - rep.pu_rate[k] > opt.rate_tol) {
      out.push_back({"qos", 0, k, 0, inst.r_req[k] - rep.pu_rate[k]});
      rep.qos_met[k] = false;
    }
  }
  if (st_used > inst.p_max_st * (1.0 + opt.budget_rel_tol))
    out.push_back({"st_budget", 0, 0, 0, st_used - inst.p_max_st});
  if (pt_used > inst.p_max_pt * (1.0 + opt.budget_rel_tol))
    out.push_back({"pt_budget", 0, 0, 0, pt_used - inst.p_max_pt});
  for (double u : rep.per_subcarrier_u) rep.weighted_total += u;
  return res;
}

// ---------------------------------------------------------------------------
// Policy text format, mirroring the instance format.

inline void write_policy(std::ostream& os, const Policy& p) {
  const auto old_prec = os.precision(std::numeric_limits<double>::max_digits10);
  os << "cogrelay-policy 1 " << p.K() << ' ' << p.J() << ' ' << p.N() << '\n';
  auto ints = [&](const char* key, const std::vector<std::uint8_t>& v) {
    os << key;
    for (auto x : v) os << ' ' << int(x);
    os << '\n';
  };
  ints("c_direct", p.assignment.c_direct.data());
  ints("c_relay", p.assignment.c_relay);
  ints("s_pair", p.assignment.s_pair.data());
  detail::write_values(os, "q_direct", p.powers.q_direct.data());
  detail::write_values(os, "q_relay", p.powers.q_relay);
  detail::write_values(os, "p_pu", p.powers.p_pu.data());
  detail::write_values(os, "p_su", p.powers.p_su.data());
  os.precision(old_prec);
}

inline Policy read_policy(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidInput("policy: empty input");
  std::istringstream hs(line);
  std::string magic;
  int version = 0;
  std::size_t K = 0, J = 0, N = 0;
  if (!(hs >> magic >> version >> K >> J >> N) || magic != "cogrelay-policy" || version != 1)
    throw InvalidInput("policy: bad header");
  Policy p(K, J, N);
  auto ints = [&](const char* key, std::vector<std::uint8_t>& dst) {
    const auto v = detail::read_values(is, key, dst.size());
    for (std::size_t n = 0; n < v.size(); ++n) {
      if (v[n] != 0.0 && v[n] != 1.0) throw InvalidInput(std::string("policy: non-binary entry in ") + key);
      dst[n] = static_cast<std::uint8_t>(v[n]);
    }
  };
  ints("c_direct", p.assignment.c_direct.data());
  ints("c_relay", p.assignment.c_relay);
  ints("s_pair", p.assignment.s_pair.data());
  p.powers.q_direct.data() = detail::read_values(is, "q_direct", K * N);
  p.powers.q_relay = detail::read_values(is, "q_relay", N);
  p.powers.p_pu.data() = detail::read_values(is, "p_pu", K * N);
  p.powers.p_su.data() = detail::read_values(is, "p_su", J * N);
  return p;
}

}  // namespace cogrelay
