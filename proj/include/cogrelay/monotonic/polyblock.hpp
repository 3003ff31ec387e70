// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cogrelay/monotonic/aux_space.hpp"
#include "cogrelay/monotonic/modes.hpp"
#include "cogrelay/solve_result.hpp"

namespace cogrelay::monotonic {

enum class Refinement {
  mode_split,  // branch over per-subcarrier schedules, Lagrangian bounds
  projection,  // outer polyblock: project the best vertex onto G, split it
};

struct PolyblockOptions {
  double epsilon = 1e-2;
  double bisection_tol = 1e-4;
  std::size_t max_iter = 20000;
  Refinement refinement = Refinement::mode_split;
  bool trace = true;
  std::size_t dual_max_iter = 1500;
  std::size_t max_seed_patterns = 200000;  // projection refinement only
  MembershipOptions membership;
  convex::SolverOptions pattern_solver;
  ValidationOptions validation;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Shared state of both refinements: the incumbent and how it was certified.
struct Incumbent {
  double value = -std::numeric_limits<double>::infinity();  // monotone objective at the point
  Policy policy;
  ValidationResult check;
  bool found() const { return std::isfinite(value); }
};

inline bool try_incumbent(const AuxiliaryPoint& p, double value, const AuxSpace& sp,
                          const ProblemInstance& inst, const PolyblockOptions& opt, Incumbent& inc,
                          std::size_t& rejected) {
  if (value <= inc.value) return false;
  try {
    Policy pol = recover_policy(p, sp, inst, opt.membership);
    auto chk = validate_policy(pol, inst, opt.validation);
    if (!chk.feasible()) {
      ++rejected;
      return false;
    }
    inc.value = value;
    inc.policy = std::move(pol);
    inc.check = std::move(chk);
    return true;
  } catch (const RecoveryError&) {
    ++rejected;
    return false;
  }
}

// ---------------------------------------------------------------------------------------------
// Mode-split branch and bound.

using ModeMask = std::uint64_t;

struct DualPoint {
  double value = std::numeric_limits<double>::infinity();
  Eigen::VectorXd z;
  std::vector<int> argmax;       // per subcarrier; -1 when every allowed mode idles
  std::vector<double> ambiguity; // best minus runner-up response per subcarrier
};

class LagrangianDual {
 public:
  LagrangianDual(const AuxSpace& sp, const ProblemInstance& inst, const std::vector<std::vector<Mode>>& modes)
      : sp_(sp), inst_(inst), modes_(modes) {
    for (std::size_t k = 0; k < sp.K(); ++k)
      if (inst.r_req[k] > 0.0) qos_.push_back(k);
  }

  std::size_t dim() const { return 2 + qos_.size(); }

  /// Dual value and a subgradient at scaled prices z = (alpha P_PT, beta P_ST, nu...).
  double evaluate(const Eigen::VectorXd& z, const std::vector<ModeMask>& allowed, Eigen::VectorXd& grad,
                  std::vector<int>* argmax, std::vector<double>* ambiguity) const {
    Prices pr;
    pr.alpha = inst_.p_max_pt > 0.0 ? z[0] / inst_.p_max_pt : 0.0;
    pr.beta = inst_.p_max_st > 0.0 ? z[1] / inst_.p_max_st : 0.0;
    pr.nu.assign(sp_.K(), 0.0);
    for (std::size_t q = 0; q < qos_.size(); ++q) pr.nu[qos_[q]] = z[2 + q];
    double value = z[0] + z[1];
    double pt = 0.0, st = 0.0;
    std::vector<double> rate(sp_.K(), 0.0);
    for (std::size_t q = 0; q < qos_.size(); ++q) value -= pr.nu[qos_[q]] * inst_.r_req[qos_[q]];
    if (argmax) argmax->assign(sp_.N(), -1);
    if (ambiguity) ambiguity->assign(sp_.N(), std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < sp_.N(); ++i) {
      double best = 0.0, second = 0.0;
      int best_m = -1;
      ModeResponse best_r;
      for (std::size_t m = 0; m < modes_[i].size(); ++m) {
        if (!(allowed[i] >> m & 1u)) continue;
        const auto r = respond(modes_[i][m], i, sp_, inst_, pr);
        if (best_m < 0 || r.value > best) {
          second = best_m < 0 ? 0.0 : best;
          best = r.value;
          best_m = static_cast<int>(m);
          best_r = r;
        } else if (r.value > second) {
          second = r.value;
        }
      }
      if (best_m < 0) continue;
      value += best;
      pt += best_r.pt;
      st += best_r.st;
      if (best_r.qos_pu_relay >= 0) rate[static_cast<std::size_t>(best_r.qos_pu_relay)] += 0.5 * best_r.x_u;
      if (best_r.qos_pu_direct >= 0) rate[static_cast<std::size_t>(best_r.qos_pu_direct)] += best_r.x_xi;
      if (argmax) (*argmax)[i] = best_m;
      if (ambiguity && std::popcount(allowed[i]) > 1) (*ambiguity)[i] = best - second;
    }
    grad.resize(static_cast<Eigen::Index>(dim()));
    grad[0] = inst_.p_max_pt > 0.0 ? 1.0 - pt / inst_.p_max_pt : 0.0;
    grad[1] = inst_.p_max_st > 0.0 ? 1.0 - st / inst_.p_max_st : 0.0;
    for (std::size_t q = 0; q < qos_.size(); ++q) grad[2 + q] = rate[qos_[q]] - inst_.r_req[qos_[q]];
    return value;
  }

  /// Ellipsoid minimization. Stops once the best point is certified within `tol`, or the node
  /// is decided against `prune_level` (an unprunable node only when `stop_if_unprunable`).
  DualPoint minimize(const std::vector<ModeMask>& allowed, const Eigen::VectorXd& center, double radius,
                     double prune_level, bool stop_if_unprunable, double tol, std::size_t max_iter) const {
    const auto n = static_cast<Eigen::Index>(dim());
    Eigen::VectorXd z = center;
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n) * radius * radius;
    DualPoint best;
    double lower = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd g;
    const double nn = static_cast<double>(n);
    for (std::size_t it = 0; it < max_iter; ++it) {
      Eigen::Index neg = -1;
      for (Eigen::Index c = 0; c < n; ++c)
        if (z[c] < 0.0) {
          neg = c;
          break;
        }
      if (neg >= 0) {
        g = Eigen::VectorXd::Zero(n);
        g[neg] = -1.0;
      } else {
        const double f = evaluate(z, allowed, g, nullptr, nullptr);
        if (f < best.value) {
          best.value = f;
          best.z = z;
        }
        const double spread = std::sqrt(std::max(0.0, g.dot(P * g)));
        lower = std::max(lower, f - spread);
        if (best.value <= prune_level || (stop_if_unprunable && lower > prune_level)) break;
        if (spread <= tol) break;
      }
      const double gpg = g.dot(P * g);
      if (!(gpg > 0.0)) break;
      const Eigen::VectorXd Pg = P * g / std::sqrt(gpg);
      z -= Pg / (nn + 1.0);
      P = nn * nn / (nn * nn - 1.0) * (P - 2.0 / (nn + 1.0) * Pg * Pg.transpose());
      P = 0.5 * (P + P.transpose());
    }
    if (best.z.size() == 0) {
      best.z = center.cwiseMax(0.0);
      best.value = evaluate(best.z, allowed, g, nullptr, nullptr);
    }
    evaluate(best.z, allowed, g, &best.argmax, &best.ambiguity);
    return best;
  }

 private:
  const AuxSpace& sp_;
  const ProblemInstance& inst_;
  const std::vector<std::vector<Mode>>& modes_;
  std::vector<std::size_t> qos_;
};

struct Node {
  std::vector<ModeMask> allowed;
  Eigen::VectorXd warm;
  double parent_bound = std::numeric_limits<double>::infinity();
  bool operator<(const Node& o) const { return parent_bound < o.parent_bound; }
};

inline void mode_split_search(const AuxSpace& sp, const ProblemInstance& inst, const PolyblockOptions& opt,
                              Incumbent& inc, SolveResult& out, std::size_t& rejected,
                              Clock::time_point t0) {
  const auto modes = enumerate_modes(sp, inst);
  for (const auto& m : modes)
    if (m.size() > 64) throw InvalidInput("polyblock: more than 64 schedules on one subcarrier");
  LagrangianDual dual(sp, inst, modes);
  const double scale = std::max({inst.weight_pu, inst.weight_su, 1.0}) * static_cast<double>(sp.N());
  Eigen::VectorXd center = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dual.dim()), scale);
  const double radius = 4.0 * scale * std::sqrt(static_cast<double>(dual.dim()));

  // serves[i][k]: schedules on subcarrier i that can carry PU k.
  std::vector<std::vector<ModeMask>> serves(sp.N(), std::vector<ModeMask>(sp.K(), 0));
  for (std::size_t i = 0; i < sp.N(); ++i)
    for (std::size_t m = 0; m < modes[i].size(); ++m) {
      const Mode& md = modes[i][m];
      if (md.direct_pu >= 0 && md.x_xi_max > 0.0) serves[i][static_cast<std::size_t>(md.direct_pu)] |= ModeMask{1} << m;
      if (md.kind == Mode::Kind::relay) serves[i][sp.triples()[static_cast<std::size_t>(md.triple)].k] |= ModeMask{1} << m;
    }

  std::map<std::vector<int>, std::optional<PatternSolution>> cache;
  auto solve_cached = [&](const std::vector<int>& pattern) -> const std::optional<PatternSolution>& {
    auto it = cache.find(pattern);
    if (it == cache.end())
      it = cache.emplace(pattern, solve_pattern(sp, inst, modes, pattern, opt.pattern_solver)).first;
    return it->second;
  };

  std::priority_queue<Node> open;
  Node root;
  root.allowed.resize(sp.N());
  for (std::size_t i = 0; i < sp.N(); ++i)
    root.allowed[i] = modes[i].empty() ? 0 : (modes[i].size() == 64 ? ~ModeMask{0}
                                                                    : (ModeMask{1} << modes[i].size()) - 1);
  root.warm = center;
  open.push(root);
  double closed_max = -std::numeric_limits<double>::infinity();
  auto prune_level = [&] { return inc.found() ? inc.value + opt.epsilon : 0.0; };
  auto global_bound = [&] {
    double b = std::max(closed_max, inc.value);
    if (!open.empty()) b = std::max(b, open.top().parent_bound);
    return b;
  };
  std::size_t it = 0;
  bool exhausted = true;
  while (!open.empty()) {
    if (open.top().parent_bound <= prune_level()) {
      closed_max = std::max(closed_max, open.top().parent_bound);
      open.pop();
      continue;
    }
    if (it >= opt.max_iter) {
      exhausted = false;
      break;
    }
    ++it;
    Node node = open.top();
    open.pop();
    const bool leaf = std::all_of(node.allowed.begin(), node.allowed.end(),
                                  [](ModeMask m) { return std::popcount(m) <= 1; });
    double bound;
    if (leaf) {
      std::vector<int> pattern(sp.N(), -1);
      for (std::size_t i = 0; i < sp.N(); ++i)
        if (node.allowed[i]) pattern[i] = std::countr_zero(node.allowed[i]);
      const auto& sol = solve_cached(pattern);
      if (sol) {
        try_incumbent(sol->point, sol->value, sp, inst, opt, inc, rejected);
        bound = std::min(sol->upper_bound, node.parent_bound);
      } else {
        bound = -std::numeric_limits<double>::infinity();
      }
    } else {
      const auto dp = dual.minimize(node.allowed, node.warm, radius, prune_level(), it > 1, 0.1 * opt.epsilon,
                                    opt.dual_max_iter);
      bound = std::min(dp.value, node.parent_bound);
      if (bound > prune_level()) {
        const auto& sol = solve_cached(dp.argmax);
        if (sol) try_incumbent(sol->point, sol->value, sp, inst, opt, inc, rejected);
      }
      if (bound > prune_level()) {
        auto push = [&](std::vector<ModeMask> allowed) {
          Node child;
          child.allowed = std::move(allowed);
          child.warm = dp.z;
          child.parent_bound = bound;
          open.push(std::move(child));
        };
        // A PU with a positive target needs some subcarrier whose schedule serves it. Until that
        // is forced, the relaxation meets the target by mixing schedules, which is where almost
        // all of the duality gap sits. Partition on the first subcarrier that serves the PU.
        std::size_t cover_pu = sp.K(), fewest = sp.N() + 1;
        for (std::size_t k = 0; k < sp.K(); ++k) {
          if (!(inst.r_req[k] > 0.0)) continue;
          std::size_t candidates = 0;
          bool forced = false;
          for (std::size_t i = 0; i < sp.N(); ++i) {
            const ModeMask m = node.allowed[i] & serves[i][k];
            if (!m) continue;
            ++candidates;
            forced = forced || m == node.allowed[i];
          }
          if (!forced && candidates < fewest) {
            cover_pu = k;
            fewest = candidates;
          }
        }
        if (cover_pu < sp.K()) {
          std::vector<ModeMask> rest = node.allowed;
          for (std::size_t i = 0; i < sp.N(); ++i) {
            const ModeMask m = node.allowed[i] & serves[i][cover_pu];
            if (!m) continue;
            std::vector<ModeMask> child = rest;
            child[i] = m;
            push(std::move(child));
            rest[i] &= ~serves[i][cover_pu];
          }
        } else {
          std::size_t pick = sp.N();
          for (std::size_t i = 0; i < sp.N(); ++i)
            if (std::popcount(node.allowed[i]) > 1 && (pick == sp.N() || dp.ambiguity[i] < dp.ambiguity[pick]))
              pick = i;
          for (std::size_t m = 0; m < 64; ++m) {
            if (!(node.allowed[pick] >> m & 1u)) continue;
            std::vector<ModeMask> child = node.allowed;
            child[pick] = ModeMask{1} << m;
            push(std::move(child));
          }
        }
        bound = -std::numeric_limits<double>::infinity();  // carried by the children
      }
    }
    closed_max = std::max(closed_max, bound);
    if (opt.trace)
      out.trace.rows.push_back({static_cast<double>(it), inc.value, global_bound(),
                                static_cast<double>(open.size()), seconds_since(t0)});
  }
  out.iterations = it;
  out.bound = global_bound();
  out.status = exhausted ? SolveStatus::optimal : SolveStatus::max_iterations;
}

// ---------------------------------------------------------------------------------------------
// Outer polyblock with projections.

/// Box corners restricted to every combination of one schedule per subcarrier.
inline std::vector<AuxiliaryPoint> seed_vertices(const AuxSpace& sp, const ProblemInstance& inst,
                                                 const std::vector<std::vector<Mode>>& modes,
                                                 std::size_t limit) {
  double count = 1.0;
  for (const auto& m : modes) count *= static_cast<double>(std::max<std::size_t>(1, m.size()));
  if (count > static_cast<double>(limit))
    throw InvalidInput("polyblock: projection refinement would need " + std::to_string(count) +
                       " seed vertices; use mode_split");
  std::vector<AuxiliaryPoint> out;
  std::vector<std::size_t> pick(sp.N(), 0);
  while (true) {
    AuxiliaryPoint p = sp.ones();
    for (std::size_t i = 0; i < sp.N(); ++i) {
      if (modes[i].empty()) continue;
      const Mode& m = modes[i][pick[i]];
      if (m.kind == Mode::Kind::relay) {
        const auto t = static_cast<std::size_t>(m.triple);
        p.x[sp.u_index(t)] = std::exp2(m.x_u_max);
        p.x[sp.v_index(t)] = std::exp2(m.x_v_max);
      } else if (m.kind == Mode::Kind::su) {
        p.x[sp.v_index(static_cast<std::size_t>(m.triple))] = std::exp2(m.x_v_max);
      }
      if (m.direct_pu >= 0) p.x[sp.xi_index(static_cast<std::size_t>(m.direct_pu), i)] = std::exp2(m.x_xi_max);
    }
    if (in_H(p, sp, inst)) out.push_back(std::move(p));
    std::size_t i = 0;
    while (i < sp.N()) {
      if (++pick[i] < std::max<std::size_t>(1, modes[i].size())) break;
      pick[i++] = 0;
    }
    if (i == sp.N()) break;
  }
  return out;
}

inline bool dominated_by(const AuxiliaryPoint& a, const AuxiliaryPoint& b) {
  for (std::size_t c = 0; c < a.x.size(); ++c)
    if (a.x[c] > b.x[c]) return false;
  return true;
}

inline void projection_search(const AuxSpace& sp, const ProblemInstance& inst, const PolyblockOptions& opt,
                              Incumbent& inc, SolveResult& out, std::size_t& rejected,
                              Clock::time_point t0) {
  const auto modes = enumerate_modes(sp, inst);
  struct Vertex {
    AuxiliaryPoint z;
    double f;
  };
  std::vector<Vertex> V;
  for (auto& p : seed_vertices(sp, inst, modes, opt.max_seed_patterns)) {
    const double f = monotone_objective(p, sp, inst.weight_pu, inst.weight_su);
    V.push_back({std::move(p), f});
  }
  auto prune_level = [&] { return inc.found() ? inc.value + opt.epsilon : -1.0; };
  std::size_t it = 0;
  bool exhausted = true;
  double bound = -std::numeric_limits<double>::infinity();
  double pruned_max = -std::numeric_limits<double>::infinity();
  while (true) {
    std::erase_if(V, [&](const Vertex& v) {
      if (v.f > prune_level()) return false;
      pruned_max = std::max(pruned_max, v.f);
      return true;
    });
    if (V.empty()) break;
    if (it >= opt.max_iter) {
      exhausted = false;
      break;
    }
    ++it;
    auto best = std::max_element(V.begin(), V.end(), [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
    Vertex top = std::move(*best);
    *best = std::move(V.back());
    V.pop_back();
    const AuxiliaryPoint pi = project_onto_G(top.z, sp, inst, opt.bisection_tol, opt.membership);
    if (in_H(pi, sp, inst))
      try_incumbent(pi, monotone_objective(pi, sp, inst.weight_pu, inst.weight_su), sp, inst, opt, inc, rejected);
    const bool inside = pi == top.z;
    if (!inside) {
      for (std::size_t c = 0; c < top.z.x.size(); ++c) {
        if (!(pi.x[c] < top.z.x[c])) continue;
        Vertex child{top.z, 0.0};
        child.z.x[c] = pi.x[c];
        if (!in_H(child.z, sp, inst)) continue;
        child.f = monotone_objective(child.z, sp, inst.weight_pu, inst.weight_su);
        if (child.f <= prune_level()) {
          pruned_max = std::max(pruned_max, child.f);
          continue;
        }
        if (V.size() <= 20000 &&
            std::any_of(V.begin(), V.end(), [&](const Vertex& v) { return dominated_by(child.z, v.z); }))
          continue;
        V.push_back(std::move(child));
      }
    }
    bound = std::max(inc.value, pruned_max);
    for (const auto& v : V) bound = std::max(bound, v.f);
    if (opt.trace)
      out.trace.rows.push_back({static_cast<double>(it), inc.value, bound, static_cast<double>(V.size()),
                                seconds_since(t0)});
  }
  out.iterations = it;
  bound = std::max(inc.value, pruned_max);
  for (const auto& v : V) bound = std::max(bound, v.f);
  out.bound = bound;
  out.status = exhausted ? SolveStatus::optimal : SolveStatus::max_iterations;
}

}  // namespace detail

/// Globally optimal joint power and subcarrier allocation to within `epsilon` of the
/// weighted throughput, by monotonic optimization over the auxiliary rate coordinates.
inline SolveResult polyblock_solve(const ProblemInstance& inst, const PolyblockOptions& opt = {}) {
  inst.validate();
  if (!(opt.epsilon > 0.0)) throw InvalidInput("polyblock: epsilon must be positive");
  if (!(opt.bisection_tol > 0.0 && opt.bisection_tol < 1.0)) throw InvalidInput("polyblock: bad bisection_tol");
  const auto t0 = detail::Clock::now();
  SolveResult out;
  out.method = "polyblock";
  out.trace.columns = {"iteration", "cbv", "upper_bound", "open", "seconds"};
  const AuxSpace sp(inst);
  if (!in_H(sp.corner(), sp, inst)) {
    out.status = SolveStatus::infeasible;
    out.message = "QoS targets exceed the largest achievable PU rates";
    out.seconds = detail::seconds_since(t0);
    return out;
  }
  detail::Incumbent inc;
  std::size_t rejected = 0;
  if (opt.refinement == Refinement::mode_split)
    detail::mode_split_search(sp, inst, opt, inc, out, rejected, t0);
  else
    detail::projection_search(sp, inst, opt, inc, out, rejected, t0);
  out.seconds = detail::seconds_since(t0);
  if (rejected) out.message = std::to_string(rejected) + " candidate points failed recovery or validation";
  if (!inc.found()) {
    out.status = out.status == SolveStatus::optimal ? SolveStatus::infeasible : SolveStatus::failed;
    return out;
  }
  out.policy = inc.policy;
  out.objective = inc.check.report.weighted_total;
  out.bound = std::max(out.bound, inc.value);
  out.gap = out.bound - inc.value;
  return out;
}

}  // namespace cogrelay::monotonic
