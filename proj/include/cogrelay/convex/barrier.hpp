// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cogrelay/common.hpp"

namespace cogrelay::convex {

/// Sparse affine map x -> constant + sum coef * x[idx].
struct SparseAffine {
  std::vector<std::size_t> idx;
  std::vector<double> coef;
  double constant = 0.0;

  SparseAffine& add(std::size_t i, double c) {
    if (c != 0.0) {
      idx.push_back(i);
      coef.push_back(c);
    }
    return *this;
  }
  double eval(const std::vector<double>& x) const {
    double s = constant;
    for (std::size_t n = 0; n < idx.size(); ++n) s += coef[n] * x[idx[n]];
    return s;
  }
};

/// -log(z) is convex on z > 0, exp(z) everywhere; both keep convexity under weight >= 0.
enum class TermKind { neg_log, exp };

struct Term {
  TermKind kind = TermKind::neg_log;
  double weight = 1.0;
  SparseAffine arg;

  static double phi(TermKind k, double z) { return k == TermKind::neg_log ? -std::log(z) : std::exp(z); }
  static double dphi(TermKind k, double z) { return k == TermKind::neg_log ? -1.0 / z : std::exp(z); }
  static double d2phi(TermKind k, double z) { return k == TermKind::neg_log ? 1.0 / (z * z) : std::exp(z); }
};

/// linear(x) + sum_t weight_t * phi_t(arg_t(x)).
struct ConvexFunction {
  SparseAffine linear;
  std::vector<Term> terms;

  ConvexFunction& add_neg_log(double weight, SparseAffine arg) {
    if (weight < 0.0) throw InvalidInput("negative weight on a convex term");
    if (weight > 0.0) terms.push_back({TermKind::neg_log, weight, std::move(arg)});
    return *this;
  }
  ConvexFunction& add_exp(double weight, SparseAffine arg) {
    if (weight < 0.0) throw InvalidInput("negative weight on a convex term");
    if (weight > 0.0) terms.push_back({TermKind::exp, weight, std::move(arg)});
    return *this;
  }

  bool in_domain(const std::vector<double>& x) const {
    for (const auto& t : terms)
      if (t.kind == TermKind::neg_log && !(t.arg.eval(x) > 0.0)) return false;
    return true;
  }
  double value(const std::vector<double>& x) const {
    double v = linear.eval(x);
    for (const auto& t : terms) v += t.weight * Term::phi(t.kind, t.arg.eval(x));
    return v;
  }
  std::vector<double> gradient(const std::vector<double>& x) const {
    std::vector<double> g(x.size(), 0.0);
    for (std::size_t n = 0; n < linear.idx.size(); ++n) g[linear.idx[n]] += linear.coef[n];
    for (const auto& t : terms) {
      const double d = t.weight * Term::dphi(t.kind, t.arg.eval(x));
      for (std::size_t n = 0; n < t.arg.idx.size(); ++n) g[t.arg.idx[n]] += d * t.arg.coef[n];
    }
    return g;
  }
};

/// minimize objective(x) s.t. constraints(x) <= 0, lower <= x <= upper.
/// block_of optionally partitions variables; every term must then touch a single block.
struct SmoothConvexProgram {
  std::size_t num_vars = 0;
  ConvexFunction objective;
  std::vector<ConvexFunction> constraints;
  std::vector<double> lower, upper;
  std::vector<std::size_t> block_of;

  explicit SmoothConvexProgram(std::size_t n = 0)
      : num_vars(n),
        lower(n, -std::numeric_limits<double>::infinity()),
        upper(n, std::numeric_limits<double>::infinity()) {}
};

enum class NlpStatus { optimal, infeasible, max_iterations };

inline const char* to_string(NlpStatus s) {
  switch (s) {
    case NlpStatus::optimal: return "optimal";
    case NlpStatus::infeasible: return "infeasible";
    case NlpStatus::max_iterations: return "max_iterations";
  }
  return "?";
}

struct NlpSolution {
  std::vector<double> x;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double kkt_residual = std::numeric_limits<double>::infinity();
  double max_violation = 0.0;
  NlpStatus status = NlpStatus::infeasible;
  std::vector<double> multipliers;  // per constraint, >= 0
  std::vector<double> lower_multipliers, upper_multipliers;
  double mu = 0.0;                  // final barrier parameter
  std::size_t newton_steps = 0;
};

struct SolverOptions {
  double tau_kkt = 1e-7;
  double tau_feas = 1e-8;
  std::size_t max_newton_per_stage = 200;
  double mu0 = 1.0;
  double mu_factor = 0.2;
  double stage_decrement_tol = 1e-9;  // centering accuracy before the last stage
};

namespace detail {

/// Barrier machinery bound to one program.
class BarrierEngine {
 public:
  explicit BarrierEngine(const SmoothConvexProgram& p) : p_(p), n_(p.num_vars) {
    if (p.lower.size() != n_ || p.upper.size() != n_) throw InvalidInput("solve_convex: bound sizes");
    block_of_ = p.block_of.empty() ? std::vector<std::size_t>(n_, 0) : p.block_of;
    if (block_of_.size() != n_) throw InvalidInput("solve_convex: block_of size");
    std::size_t nb = 0;
    for (auto b : block_of_) nb = std::max(nb, b + 1);
    blocks_.resize(nb);
    local_.resize(n_);
    for (std::size_t v = 0; v < n_; ++v) {
      local_[v] = blocks_[block_of_[v]].vars.size();
      blocks_[block_of_[v]].vars.push_back(v);
    }
    obj_ = compile(p.objective);
    for (const auto& c : p.constraints) cons_.push_back(compile(c));
  }

  std::size_t n() const { return n_; }

  bool strictly_interior(const std::vector<double>& x) const {
    for (std::size_t v = 0; v < n_; ++v)
      if (!(x[v] > p_.lower[v] && x[v] < p_.upper[v])) return false;
    if (!p_.objective.in_domain(x)) return false;
    for (std::size_t r = 0; r < cons_.size(); ++r)
      if (!p_.constraints[r].in_domain(x) || !(p_.constraints[r].value(x) < 0.0)) return false;
    return true;
  }

  /// Barrier value; +inf outside the strict interior.
  double barrier_value(const std::vector<double>& x, double mu) const {
    double f = 0.0;
    for (std::size_t v = 0; v < n_; ++v) {
      const double lo = x[v] - p_.lower[v], hi = p_.upper[v] - x[v];
      if (!(lo > 0.0) || !(hi > 0.0)) return kInf;
      if (std::isfinite(p_.lower[v])) f -= mu * std::log(lo);
      if (std::isfinite(p_.upper[v])) f -= mu * std::log(hi);
    }
    if (!p_.objective.in_domain(x)) return kInf;
    f += p_.objective.value(x);
    for (const auto& c : p_.constraints) {
      if (!c.in_domain(x)) return kInf;
      const double g = c.value(x);
      if (!(g < 0.0)) return kInf;
      f -= mu * std::log(-g);
    }
    return std::isfinite(f) ? f : kInf;
  }

  /// Newton direction of the barrier function; returns the decrement squared and gradient.
  double newton_direction(const std::vector<double>& x, double mu, Eigen::VectorXd& grad,
                          Eigen::VectorXd& dir) {
    grad.setZero(n_);
    for (auto& b : blocks_) b.hess.setZero(b.vars.size(), b.vars.size());
    coupling_.clear();
    // Box barrier.
    for (std::size_t v = 0; v < n_; ++v) {
      auto& b = blocks_[block_of_[v]];
      const std::size_t l = local_[v];
      if (std::isfinite(p_.lower[v])) {
        const double d = x[v] - p_.lower[v];
        grad[v] -= mu / d;
        b.hess(l, l) += mu / (d * d);
      }
      if (std::isfinite(p_.upper[v])) {
        const double d = p_.upper[v] - x[v];
        grad[v] += mu / d;
        b.hess(l, l) += mu / (d * d);
      }
    }
    accumulate(obj_, p_.objective, x, 1.0, grad, false, 0.0);
    for (std::size_t r = 0; r < cons_.size(); ++r) {
      const double g = p_.constraints[r].value(x);
      accumulate(cons_[r], p_.constraints[r], x, mu / (-g), grad, true, mu / (g * g));
    }
    // Factor blocks with Jacobi scaling, then the Woodbury capacitance matrix.
    for (auto& b : blocks_) factor_block(b);
    prepare_coupling();
    Eigen::VectorXd rhs = -grad;
    dir = solve(rhs);
    for (int pass = 0; pass < 2; ++pass) {
      Eigen::VectorXd res = rhs - multiply(dir);
      if (res.lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) break;
      dir += solve(res);
    }
    return -grad.dot(dir);
  }

  double max_box_step(const std::vector<double>& x, const Eigen::VectorXd& d) const {
    double t = 1.0;
    for (std::size_t v = 0; v < n_; ++v) {
      if (d[v] < 0.0 && std::isfinite(p_.lower[v])) t = std::min(t, (p_.lower[v] - x[v]) / d[v]);
      if (d[v] > 0.0 && std::isfinite(p_.upper[v])) t = std::min(t, (p_.upper[v] - x[v]) / d[v]);
    }
    return t;
  }

  static constexpr double kInf = std::numeric_limits<double>::infinity();

 private:
  struct Compiled {
    std::vector<std::size_t> support;  // global variable ids
    std::vector<std::size_t> lin_pos;  // positions of linear coefficients in support
    std::vector<std::vector<std::size_t>> term_pos;
    std::size_t block = 0;
    bool local = true;
  };
  struct Block {
    std::vector<std::size_t> vars;
    Eigen::MatrixXd hess;
    Eigen::LLT<Eigen::MatrixXd> llt;
    Eigen::VectorXd scale;
  };

  Compiled compile(const ConvexFunction& f) {
    Compiled c;
    std::map<std::size_t, std::size_t> pos;
    auto place = [&](std::size_t v) {
      if (v >= n_) throw InvalidInput("solve_convex: variable index out of range");
      auto [it, inserted] = pos.emplace(v, c.support.size());
      if (inserted) c.support.push_back(v);
      return it->second;
    };
    for (auto v : f.linear.idx) c.lin_pos.push_back(place(v));
    for (const auto& t : f.terms) {
      std::vector<std::size_t> tp;
      for (auto v : t.arg.idx) tp.push_back(place(v));
      if (!t.arg.idx.empty()) {
        const std::size_t b0 = block_of_[t.arg.idx.front()];
        for (auto v : t.arg.idx)
          if (block_of_[v] != b0) throw InvalidInput("solve_convex: a term spans several blocks");
      }
      c.term_pos.push_back(std::move(tp));
    }
    if (!c.support.empty()) {
      c.block = block_of_[c.support.front()];
      for (auto v : c.support)
        if (block_of_[v] != c.block) c.local = false;
    }
    return c;
  }

  /// Adds gscale * grad f to grad, gscale * hess f to the blocks, and outer * grad f grad f^T.
  void accumulate(const Compiled& c, const ConvexFunction& f, const std::vector<double>& x, double gscale,
                  Eigen::VectorXd& grad, bool with_outer, double outer) {
    const std::size_t s = c.support.size();
    scratch_.assign(s, 0.0);
    for (std::size_t n = 0; n < c.lin_pos.size(); ++n) scratch_[c.lin_pos[n]] += f.linear.coef[n];
    for (std::size_t t = 0; t < f.terms.size(); ++t) {
      const auto& term = f.terms[t];
      const double z = term.arg.eval(x);
      const double d1 = term.weight * Term::dphi(term.kind, z);
      const double d2 = gscale * term.weight * Term::d2phi(term.kind, z);
      const auto& tp = c.term_pos[t];
      for (std::size_t a = 0; a < tp.size(); ++a) scratch_[tp[a]] += d1 * term.arg.coef[a];
      if (tp.empty()) continue;
      auto& blk = blocks_[block_of_[term.arg.idx.front()]];
      for (std::size_t a = 0; a < tp.size(); ++a)
        for (std::size_t b = 0; b < tp.size(); ++b)
          blk.hess(local_[term.arg.idx[a]], local_[term.arg.idx[b]]) +=
              d2 * term.arg.coef[a] * term.arg.coef[b];
    }
    for (std::size_t a = 0; a < s; ++a) grad[c.support[a]] += gscale * scratch_[a];
    if (!with_outer || s == 0) return;
    if (c.local) {
      auto& blk = blocks_[c.block];
      for (std::size_t a = 0; a < s; ++a)
        for (std::size_t b = 0; b < s; ++b)
          blk.hess(local_[c.support[a]], local_[c.support[b]]) += outer * scratch_[a] * scratch_[b];
    } else {
      Eigen::VectorXd u = Eigen::VectorXd::Zero(n_);
      const double r = std::sqrt(outer);
      for (std::size_t a = 0; a < s; ++a) u[c.support[a]] = r * scratch_[a];
      coupling_.push_back(std::move(u));
    }
  }

  static void factor_block(Block& b) {
    const Eigen::Index m = b.hess.rows();
    b.scale.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double d = b.hess(i, i);
      b.scale[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 1.0;
    }
    Eigen::MatrixXd scaled = b.scale.asDiagonal() * b.hess * b.scale.asDiagonal();
    b.llt.compute(scaled);
    double reg = 1e-14;
    while (b.llt.info() != Eigen::Success) {
      if (reg > 1e-2) throw NumericalError("solve_convex: Hessian block is not positive definite");
      b.llt.compute(scaled + reg * Eigen::MatrixXd::Identity(m, m));
      reg *= 100.0;
    }
  }

  Eigen::VectorXd solve_blocks(const Eigen::VectorXd& r) const {
    Eigen::VectorXd out(n_);
    for (const auto& b : blocks_) {
      const Eigen::Index m = static_cast<Eigen::Index>(b.vars.size());
      Eigen::VectorXd rb(m);
      for (Eigen::Index i = 0; i < m; ++i) rb[i] = r[b.vars[i]] * b.scale[i];
      Eigen::VectorXd sb = b.llt.solve(rb);
      for (Eigen::Index i = 0; i < m; ++i) out[b.vars[i]] = sb[i] * b.scale[i];
    }
    return out;
  }

  void prepare_coupling() {
    const Eigen::Index mc = static_cast<Eigen::Index>(coupling_.size());
    if (mc == 0) return;
    DiU_.resize(n_, mc);
    for (Eigen::Index c = 0; c < mc; ++c) DiU_.col(c) = solve_blocks(coupling_[c]);
    Eigen::MatrixXd S = Eigen::MatrixXd::Identity(mc, mc);
    for (Eigen::Index a = 0; a < mc; ++a)
      for (Eigen::Index b = 0; b < mc; ++b) S(a, b) += coupling_[a].dot(DiU_.col(b));
    capacitance_.compute(S);
  }

  /// (D + U U^T)^{-1} r via Woodbury, D block diagonal.
  Eigen::VectorXd solve(const Eigen::VectorXd& r) const {
    Eigen::VectorXd y = solve_blocks(r);
    const Eigen::Index mc = static_cast<Eigen::Index>(coupling_.size());
    if (mc == 0) return y;
    Eigen::VectorXd Uty(mc);
    for (Eigen::Index a = 0; a < mc; ++a) Uty[a] = coupling_[a].dot(y);
    return y - DiU_ * capacitance_.solve(Uty);
  }

  Eigen::VectorXd multiply(const Eigen::VectorXd& d) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_);
    for (const auto& b : blocks_) {
      const Eigen::Index m = static_cast<Eigen::Index>(b.vars.size());
      Eigen::VectorXd db(m);
      for (Eigen::Index i = 0; i < m; ++i) db[i] = d[b.vars[i]];
      Eigen::VectorXd hb = b.hess * db;
      for (Eigen::Index i = 0; i < m; ++i) out[b.vars[i]] += hb[i];
    }
    for (const auto& u : coupling_) out += u * u.dot(d);
    return out;
  }

  const SmoothConvexProgram& p_;
  std::size_t n_;
  std::vector<std::size_t> block_of_, local_;
  std::vector<Block> blocks_;
  Compiled obj_;
  std::vector<Compiled> cons_;
  std::vector<Eigen::VectorXd> coupling_;
  Eigen::MatrixXd DiU_;
  Eigen::LDLT<Eigen::MatrixXd> capacitance_;
  std::vector<double> scratch_;
};

struct CenterResult {
  bool converged = false;
  std::size_t steps = 0;
  double decrement = 0.0;
};

/// Damped Newton centering at fixed mu. `stop` is polled after every accepted step.
template <class Stop>
CenterResult center(BarrierEngine& eng, std::vector<double>& x, double mu, std::size_t max_steps,
                    double decrement_tol, Stop&& stop) {
  CenterResult res;
  Eigen::VectorXd grad, dir;
  double f = eng.barrier_value(x, mu);
  double prev_lam2 = BarrierEngine::kInf;
  for (res.steps = 0; res.steps < max_steps; ++res.steps) {
    const double lam2 = eng.newton_direction(x, mu, grad, dir);
    res.decrement = lam2;
    if (!std::isfinite(lam2)) throw NumericalError("solve_convex: non-finite Newton decrement");
    if (lam2 / 2.0 <= decrement_tol) {
      res.converged = true;
      return res;
    }
    // Inside the quadratic region function values stop resolving progress; take pure Newton
    // steps while the decrement keeps shrinking.
    const bool quadratic = lam2 < 1e-10;
    if (quadratic && lam2 >= 0.5 * prev_lam2) {
      res.converged = true;
      return res;
    }
    prev_lam2 = lam2;
    double t = std::min(1.0, 0.99 * eng.max_box_step(x, dir));
    std::vector<double> trial(x.size());
    double ft = BarrierEngine::kInf;
    const double slope = grad.dot(dir);
    while (t > 1e-16) {
      for (std::size_t v = 0; v < x.size(); ++v) trial[v] = x[v] + t * dir[v];
      ft = eng.barrier_value(trial, mu);
      if (quadratic ? std::isfinite(ft) : ft <= f + 0.25 * t * slope) break;
      t *= 0.5;
    }
    if (!(t > 1e-16) || !std::isfinite(ft) || (!quadratic && !(ft < f))) {
      // No measurable progress: the point is centered to working precision.
      res.converged = true;
      return res;
    }
    x.swap(trial);
    f = ft;
    if (stop(x)) {
      ++res.steps;
      return res;
    }
  }
  return res;
}

inline std::vector<double> push_inside_box(const SmoothConvexProgram& p, std::vector<double> x) {
  for (std::size_t v = 0; v < p.num_vars; ++v) {
    const double lo = p.lower[v], hi = p.upper[v];
    if (std::isfinite(lo) && std::isfinite(hi)) {
      if (!(hi > lo)) throw InvalidInput("solve_convex: empty box");
      if (x[v] > lo && x[v] < hi) continue;  // keep warm starts untouched
      const double margin = 1e-3 * (hi - lo);
      x[v] = std::clamp(x[v], lo + margin, hi - margin);
    } else if (std::isfinite(lo)) {
      if (!(x[v] > lo)) x[v] = lo + 1e-3 * std::max(1.0, std::abs(lo));
    } else if (std::isfinite(hi)) {
      if (!(x[v] < hi)) x[v] = hi - 1e-3 * std::max(1.0, std::abs(hi));
    }
  }
  return x;
}

/// Find a strictly feasible point by minimizing per-constraint slacks.
inline std::optional<std::vector<double>> phase_one(const SmoothConvexProgram& p, std::vector<double> x0,
                                                    const SolverOptions& opt, std::size_t& steps) {
  std::vector<std::size_t> viol;
  for (std::size_t r = 0; r < p.constraints.size(); ++r) {
    const auto& c = p.constraints[r];
    if (!c.in_domain(x0)) throw InvalidInput("solve_convex: start point outside a log-term domain");
    if (!(c.value(x0) < 0.0)) viol.push_back(r);
  }
  if (viol.empty()) return x0;
  const std::size_t n = p.num_vars, m = viol.size();
  SmoothConvexProgram aux(n + m);
  aux.lower = p.lower;
  aux.upper = p.upper;
  aux.lower.resize(n + m);
  aux.upper.resize(n + m, BarrierEngine::kInf);
  aux.constraints = p.constraints;
  if (!p.block_of.empty()) {
    aux.block_of = p.block_of;
    std::size_t nb = 0;
    for (auto b : p.block_of) nb = std::max(nb, b + 1);
    aux.block_of.resize(n + m, nb);
  }
  std::vector<double> x(n + m);
  std::copy(x0.begin(), x0.end(), x.begin());
  std::vector<double> scale(m);
  for (std::size_t a = 0; a < m; ++a) {
    const std::size_t r = viol[a];
    const double g = p.constraints[r].value(x0);
    scale[a] = std::max(1.0, std::abs(g));
    aux.lower[n + a] = -scale[a];
    x[n + a] = g + 0.5 * scale[a] + 1e-3;
    aux.constraints[r].linear.add(n + a, -1.0);
    aux.objective.linear.add(n + a, 1.0 / scale[a]);
    if (!p.block_of.empty()) {
      // Keep each slack in its constraint's block so local rows stay local.
      const auto& lin = p.constraints[r].linear.idx;
      if (!lin.empty()) aux.block_of[n + a] = p.block_of[lin.front()];
      else if (!p.constraints[r].terms.empty() && !p.constraints[r].terms.front().arg.idx.empty())
        aux.block_of[n + a] = p.block_of[p.constraints[r].terms.front().arg.idx.front()];
    }
  }
  BarrierEngine eng(aux);
  auto done = [&](const std::vector<double>& z) {
    for (std::size_t a = 0; a < m; ++a)
      if (!(z[n + a] < -1e-9 * scale[a])) return false;
    return true;
  };
  for (double mu = opt.mu0;; mu *= opt.mu_factor) {
    auto res = center(eng, x, mu, opt.max_newton_per_stage, 1e-12, done);
    steps += res.steps;
    if (done(x)) return std::vector<double>(x.begin(), x.begin() + n);
    if (mu <= opt.tau_kkt * 1e-3) break;
  }
  return std::nullopt;
}

}  // namespace detail

/// Log-barrier interior-point method with damped Newton steps.
inline NlpSolution solve_convex(const SmoothConvexProgram& p, const std::optional<std::vector<double>>& start,
                                const SolverOptions& opt = {}) {
  const std::size_t n = p.num_vars;
  if (n == 0) throw InvalidInput("solve_convex: no variables");
  NlpSolution out;
  std::vector<double> x0(n, 0.0);
  if (start) {
    if (start->size() != n) throw InvalidInput("solve_convex: start has wrong size");
    x0 = *start;
  } else {
    for (std::size_t v = 0; v < n; ++v) {
      const double lo = p.lower[v], hi = p.upper[v];
      if (std::isfinite(lo) && std::isfinite(hi)) x0[v] = 0.5 * (lo + hi);
      else if (std::isfinite(lo)) x0[v] = lo + 1.0;
      else if (std::isfinite(hi)) x0[v] = hi - 1.0;
    }
  }
  detail::BarrierEngine eng(p);
  std::vector<double> x = detail::push_inside_box(p, x0);
  if (!p.objective.in_domain(x)) throw InvalidInput("solve_convex: start outside objective domain");
  if (!eng.strictly_interior(x)) {
    auto feas = detail::phase_one(p, x, opt, out.newton_steps);
    if (!feas) {
      out.status = NlpStatus::infeasible;
      out.x = x;
      return out;
    }
    x = *feas;
    if (!eng.strictly_interior(x)) {
      out.status = NlpStatus::infeasible;
      out.x = x;
      return out;
    }
  }
  auto never = [](const std::vector<double>&) { return false; };
  bool all_converged = true;
  double mu = opt.mu0;
  for (;;) {
    const bool last = mu <= opt.tau_kkt;
    auto res = detail::center(eng, x, mu, opt.max_newton_per_stage, last ? 1e-20 : opt.stage_decrement_tol, never);
    out.newton_steps += res.steps;
    if (!res.converged) all_converged = false;
    if (last) break;
    mu *= opt.mu_factor;
  }
  out.mu = mu;
  out.x = x;
  out.objective = p.objective.value(x);
  // Multipliers from the central path; stationarity of the Lagrangian equals the barrier gradient.
  const std::size_t m = p.constraints.size();
  out.multipliers.assign(m, 0.0);
  std::vector<double> lag = p.objective.gradient(x);
  double gscale = 1.0;
  for (double g : lag) gscale = std::max(gscale, std::abs(g));
  for (std::size_t r = 0; r < m; ++r) {
    const double g = p.constraints[r].value(x);
    out.max_violation = std::max(out.max_violation, g);
    out.multipliers[r] = mu / (-g);
    const auto gr = p.constraints[r].gradient(x);
    for (std::size_t v = 0; v < n; ++v) lag[v] += out.multipliers[r] * gr[v];
  }
  out.lower_multipliers.assign(n, 0.0);
  out.upper_multipliers.assign(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    if (std::isfinite(p.lower[v])) out.lower_multipliers[v] = mu / (x[v] - p.lower[v]);
    if (std::isfinite(p.upper[v])) out.upper_multipliers[v] = mu / (p.upper[v] - x[v]);
    lag[v] += out.upper_multipliers[v] - out.lower_multipliers[v];
  }
  double stat = 0.0;
  for (double g : lag) stat = std::max(stat, std::abs(g));
  out.kkt_residual = std::max(stat / gscale, mu);
  const bool ok = all_converged && out.max_violation <= opt.tau_feas && out.kkt_residual <= opt.tau_kkt;
  out.status = ok ? NlpStatus::optimal : NlpStatus::max_iterations;
  return out;
}

}  // namespace cogrelay::convex
