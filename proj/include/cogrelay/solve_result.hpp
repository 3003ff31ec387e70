// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "cogrelay/rates.hpp"

namespace cogrelay {

enum class SolveStatus { optimal, converged, max_iterations, infeasible, fractional, failed };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iterations: return "max_iterations";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::fractional: return "fractional";
    case SolveStatus::failed: return "failed";
  }
  return "?";
}

/// Named numeric columns, one row per iteration.
struct IterationTrace {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void write_csv(std::ostream& os) const {
    for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
    os << '\n';
    const auto old = os.precision(12);
    for (const auto& r : rows) {
      for (std::size_t c = 0; c < r.size(); ++c) os << (c ? "," : "") << r[c];
      os << '\n';
    }
    os.precision(old);
  }
};

struct SolveResult {
  std::string method;
  SolveStatus status = SolveStatus::failed;
  Policy policy;
  double objective = std::numeric_limits<double>::quiet_NaN();  // weighted throughput of `policy`
  double bound = std::numeric_limits<double>::quiet_NaN();      // certified upper bound, if any
  double gap = std::numeric_limits<double>::quiet_NaN();
  double resolution = std::numeric_limits<double>::quiet_NaN(); // oracle gap bound L * delta
  std::size_t iterations = 0;
  double seconds = 0.0;
  IterationTrace trace;
  std::string message;

  bool has_policy() const {
    return status == SolveStatus::optimal || status == SolveStatus::converged ||
           status == SolveStatus::max_iterations || status == SolveStatus::fractional;
  }
};

}  // namespace cogrelay
