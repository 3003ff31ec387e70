// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cogrelay/harness/config.hpp"
#include "cogrelay/harness/sweep.hpp"

namespace cogrelay::harness {

/// Average ranks (1-based), ties share the mean rank.
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t a = 0; a < idx.size();) {
    std::size_t b = a;
    while (b + 1 < idx.size() && v[idx[b + 1]] == v[idx[a]]) ++b;
    for (std::size_t c = a; c <= b; ++c) r[idx[c]] = 0.5 * double(a + b) + 1.0;
    a = b + 1;
  }
  return r;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = double(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxx > 0.0 && syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0;
}

struct SpearmanResult {
  double rho = 0.0;
  double p_value = 1.0;  // two-sided
  bool exact = false;
};

/// Spearman rank correlation. Up to 10 points the two-sided p-value comes from all permutations
/// of the ranks; beyond that from the normal approximation sqrt(n-1) * rho.
inline SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InvalidInput("spearman: length mismatch");
  SpearmanResult out;
  const std::size_t n = x.size();
  if (n < 3) return out;
  const auto rx = ranks(x);
  auto ry = ranks(y);
  out.rho = pearson(rx, ry);
  if (n <= 10) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<double> py(n);
    std::size_t total = 0, extreme = 0;
    do {
      for (std::size_t i = 0; i < n; ++i) py[i] = ry[perm[i]];
      ++total;
      if (std::abs(pearson(rx, py)) >= std::abs(out.rho) - 1e-12) ++extreme;
    } while (std::next_permutation(perm.begin(), perm.end()));
    out.p_value = double(extreme) / double(total);
    out.exact = true;
  } else {
    const double z = std::abs(out.rho) * std::sqrt(double(n - 1));
    out.p_value = std::erfc(z / std::sqrt(2.0));
  }
  return out;
}

/// One metrics.csv row as read back.
struct MetricRecord {
  double value = 0.0;
  std::string scheme;
  double avg_pu = 0.0, avg_su = 0.0, avg_user = 0.0, avg_weighted = 0.0, feasibility = 0.0, resolution = 0.0;
  std::size_t realizations = 0;
};

struct MetricTable {
  std::string axis;
  std::vector<MetricRecord> records;
};

inline MetricTable read_metrics_csv(std::istream& is) {
  MetricTable t;
  std::string line;
  if (!std::getline(is, line)) throw InvalidInput("metrics: empty file");
  const auto header = detail::split_list(line);
  if (header.size() != 9 || header[1] != "scheme") throw InvalidInput("metrics: unexpected header");
  t.axis = header[0];
  parse_axis(t.axis);
  while (std::getline(is, line)) {
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 9) throw InvalidInput("metrics: row with " + std::to_string(f.size()) + " fields");
    MetricRecord r;
    r.value = detail::to_double("value", f[0]);
    r.scheme = f[1];
    r.avg_pu = detail::to_double("avg_pu", f[2]);
    r.avg_su = detail::to_double("avg_su", f[3]);
    r.avg_user = detail::to_double("avg_user", f[4]);
    r.avg_weighted = detail::to_double("avg_weighted", f[5]);
    r.feasibility = detail::to_double("feasibility", f[6]);
    r.resolution = detail::to_double("resolution", f[7]);
    r.realizations = detail::to_count("realizations", f[8]);
    t.records.push_back(r);
  }
  return t;
}

inline MetricTable to_table(SweepAxis axis, const std::vector<MetricRow>& rows) {
  std::stringstream ss;
  write_metrics_csv(ss, axis, rows);
  return read_metrics_csv(ss);
}

/// Merge tables from several sweeps. They must share the axis and the set of sweep values;
/// a (value, scheme) cell may appear only once.
inline MetricTable merge_tables(const std::vector<MetricTable>& tables) {
  if (tables.empty()) throw InvalidInput("compare: no inputs");
  MetricTable out;
  out.axis = tables.front().axis;
  auto values_of = [](const MetricTable& t) {
    std::vector<double> v;
    for (const auto& r : t.records) v.push_back(r.value);
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };
  const auto values = values_of(tables.front());
  std::map<std::pair<double, std::string>, bool> seen;
  for (const auto& t : tables) {
    if (t.axis != out.axis) throw InvalidInput("compare: sweeps over different axes (" + out.axis + ", " + t.axis + ")");
    if (values_of(t) != values) throw InvalidInput("compare: sweeps over different grids");
    for (const auto& r : t.records) {
      if (!seen.emplace(std::make_pair(r.value, r.scheme), true).second)
        throw InvalidInput("compare: scheme " + r.scheme + " appears twice at one sweep value");
      out.records.push_back(r);
    }
  }
  return out;
}

struct PointComparison {
  double value = 0.0;
  std::vector<std::string> order;             // by average weighted throughput, best first
  std::map<std::string, double> ratio;        // weighted throughput relative to the reference
  std::string reference;                      // optimal if present, else the best scheme
  std::optional<bool> expected_order;         // optimal >= sca >= baseline1 >= baseline2 over present schemes
  std::map<std::string, double> gap_to_oracle;  // |optimal - oracle| when both present
  double oracle_resolution = 0.0;
};

struct TrendResult {
  std::string scheme;
  SpearmanResult pu, su, user;
};

struct Comparison {
  std::string axis;
  std::vector<PointComparison> points;
  std::vector<TrendResult> trends;
};

inline Comparison compare(const MetricTable& t) {
  Comparison c;
  c.axis = t.axis;
  std::vector<double> values;
  std::vector<std::string> schemes;
  for (const auto& r : t.records) {
    if (std::find(values.begin(), values.end(), r.value) == values.end()) values.push_back(r.value);
    if (std::find(schemes.begin(), schemes.end(), r.scheme) == schemes.end()) schemes.push_back(r.scheme);
  }
  std::sort(values.begin(), values.end());
  auto find = [&](double v, const std::string& s) -> const MetricRecord* {
    for (const auto& r : t.records)
      if (r.value == v && r.scheme == s) return &r;
    return nullptr;
  };
  const std::vector<std::string> canonical = {"optimal", "sca", "baseline1", "baseline2"};
  for (double v : values) {
    PointComparison p;
    p.value = v;
    std::vector<const MetricRecord*> here;
    for (const auto& s : schemes)
      if (auto r = find(v, s)) here.push_back(r);
    std::stable_sort(here.begin(), here.end(), [](auto a, auto b) { return a->avg_weighted > b->avg_weighted; });
    for (auto r : here) p.order.push_back(r->scheme);
    const MetricRecord* ref = find(v, "optimal");
    if (!ref && !here.empty()) ref = here.front();
    if (ref) {
      p.reference = ref->scheme;
      for (auto r : here) p.ratio[r->scheme] = ref->avg_weighted > 0.0 ? r->avg_weighted / ref->avg_weighted : 1.0;
    }
    std::vector<const MetricRecord*> chain;
    for (const auto& s : canonical)
      if (auto r = find(v, s)) chain.push_back(r);
    if (chain.size() >= 2) {
      bool ok = true;
      for (std::size_t n = 1; n < chain.size(); ++n) ok = ok && chain[n - 1]->avg_weighted >= chain[n]->avg_weighted;
      p.expected_order = ok;
    }
    auto opt = find(v, "optimal");
    auto orc = find(v, "oracle");
    if (opt && orc) {
      p.gap_to_oracle["optimal"] = std::abs(opt->avg_weighted - orc->avg_weighted);
      p.oracle_resolution = orc->resolution;
    }
    c.points.push_back(std::move(p));
  }
  for (const auto& s : schemes) {
    std::vector<double> x, pu, su, user;
    for (double v : values)
      if (auto r = find(v, s)) x.push_back(v), pu.push_back(r->avg_pu), su.push_back(r->avg_su), user.push_back(r->avg_user);
    c.trends.push_back({s, spearman(x, pu), spearman(x, su), spearman(x, user)});
  }
  return c;
}

inline std::string format_comparison(const Comparison& c) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "axis: " << c.axis << "\n\n";
  for (const auto& p : c.points) {
    os << c.axis << " = " << p.value << "\n  order:";
    for (const auto& s : p.order) os << ' ' << s;
    os << "\n  relative to " << p.reference << ':';
    for (const auto& s : p.order) os << ' ' << s << '=' << p.ratio.at(s);
    if (p.expected_order) os << "\n  optimal>=sca>=baseline1>=baseline2: " << (*p.expected_order ? "yes" : "no");
    for (const auto& [s, g] : p.gap_to_oracle)
      os << "\n  |" << s << " - oracle| = " << g << " (oracle resolution " << std::setprecision(3) << std::scientific
         << p.oracle_resolution << std::fixed << std::setprecision(4) << ')';
    os << '\n';
  }
  os << "\ntrends (Spearman rho, two-sided p):\n";
  for (const auto& t : c.trends) {
    os << "  " << std::left << std::setw(10) << t.scheme << std::right << " pu " << std::setw(7) << t.pu.rho
       << " (p=" << t.pu.p_value << ")  su " << std::setw(7) << t.su.rho << " (p=" << t.su.p_value << ")  user "
       << std::setw(7) << t.user.rho << " (p=" << t.user.p_value << ")\n";
  }
  return os.str();
}

/// Text table comparing one or more metrics.csv files from run_sweep.
inline std::string compare_report(const std::vector<std::string>& paths) {
  std::vector<MetricTable> tables;
  for (const auto& p : paths) {
    std::ifstream in(p);
    if (!in) throw InvalidInput("compare: cannot open " + p);
    tables.push_back(read_metrics_csv(in));
  }
  return format_comparison(compare(merge_tables(tables)));
}

}  // namespace cogrelay::harness
