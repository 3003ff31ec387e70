// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cogrelay/common.hpp"
#include "cogrelay/instance.hpp"

namespace cogrelay::harness {

enum class Scheme { optimal, sca, baseline1, baseline2, oracle };
enum class SweepAxis { normalized_distance, num_users, qos };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::optimal: return "optimal";
    case Scheme::sca: return "sca";
    case Scheme::baseline1: return "baseline1";
    case Scheme::baseline2: return "baseline2";
    case Scheme::oracle: return "oracle";
  }
  return "?";
}

inline const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::normalized_distance: return "normalized_distance";
    case SweepAxis::num_users: return "num_users";
    case SweepAxis::qos: return "qos";
  }
  return "?";
}

inline Scheme parse_scheme(const std::string& s) {
  for (auto v : {Scheme::optimal, Scheme::sca, Scheme::baseline1, Scheme::baseline2, Scheme::oracle})
    if (s == to_string(v)) return v;
  throw InvalidInput("unknown scheme '" + s + "'");
}

inline SweepAxis parse_axis(const std::string& s) {
  for (auto v : {SweepAxis::normalized_distance, SweepAxis::num_users, SweepAxis::qos})
    if (s == to_string(v)) return v;
  throw InvalidInput("unknown sweep axis '" + s + "'");
}

struct ExperimentConfig {
  Topology topology;
  InstanceOverrides overrides;
  std::vector<Scheme> schemes{Scheme::optimal, Scheme::sca, Scheme::baseline1, Scheme::baseline2};
  SweepAxis axis = SweepAxis::normalized_distance;
  std::vector<double> values{0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  std::size_t realizations = 50;
  std::uint64_t seed = 1;
  std::string output_dir = "sweep_out";
  std::size_t threads = 1;
  double epsilon = 1e-2;            // polyblock tolerance
  std::size_t oracle_levels = 16;

  void validate() const {
    topology.validate();
    if (realizations == 0) throw InvalidInput("config: run.realizations must be >= 1");
    if (values.empty()) throw InvalidInput("config: sweep.values is empty");
    if (schemes.empty()) throw InvalidInput("config: run.schemes is empty");
    if (threads == 0) throw InvalidInput("config: run.threads must be >= 1");
    if (!(epsilon > 0.0)) throw InvalidInput("config: optimal.epsilon must be positive");
    for (double v : values) {
      switch (axis) {
        case SweepAxis::normalized_distance:
          if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("config: normalized distances must lie in [0, 1]");
          break;
        case SweepAxis::num_users:
          if (!(v >= 1.0) || v != std::floor(v)) throw InvalidInput("config: user counts must be integers >= 1");
          break;
        case SweepAxis::qos:
          if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidInput("config: QoS targets must be >= 0");
          break;
      }
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size()) throw InvalidInput("config: " + key + " expects a number, got '" + v + "'");
  return x;
}

inline std::uint64_t to_count(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (!(x >= 0.0) || x != std::floor(x)) throw InvalidInput("config: " + key + " expects a non-negative integer");
  return static_cast<std::uint64_t>(x);
}

}  // namespace detail

/// Every accepted key with its default, as printed by `--help` and echoed into manifests.
inline std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& c) {
  auto num = [](double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
    return std::string(buf, r.ptr);
  };
  std::string schemes, values;
  for (auto s : c.schemes) schemes += (schemes.empty() ? "" : ",") + std::string(to_string(s));
  for (double v : c.values) values += (values.empty() ? "" : ",") + num(v);
  const auto& t = c.topology;
  const auto& o = c.overrides;
  return {
      {"topology.distance_pt_st", num(t.distance_pt_st)},
      {"topology.d_ref", num(t.d_ref)},
      {"topology.d_pt_max", num(t.d_pt_max)},
      {"topology.d_st_max", num(t.d_st_max)},
      {"topology.pathloss_exponent", num(t.pathloss_exponent)},
      {"topology.gain_pt_dBi", num(t.gain_pt_dBi)},
      {"topology.gain_st_dBi", num(t.gain_st_dBi)},
      {"topology.carrier_hz", num(t.carrier_hz)},
      {"topology.subcarrier_bw_hz", num(t.subcarrier_bw_hz)},
      {"topology.noise_dBm", num(t.noise_dBm)},
      {"topology.num_pu", std::to_string(t.num_pu)},
      {"topology.num_su", std::to_string(t.num_su)},
      {"topology.num_subcarriers", std::to_string(t.num_subcarriers)},
      {"instance.p_max_pt", num(o.p_max_pt)},
      {"instance.p_max_st", num(o.p_max_st)},
      {"instance.r_req", num(o.r_req)},
      {"instance.weight_pu", num(o.weight_pu)},
      {"instance.weight_su", num(o.weight_su)},
      {"sweep.axis", to_string(c.axis)},
      {"sweep.values", values},
      {"run.schemes", schemes},
      {"run.realizations", std::to_string(c.realizations)},
      {"run.seed", std::to_string(c.seed)},
      {"run.output", c.output_dir},
      {"run.threads", std::to_string(c.threads)},
      {"optimal.epsilon", num(c.epsilon)},
      {"oracle.levels", std::to_string(c.oracle_levels)},
  };
}

inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& v) {
  using detail::to_count;
  using detail::to_double;
  auto& t = c.topology;
  auto& o = c.overrides;
  const std::map<std::string, double*> reals = {
      {"topology.distance_pt_st", &t.distance_pt_st}, {"topology.d_ref", &t.d_ref},
      {"topology.d_pt_max", &t.d_pt_max},             {"topology.d_st_max", &t.d_st_max},
      {"topology.pathloss_exponent", &t.pathloss_exponent},
      {"topology.gain_pt_dBi", &t.gain_pt_dBi},       {"topology.gain_st_dBi", &t.gain_st_dBi},
      {"topology.carrier_hz", &t.carrier_hz},         {"topology.subcarrier_bw_hz", &t.subcarrier_bw_hz},
      {"topology.noise_dBm", &t.noise_dBm},           {"instance.p_max_pt", &o.p_max_pt},
      {"instance.p_max_st", &o.p_max_st},             {"instance.r_req", &o.r_req},
      {"instance.weight_pu", &o.weight_pu},           {"instance.weight_su", &o.weight_su},
      {"optimal.epsilon", &c.epsilon}};
  if (auto it = reals.find(key); it != reals.end()) {
    *it->second = to_double(key, v);
    return;
  }
  if (key == "topology.num_pu") t.num_pu = to_count(key, v);
  else if (key == "topology.num_su") t.num_su = to_count(key, v);
  else if (key == "topology.num_subcarriers") t.num_subcarriers = to_count(key, v);
  else if (key == "sweep.axis") c.axis = parse_axis(v);
  else if (key == "sweep.values") {
    c.values.clear();
    for (const auto& s : detail::split_list(v)) c.values.push_back(to_double(key, s));
  } else if (key == "run.schemes") {
    c.schemes.clear();
    for (const auto& s : detail::split_list(v)) c.schemes.push_back(parse_scheme(s));
  } else if (key == "run.realizations") c.realizations = to_count(key, v);
  else if (key == "run.seed") c.seed = to_count(key, v);
  else if (key == "run.output") c.output_dir = v;
  else if (key == "run.threads") c.threads = to_count(key, v);
  else if (key == "oracle.levels") c.oracle_levels = to_count(key, v);
  else throw InvalidInput("config: unknown key '" + key + "'");
}

/// Flat `key = value` text. `[section]` lines prefix the following keys with `section.`;
/// `#` starts a comment.
inline ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig c;
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw InvalidInput("config line " + std::to_string(lineno) + ": unterminated section");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidInput("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = detail::trim(line.substr(0, eq));
    if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
    set_config_value(c, key, detail::trim(line.substr(eq + 1)));
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("config: cannot open " + path);
  return parse_config(in);
}

inline void write_config(std::ostream& os, const ExperimentConfig& c) {
  for (const auto& [k, v] : config_entries(c)) os << k << " = " << v << '\n';
}

}  // namespace cogrelay::harness
