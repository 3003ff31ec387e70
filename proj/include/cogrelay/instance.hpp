// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cogrelay/common.hpp"

namespace cogrelay {

inline constexpr double kSpeedOfLight = 299792458.0;

/// Network geometry and radio parameters. Defaults follow the reference simulation setup.
struct Topology {
  double distance_pt_st = 255.0;  // L, meters between primary and secondary stations
  double d_ref = 10.0;
  double d_pt_max = 500.0;
  double d_st_max = 150.0;
  double pathloss_exponent = 3.6;
  double gain_pt_dBi = 10.0;
  double gain_st_dBi = 5.0;
  double carrier_hz = 2.0e9;
  double subcarrier_bw_hz = 78.0e3;
  double noise_dBm = -110.0;
  std::size_t num_pu = 2;
  std::size_t num_su = 2;
  std::size_t num_subcarriers = 8;

  double noise_watts() const { return std::pow(10.0, (noise_dBm - 30.0) / 10.0); }

  void validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(d_ref) || !positive(d_pt_max) || !positive(d_st_max) || !positive(carrier_hz) ||
        !positive(subcarrier_bw_hz))
      throw InvalidInput("topology: distances, carrier and bandwidth must be positive");
    if (!(d_ref < d_st_max && d_st_max <= d_pt_max))
      throw InvalidInput("topology: require d_ref < d_st_max <= d_pt_max");
    if (!std::isfinite(distance_pt_st) || distance_pt_st < d_ref)
      throw InvalidInput("topology: station separation must be at least d_ref");
    if (!(pathloss_exponent >= 2.0)) throw InvalidInput("topology: path-loss exponent must be >= 2");
    if (!std::isfinite(noise_dBm)) throw InvalidInput("topology: noise must be finite");
    if (num_pu == 0 || num_subcarriers == 0)
      throw InvalidInput("topology: need at least one primary user and one subcarrier");
  }

  /// Station separation L for a normalized distance (L - d_ref) / (d_pt_max - d_ref).
  double separation_for_normalized(double normalized) const {
    return d_ref + normalized * (d_pt_max - d_ref);
  }
  double normalized_separation() const { return (distance_pt_st - d_ref) / (d_pt_max - d_ref); }
};

/// Normalized channel gains |h|^2 / sigma^2, in 1/W.
struct ChannelState {
  Array2<double> f_direct;     // [k][i] primary station -> PU k
  std::vector<double> f_relay_hop;  // [i] primary station -> secondary station
  Array2<double> h_st_pu;      // [k][i] secondary station -> PU k
  Array2<double> g_st_su;      // [j][i] secondary station -> SU j

  ChannelState() = default;
  ChannelState(std::size_t K, std::size_t J, std::size_t N)
      : f_direct(K, N), f_relay_hop(N, 0.0), h_st_pu(K, N), g_st_su(J, N) {}

  std::size_t num_pu() const { return f_direct.rows(); }
  std::size_t num_su() const { return g_st_su.rows(); }
  std::size_t num_subcarriers() const { return f_relay_hop.size(); }

  bool operator==(const ChannelState&) const = default;

  void validate() const {
    const std::size_t N = num_subcarriers();
    if (f_direct.cols() != N || h_st_pu.rows() != num_pu() || h_st_pu.cols() != N ||
        g_st_su.cols() != N)
      throw InvalidInput("channels: array shapes disagree");
    auto check = [](const std::vector<double>& v) {
      for (double x : v)
        if (!std::isfinite(x) || x < 0.0) throw InvalidInput("channels: gains must be finite and >= 0");
    };
    check(f_direct.data());
    check(f_relay_hop);
    check(h_st_pu.data());
    check(g_st_su.data());
  }
};

/// One fading realization plus budgets, QoS targets and priority weights.
struct ProblemInstance {
  ChannelState channels;
  double p_max_pt = 10.0;
  double p_max_st = 10.0;
  std::vector<double> r_req;  // [k] bits/s/Hz
  double weight_pu = 2.0;
  double weight_su = 1.0;

  std::size_t K() const { return channels.num_pu(); }
  std::size_t J() const { return channels.num_su(); }
  std::size_t N() const { return channels.num_subcarriers(); }

  bool operator==(const ProblemInstance&) const = default;

  void validate() const {
    channels.validate();
    if (!(p_max_pt > 0.0) || !(p_max_st > 0.0) || !std::isfinite(p_max_pt) ||
        !std::isfinite(p_max_st))
      throw InvalidInput("instance: power budgets must be positive and finite");
    if (r_req.size() != K()) throw InvalidInput("instance: r_req must have one entry per PU");
    for (double r : r_req)
      if (!(r >= 0.0) || !std::isfinite(r)) throw InvalidInput("instance: r_req must be >= 0");
    if (!(weight_pu >= 0.0) || !(weight_su >= 0.0)) throw InvalidInput("instance: weights must be >= 0");
  }
};

/// Distances of every user to the stations that serve or reach it.
struct UserLayout {
  std::vector<double> pu_distance;     // from primary station
  std::vector<double> pu_distance_st;  // from secondary station
  std::vector<double> su_distance;     // from secondary station
  bool operator==(const UserLayout&) const = default;
};

/// Scalar settings applied on top of the generated channels.
struct InstanceOverrides {
  double p_max_pt = 10.0;
  double p_max_st = 10.0;
  double r_req = 1.0;  // same target for every PU
  double weight_pu = 2.0;
  double weight_su = 1.0;
};

/// Users are planar points, uniform in radius and angle around their serving station.
/// The primary station sits at the origin, the secondary station at (L, 0).
inline UserLayout generate_layout(const Topology& topo, std::uint64_t seed) {
  topo.validate();
  std::mt19937_64 eng(seed);
  UserLayout out;
  out.pu_distance.resize(topo.num_pu);
  out.pu_distance_st.resize(topo.num_pu);
  out.su_distance.resize(topo.num_su);
  for (std::size_t k = 0; k < topo.num_pu; ++k) {
    const double r = uniform_in(eng, topo.d_ref, topo.d_pt_max);
    const double theta = uniform_in(eng, 0.0, 2.0 * std::numbers::pi);
    const double x = r * std::cos(theta) - topo.distance_pt_st;
    const double y = r * std::sin(theta);
    out.pu_distance[k] = r;
    out.pu_distance_st[k] = std::max(topo.d_ref, std::hypot(x, y));
  }
  for (std::size_t j = 0; j < topo.num_su; ++j) {
    out.su_distance[j] = uniform_in(eng, topo.d_ref, topo.d_st_max);
    (void)uniform01(eng);  // angle draw; only the radius matters for SU links
  }
  return out;
}

/// Free-space anchor at d_ref followed by an exponent-alpha decay.
inline double friis_reference_factor(const Topology& topo) {
  const double a = kSpeedOfLight / (4.0 * std::numbers::pi * topo.carrier_hz * topo.d_ref);
  return a * a;
}

inline double pathloss_gain(double distance, const Topology& topo, double antenna_gain_dBi) {
  if (!(distance >= topo.d_ref)) throw InvalidInput("pathloss_gain: distance inside reference radius");
  return std::pow(10.0, antenna_gain_dBi / 10.0) * friis_reference_factor(topo) *
         std::pow(distance / topo.d_ref, -topo.pathloss_exponent);
}

/// Rayleigh block fading (|h|^2 ~ Exp(1)) drawn independently per link and subcarrier.
/// Each link uses the transmitting station's antenna gain.
inline ProblemInstance generate_instance(const Topology& topo, const UserLayout& layout,
                                         std::uint64_t seed, const InstanceOverrides& ov = {}) {
  topo.validate();
  const std::size_t K = topo.num_pu, J = topo.num_su, N = topo.num_subcarriers;
  if (layout.pu_distance.size() != K || layout.pu_distance_st.size() != K ||
      layout.su_distance.size() != J)
    throw InvalidInput("generate_instance: layout does not match topology");
  const double sigma2 = topo.noise_watts();
  std::mt19937_64 eng(seed);
  ProblemInstance inst;
  inst.channels = ChannelState(K, J, N);
  const double g_relay = pathloss_gain(topo.distance_pt_st, topo, topo.gain_pt_dBi);
  for (std::size_t i = 0; i < N; ++i) inst.channels.f_relay_hop[i] = g_relay * exponential1(eng) / sigma2;
  for (std::size_t k = 0; k < K; ++k) {
    const double gd = pathloss_gain(layout.pu_distance[k], topo, topo.gain_pt_dBi);
    const double gs = pathloss_gain(layout.pu_distance_st[k], topo, topo.gain_st_dBi);
    for (std::size_t i = 0; i < N; ++i) inst.channels.f_direct(k, i) = gd * exponential1(eng) / sigma2;
    for (std::size_t i = 0; i < N; ++i) inst.channels.h_st_pu(k, i) = gs * exponential1(eng) / sigma2;
  }
  for (std::size_t j = 0; j < J; ++j) {
    const double gs = pathloss_gain(layout.su_distance[j], topo, topo.gain_st_dBi);
    for (std::size_t i = 0; i < N; ++i) inst.channels.g_st_su(j, i) = gs * exponential1(eng) / sigma2;
  }
  inst.p_max_pt = ov.p_max_pt;
  inst.p_max_st = ov.p_max_st;
  inst.r_req.assign(K, ov.r_req);
  inst.weight_pu = ov.weight_pu;
  inst.weight_su = ov.weight_su;
  inst.validate();
  return inst;
}

/// Layout and fading from one realization seed, using independent derived streams.
inline ProblemInstance generate_realization(const Topology& topo, std::uint64_t seed,
                                            const InstanceOverrides& ov = {}) {
  const UserLayout layout = generate_layout(topo, derive_seed(seed, 1));
  return generate_instance(topo, layout, derive_seed(seed, 2), ov);
}

namespace detail {

inline void write_values(std::ostream& os, const char* key, const std::vector<double>& v) {
  os << key;
  for (double x : v) os << ' ' << x;
  os << '\n';
}

inline std::vector<double> read_values(std::istream& is, const std::string& key, std::size_t n) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidInput("missing line '" + key + "'");
  std::istringstream ls(line);
  std::string got;
  ls >> got;
  if (got != key) throw InvalidInput("expected '" + key + "', found '" + got + "'");
  std::vector<double> v(n);
  for (auto& x : v)
    if (!(ls >> x)) throw InvalidInput("too few values on line '" + key + "'");
  double extra;
  if (ls >> extra) throw InvalidInput("too many values on line '" + key + "'");
  return v;
}

}  // namespace detail

/// Text format: a header line with dimensions and scalars, then one row-major line per array.
inline void write_instance(std::ostream& os, const ProblemInstance& inst) {
  const auto old_prec = os.precision(std::numeric_limits<double>::max_digits10);
  os << "cogrelay-instance 1 " << inst.K() << ' ' << inst.J() << ' ' << inst.N() << ' '
     << inst.p_max_pt << ' ' << inst.p_max_st << ' ' << inst.weight_pu << ' ' << inst.weight_su
     << '\n';
  detail::write_values(os, "r_req", inst.r_req);
  detail::write_values(os, "f_direct", inst.channels.f_direct.data());
  detail::write_values(os, "f_relay_hop", inst.channels.f_relay_hop);
  detail::write_values(os, "h_st_pu", inst.channels.h_st_pu.data());
  detail::write_values(os, "g_st_su", inst.channels.g_st_su.data());
  os.precision(old_prec);
}

inline ProblemInstance read_instance(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidInput("instance: empty input");
  std::istringstream hs(line);
  std::string magic;
  int version = 0;
  std::size_t K = 0, J = 0, N = 0;
  ProblemInstance inst;
  if (!(hs >> magic >> version >> K >> J >> N >> inst.p_max_pt >> inst.p_max_st >>
        inst.weight_pu >> inst.weight_su) ||
      magic != "cogrelay-instance" || version != 1)
    throw InvalidInput("instance: bad header");
  inst.channels = ChannelState(K, J, N);
  inst.r_req = detail::read_values(is, "r_req", K);
  inst.channels.f_direct.data() = detail::read_values(is, "f_direct", K * N);
  inst.channels.f_relay_hop = detail::read_values(is, "f_relay_hop", N);
  inst.channels.h_st_pu.data() = detail::read_values(is, "h_st_pu", K * N);
  inst.channels.g_st_su.data() = detail::read_values(is, "g_st_su", J * N);
  inst.validate();
  return inst;
}

}  // namespace cogrelay
