#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "bdris/csv.hpp"
#include "bdris/error.hpp"
#include "bdris/manifold.hpp"
#include "bdris/random.hpp"

namespace bdris::channel {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

inline constexpr double kSpeedOfLight = 299792458.0;

struct PathLossModel {
  double reference_loss_db = -30.0;
  double reference_distance_m = 1.0;
  double exponent_device_bs = 3.5;
  double exponent_device_ris = 2.2;
  double exponent_bs_ris = 2.0;

  void validate() const {
    if (!(reference_distance_m > 0.0))
      throw InvalidInput("PathLossModel: reference_distance_m must be > 0");
    for (double e : {exponent_device_bs, exponent_device_ris, exponent_bs_ris})
      if (!(e >= 1.0)) throw InvalidInput("PathLossModel: path loss exponents must be >= 1");
  }
};

// Axis-aligned rectangle in the device plane (z = 0).
struct Rect {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 25.0;
  double y_max = 25.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  bool contains(const Vec2& p) const {
    return p.x() >= x_min && p.x() <= x_max && p.y() >= y_min && p.y() <= y_max;
  }
  Vec2 clamp(const Vec2& p) const {
    return {std::clamp(p.x(), x_min, x_max), std::clamp(p.y(), y_min, y_max)};
  }
};

/// BS at the origin and the surface 100 m away on the x axis. The 25 × 25 m
/// device area is centred on the surface's x coordinate with its near edge
/// 5 m from the surface.
struct NetworkGeometry {
  Vec3 bs_position{0.0, 0.0, 0.0};
  Vec3 ris_position{100.0, 0.0, 0.0};
  Rect device_area{87.5, 5.0, 112.5, 30.0};
  double bs_ris_distance_m = 100.0;
  double carrier_hz = 2.4e9;

  void validate() const {
    if (std::abs((bs_position - ris_position).norm() - bs_ris_distance_m) > 1e-6)
      throw InvalidInput("NetworkGeometry: |bs - ris| differs from bs_ris_distance_m");
    if (!(device_area.width() > 0.0 && device_area.height() > 0.0))
      throw InvalidInput("NetworkGeometry: device area must have positive side lengths");
    if (!(carrier_hz > 0.0)) throw InvalidInput("NetworkGeometry: carrier_hz must be > 0");
  }
  double wavelength_m() const { return kSpeedOfLight / carrier_hz; }
};

/// Device links are LoS with probability `los_probability` and then Rician with
/// `device_los_rician_k_db`; otherwise they use `device_nlos_rician_k_db`
/// (−∞ dB is Rayleigh).
struct FadingModel {
  double bs_ris_rician_k_db = 10.0;
  double device_los_rician_k_db = 10.0;
  double device_nlos_rician_k_db = -std::numeric_limits<double>::infinity();
  double los_probability = 0.5;

  void validate() const {
    if (!(los_probability >= 0.0 && los_probability <= 1.0))
      throw InvalidInput("FadingModel: los_probability must lie in [0, 1]");
    for (double k : {bs_ris_rician_k_db, device_los_rician_k_db, device_nlos_rician_k_db})
      if (std::isnan(k)) throw InvalidInput("FadingModel: K-factor is NaN");
  }
};

struct SpeedRange {
  double min_mps = 0.5;
  double max_mps = 2.0;
};

struct Device {
  Vec2 position{0.0, 0.0};
  Vec2 waypoint{0.0, 0.0};
  double speed_mps = 0.0;
};

// Transmit-side scalars of the downlink; ρ = 10^(tx_snr_db / 10).
struct LinkBudget {
  Index num_bs_antennas = 4;
  double noise_power_dbm = -80.0;
  double tx_snr_db = 18.0;

  double tx_power_dbm() const { return noise_power_dbm + tx_snr_db; }
};

/// Channels of one location snapshot. Column ℓ of `direct` is a_ℓ (M), column
/// ℓ of `ris_device` is b_ℓ (N), and `bs_ris` is C (N × M), so that device ℓ
/// sees h_ℓ† = a_ℓ† + b_ℓ†ΘC.
struct ChannelRealization {
  CMatrix direct;      // M × L
  CMatrix ris_device;  // N × L
  CMatrix bs_ris;      // N × M
  double noise_power_dbm = -80.0;
  double tx_snr_db = 18.0;

  Index num_devices() const { return direct.cols(); }
  Index num_bs_antennas() const { return direct.rows(); }
  Index num_elements() const { return ris_device.rows(); }

  void validate() const {
    const Index l = direct.cols(), m = direct.rows(), n = ris_device.rows();
    if (l < 1 || m < 1 || n < 1)
      throw InvalidInput("ChannelRealization: L, M and N must all be >= 1");
    if (ris_device.cols() != l || bs_ris.rows() != n || bs_ris.cols() != m)
      throw DimensionMismatch("ChannelRealization: inconsistent A/B/C dimensions");
    if (!direct.allFinite() || !ris_device.allFinite() || !bs_ris.allFinite())
      throw InvalidInput("ChannelRealization: non-finite channel entry");
  }
};

/// reference_loss_db − 10·exponent·log10(d / d0).
inline double path_loss_db(double distance_m, double exponent, const PathLossModel& model = {}) {
  if (!(distance_m >= model.reference_distance_m))
    throw BelowReferenceDistance("path_loss_db: distance " + std::to_string(distance_m) +
                                 " m is below the reference distance");
  return model.reference_loss_db -
         10.0 * exponent * std::log10(distance_m / model.reference_distance_m);
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

/// Unit-average-power Rician samples: √(K/(K+1))·los_phase + √(1/(K+1))·CN(0,1).
/// K = +∞ dB gives the deterministic LoS term; K = −∞ dB is Rayleigh.
inline CMatrix sample_fading(Index rows, Index cols, double rician_k_db, Rng& rng,
                             Complex los_phase = {1.0, 0.0}) {
  if (rows < 1 || cols < 1) throw InvalidInput("sample_fading: rows and cols must be >= 1");
  double los_w = 0.0, nlos_w = 1.0;
  if (rician_k_db == std::numeric_limits<double>::infinity()) {
    los_w = 1.0;
    nlos_w = 0.0;
  } else if (rician_k_db != -std::numeric_limits<double>::infinity()) {
    const double k = db_to_linear(rician_k_db);
    los_w = std::sqrt(k / (k + 1.0));
    nlos_w = std::sqrt(1.0 / (k + 1.0));
  }
  CMatrix h(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) {
      const Complex scatter = nlos_w > 0.0 ? complex_normal(rng) : Complex{};
      h(i, j) = los_w * los_phase + nlos_w * scatter;
    }
  return h;
}

namespace detail {

inline Vec3 lift(const Vec2& p) { return {p.x(), p.y(), 0.0}; }

inline Complex propagation_phase(double distance_m, double wavelength_m) {
  const double phi = -2.0 * std::numbers::pi * std::fmod(distance_m / wavelength_m, 1.0);
  return std::polar(1.0, phi);
}

inline double amplitude(double distance_m, double exponent, const PathLossModel& pl) {
  return std::sqrt(db_to_linear(path_loss_db(distance_m, exponent, pl)));
}

}  // namespace detail

/// Source–surface backbone C (N × M).
inline CMatrix sample_bs_ris(const NetworkGeometry& geo, const PathLossModel& pl,
                             const FadingModel& fading, Index n, Index m, Rng& rng) {
  const double d = (geo.bs_position - geo.ris_position).norm();
  const Complex phase = detail::propagation_phase(d, geo.wavelength_m());
  return detail::amplitude(d, pl.exponent_bs_ris, pl) *
         sample_fading(n, m, fading.bs_ris_rician_k_db, rng, phase);
}

// One device link of `len` entries at distance d; LoS drawn per link.
inline CVector sample_device_link(double d, double exponent, Index len, const NetworkGeometry& geo,
                                  const PathLossModel& pl, const FadingModel& fading, Rng& rng) {
  const bool los = std::bernoulli_distribution(fading.los_probability)(rng);
  const double k_db = los ? fading.device_los_rician_k_db : fading.device_nlos_rician_k_db;
  const Complex phase = detail::propagation_phase(d, geo.wavelength_m());
  return detail::amplitude(d, exponent, pl) * sample_fading(len, 1, k_db, rng, phase).col(0);
}

/// Fills A and B for the given devices against an existing backbone C.
/// Direct and surface links draw from separate generators (they may alias).
inline ChannelRealization sample_device_links(const NetworkGeometry& geo,
                                              const std::vector<Device>& devices,
                                              const PathLossModel& pl, const FadingModel& fading,
                                              const LinkBudget& budget, CMatrix bs_ris,
                                              Rng& direct_rng, Rng& ris_rng) {
  if (devices.empty()) throw InvalidInput("generate_realization: at least one device required");
  const Index l = static_cast<Index>(devices.size());
  const Index n = bs_ris.rows();
  const Index m = budget.num_bs_antennas;
  if (bs_ris.cols() != m) throw DimensionMismatch("sample_device_links: C has wrong column count");
  ChannelRealization out;
  out.direct.resize(m, l);
  out.ris_device.resize(n, l);
  for (Index k = 0; k < l; ++k) {
    const Vec3 p = detail::lift(devices[static_cast<std::size_t>(k)].position);
    out.direct.col(k) = sample_device_link((p - geo.bs_position).norm(), pl.exponent_device_bs, m,
                                           geo, pl, fading, direct_rng);
    out.ris_device.col(k) = sample_device_link((p - geo.ris_position).norm(),
                                               pl.exponent_device_ris, n, geo, pl, fading, ris_rng);
  }
  out.bs_ris = std::move(bs_ris);
  out.noise_power_dbm = budget.noise_power_dbm;
  out.tx_snr_db = budget.tx_snr_db;
  out.validate();
  return out;
}

/// Large-scale path loss times small-scale fading for every link of one
/// snapshot, exponents matched to link type.
inline ChannelRealization generate_realization(const NetworkGeometry& geo,
                                               const std::vector<Device>& devices,
                                               const PathLossModel& pl, const FadingModel& fading,
                                               const LinkBudget& budget, Index n, Rng& rng) {
  if (n < 1) throw InvalidInput("generate_realization: N must be >= 1");
  if (devices.empty()) throw InvalidInput("generate_realization: at least one device required");
  if (budget.num_bs_antennas < 1) throw InvalidInput("generate_realization: M must be >= 1");
  pl.validate();
  fading.validate();
  CMatrix c = sample_bs_ris(geo, pl, fading, n, budget.num_bs_antennas, rng);
  return sample_device_links(geo, devices, pl, fading, budget, std::move(c), rng, rng);
}

inline Vec2 uniform_point(const Rect& area, Rng& rng) {
  return {uniform(rng, area.x_min, area.x_max), uniform(rng, area.y_min, area.y_max)};
}

inline double uniform_speed(const SpeedRange& range, Rng& rng) {
  if (range.max_mps <= range.min_mps) return range.min_mps;
  return uniform(rng, range.min_mps, range.max_mps);
}

inline Device random_device(const Rect& area, const SpeedRange& speeds, Rng& rng) {
  Device d;
  d.position = uniform_point(area, rng);
  d.waypoint = uniform_point(area, rng);
  d.speed_mps = uniform_speed(speeds, rng);
  return d;
}

/// One random-waypoint step of length speed·dt toward the current waypoint.
/// On arrival the device stops at the waypoint and draws a fresh waypoint and
/// speed (zero pause time).
inline Device random_waypoint_step(Device device, double dt_s, const Rect& area,
                                   const SpeedRange& speeds, Rng& rng) {
  if (!(dt_s > 0.0)) throw InvalidInput("random_waypoint_step: dt must be > 0");
  const double travel = device.speed_mps * dt_s;
  const Vec2 delta = device.waypoint - device.position;
  const double dist = delta.norm();
  if (dist <= travel) {
    device.position = device.waypoint;
    device.waypoint = uniform_point(area, rng);
    device.speed_mps = uniform_speed(speeds, rng);
  } else {
    device.position += delta * (travel / dist);
  }
  // Segment endpoints lie in the area; clamping removes rounding overshoot.
  device.position = area.clamp(device.position);
  return device;
}

// ---------------------------------------------------------------------------
// CSV layout: header `link_type,device,row,col,re,im`, one row per complex
// entry. link_type ∈ {direct, ris_device, bs_ris}; bs_ris rows carry device -1.
// direct rows index BS antennas, ris_device rows index surface elements.

inline void write_realization_csv(std::ostream& os, const ChannelRealization& r) {
  csv::RowWriter w(os);
  w.row("link_type", "device", "row", "col", "re", "im");
  for (Index l = 0; l < r.num_devices(); ++l)
    for (Index i = 0; i < r.direct.rows(); ++i)
      w.row("direct", l, i, Index{0}, r.direct(i, l).real(), r.direct(i, l).imag());
  for (Index l = 0; l < r.num_devices(); ++l)
    for (Index i = 0; i < r.ris_device.rows(); ++i)
      w.row("ris_device", l, i, Index{0}, r.ris_device(i, l).real(), r.ris_device(i, l).imag());
  for (Index i = 0; i < r.bs_ris.rows(); ++i)
    for (Index j = 0; j < r.bs_ris.cols(); ++j)
      w.row("bs_ris", Index{-1}, i, j, r.bs_ris(i, j).real(), r.bs_ris(i, j).imag());
}

inline ChannelRealization read_realization_csv(std::istream& is) {
  struct Entry {
    std::string type;
    Index device, row, col;
    Complex value;
  };
  std::vector<Entry> entries;
  std::string line;
  std::getline(is, line);
  if (csv::split_line(line) !=
      std::vector<std::string>{"link_type", "device", "row", "col", "re", "im"})
    throw InvalidInput("read_realization_csv: unexpected header");
  Index l = 0, m = 0, n = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = csv::split_line(line);
    if (f.size() != 6) throw InvalidInput("read_realization_csv: expected 6 fields");
    Entry e{f[0], std::stoll(f[1]), std::stoll(f[2]), std::stoll(f[3]),
            {csv::parse_double(f[4]), csv::parse_double(f[5])}};
    if (e.type == "direct") {
      l = std::max(l, e.device + 1);
      m = std::max(m, e.row + 1);
    } else if (e.type == "ris_device") {
      l = std::max(l, e.device + 1);
      n = std::max(n, e.row + 1);
    } else if (e.type == "bs_ris") {
      n = std::max(n, e.row + 1);
      m = std::max(m, e.col + 1);
    } else {
      throw InvalidInput("read_realization_csv: unknown link_type '" + e.type + "'");
    }
    entries.push_back(std::move(e));
  }
  ChannelRealization r;
  r.direct = CMatrix::Zero(m, l);
  r.ris_device = CMatrix::Zero(n, l);
  r.bs_ris = CMatrix::Zero(n, m);
  for (const auto& e : entries) {
    if (e.type == "direct") r.direct(e.row, e.device) = e.value;
    else if (e.type == "ris_device") r.ris_device(e.row, e.device) = e.value;
    else r.bs_ris(e.row, e.col) = e.value;
  }
  r.validate();
  return r;
}

}  // namespace bdris::channel
