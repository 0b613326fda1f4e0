// Copyright 2026 The racedriver Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/*! \file
 *  \brief Quasi-steady-state speed profile from a point-mass performance envelope.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "racedriver/core.hpp"
#include "racedriver/path.hpp"

namespace racedriver {

/// Longitudinal acceleration available at full throttle, tabulated over speed.
/// Linear interpolation, held constant outside the table.
struct AccelerationTable {
  std::vector<double> speed;  ///< m/s, strictly increasing
  std::vector<double> accel;  ///< m/s^2

  static AccelerationTable constant(double a) { return {{0.0}, {a}}; }

  double at(double v) const {
    if (speed.empty()) return 0.0;
    if (v <= speed.front()) return accel.front();
    if (v >= speed.back()) return accel.back();
    const auto it = std::upper_bound(speed.begin(), speed.end(), v);
    const auto i = static_cast<std::size_t>(it - speed.begin());
    const double t = (v - speed[i - 1]) / (speed[i] - speed[i - 1]);
    return accel[i - 1] + t * (accel[i] - accel[i - 1]);
  }
};

struct PerformanceEnvelope {
  double ay_max = 12.0;    ///< m/s^2
  AccelerationTable ax_acc = AccelerationTable::constant(6.0);
  double ax_brake = 12.0;  ///< m/s^2, magnitude
  double v_max = 80.0;     ///< m/s
  double scale = 1.0;      ///< applied to every limit

  void validate() const {
    if (!(ay_max > 0.0) || !(ax_brake > 0.0) || !(v_max > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "envelope limits must be positive");
    }
    if (!(scale > 0.0) || scale > 1.0) throw Error(ErrorCode::InvalidArgument, "envelope scale must lie in (0, 1]");
    if (ax_acc.speed.empty() || ax_acc.speed.size() != ax_acc.accel.size()) {
      throw Error(ErrorCode::InvalidArgument, "acceleration table is empty or ragged");
    }
    for (std::size_t i = 0; i < ax_acc.speed.size(); ++i) {
      if (!(ax_acc.accel[i] > 0.0)) throw Error(ErrorCode::InvalidArgument, "acceleration table must be positive");
      if (i > 0 && !(ax_acc.speed[i] > ax_acc.speed[i - 1])) {
        throw Error(ErrorCode::InvalidArgument, "acceleration table speeds must increase");
      }
    }
  }

  double lateral_limit() const { return scale * ay_max; }
  double accel_limit(double v) const { return scale * ax_acc.at(v); }
  double brake_limit() const { return scale * ax_brake; }
};

struct SpeedConfig {
  double kappa_floor = 1e-5;  ///< 1/m
  std::size_t max_iterations = 20;
  double tolerance = 1e-9;    ///< m/s, fixed-point test
};

/// Speed and traversal time per station. dt[i] is the time from station i to i+1.
struct SpeedProfile {
  std::vector<double> v;
  std::vector<double> dt;
  std::vector<double> ds;
  std::vector<double> kappa;
  double lap_time = 0.0;
  std::size_t iterations = 0;
  bool converged = false;

  std::size_t size() const { return v.size(); }
};

/// Fraction of the longitudinal limit left after cornering at speed v.
inline double ellipse_residual(double v, double kappa, double lateral_limit) {
  const double r = v * v * std::abs(kappa) / lateral_limit;
  return r >= 1.0 ? 0.0 : std::sqrt(1.0 - r * r);
}

/// Speed profile on a closed loop given the segment lengths ds[i] (station i
/// to i+1) and curvature at each station.
inline SpeedProfile estimate_speed(const std::vector<double>& ds, const std::vector<double>& kappa,
                                   const PerformanceEnvelope& env, const SpeedConfig& cfg = {}) {
  env.validate();
  const std::size_t n = ds.size();
  if (n < 3 || kappa.size() != n) throw Error(ErrorCode::DegenerateLine, "speed profile needs a closed line");
  double total = 0.0;
  for (double d : ds) {
    if (!(d >= 0.0)) throw Error(ErrorCode::DegenerateLine, "negative segment length");
    total += d;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::DegenerateLine, "line has zero length");

  const double ay = env.lateral_limit();
  std::vector<double> v_lim(n);
  for (std::size_t i = 0; i < n; ++i) {
    v_lim[i] = std::min(env.v_max, std::sqrt(ay / std::max(std::abs(kappa[i]), cfg.kappa_floor)));
  }
  // The slowest station can never be raised by either pass, so both passes
  // start there and the wrap-around is consistent after one sweep. Further
  // sweeps only confirm the fixed point.
  const auto start = static_cast<std::size_t>(std::min_element(v_lim.begin(), v_lim.end()) - v_lim.begin());

  std::vector<double> fwd = v_lim;
  std::vector<double> bwd = v_lim;
  SpeedProfile out;
  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    double change = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = (start + k) % n;
      const std::size_t j = (i + 1) % n;
      const double a = env.accel_limit(fwd[i]) * ellipse_residual(fwd[i], kappa[i], ay);
      const double next = std::min(v_lim[j], std::sqrt(fwd[i] * fwd[i] + 2.0 * a * ds[i]));
      change = std::max(change, std::abs(next - fwd[j]));
      fwd[j] = std::min(fwd[j], next);
    }
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t j = (start + n - k) % n;
      const std::size_t i = (j + n - 1) % n;
      const double b = env.brake_limit() * ellipse_residual(bwd[j], kappa[j], ay);
      const double prev = std::min(v_lim[i], std::sqrt(bwd[j] * bwd[j] + 2.0 * b * ds[i]));
      change = std::max(change, std::abs(prev - bwd[i]));
      bwd[i] = std::min(bwd[i], prev);
    }
    out.iterations = it + 1;
    if (it > 0 && change < cfg.tolerance) {
      out.converged = true;
      break;
    }
  }

  out.v.resize(n);
  out.dt.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.v[i] = std::min(fwd[i], bwd[i]);
  for (std::size_t i = 0; i < n; ++i) {
    out.dt[i] = ds[i] / (0.5 * (out.v[i] + out.v[(i + 1) % n]));
    out.lap_time += out.dt[i];
  }
  out.ds = ds;
  out.kappa = kappa;
  return out;
}

/// Speed profile along a closed Cartesian line, curvature from the line itself.
inline SpeedProfile estimate_speed(const Polyline& line, const PerformanceEnvelope& env, const SpeedConfig& cfg = {}) {
  const Polyline pts = open_loop(line);
  if (pts.size() < 3) throw Error(ErrorCode::DegenerateLine, "line needs at least 3 points");
  std::vector<double> ds(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) ds[i] = distance(pts[i], pts[(i + 1) % pts.size()]);
  double total = 0.0;
  for (double d : ds) total += d;
  if (!(total > 0.0)) throw Error(ErrorCode::DegenerateLine, "line has zero length");
  return estimate_speed(ds, closed_line_shape(pts).kappa, env, cfg);
}

/// Raises the envelope scale by one schedule step, capped at 1.
inline PerformanceEnvelope expand_envelope(PerformanceEnvelope env, double step = 0.1) {
  env.scale = std::min(1.0, std::round((env.scale + step) * 1e9) / 1e9);
  return env;
}

/// Scales visited by a warm-up from `start` to 1 in steps of `step`.
inline std::vector<double> envelope_schedule(double start = 0.7, double step = 0.1) {
  if (!(start > 0.0) || start > 1.0 || !(step > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "schedule needs start in (0, 1] and a positive step");
  }
  std::vector<double> out{start};
  PerformanceEnvelope env;
  env.scale = start;
  while (env.scale < 1.0) {
    env = expand_envelope(env, step);
    out.push_back(env.scale);
  }
  return out;
}

}  // namespace racedriver
