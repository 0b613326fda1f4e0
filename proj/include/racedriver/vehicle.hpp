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
 *  \brief Dynamic bicycle model with friction-limited tires.
 *
 *  Static axle loads, rear-wheel drive, lateral tire force
 *  Fy = Fy_max tanh(C alpha / Fy_max) with Fy_max from the friction ellipse
 *  left over by the longitudinal force of the same axle.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "racedriver/core.hpp"
#include "racedriver/speed_envelope.hpp"

namespace racedriver {

struct VehicleParams {
  double mass = 1200.0;              ///< kg
  double yaw_inertia = 1500.0;       ///< kg m^2
  double cg_to_front = 1.2;          ///< m
  double cg_to_rear = 1.4;           ///< m
  double mu = 1.25;                  ///< tire-road friction
  double cornering_front = 80000.0;  ///< N/rad, per axle
  double cornering_rear = 100000.0;  ///< N/rad, per axle
  double max_drive_force = 7000.0;   ///< N at the rear axle
  double max_power = 250000.0;       ///< W
  double max_brake_force = 16000.0;  ///< N, both axles together
  double brake_front_share = 0.6;
  double drag_coefficient = 0.43;    ///< N/(m/s)^2, 0.5 rho Cd A
  double traction_limit = 0.95;      ///< traction control caps drive force at this share of mu Fz
  double max_steer = 0.5;            ///< rad
  double slip_speed_floor = 1.0;     ///< m/s, below this slip angles use the floor

  double wheelbase() const { return cg_to_front + cg_to_rear; }
  double load_front() const { return mass * kGravity * cg_to_rear / wheelbase(); }
  double load_rear() const { return mass * kGravity * cg_to_front / wheelbase(); }
  /// rad/(m/s^2); positive means understeer.
  double understeer_gradient() const {
    return mass / wheelbase() * (cg_to_rear / cornering_front - cg_to_front / cornering_rear);
  }

  void validate() const {
    const bool ok = mass > 0.0 && yaw_inertia > 0.0 && cg_to_front > 0.0 && cg_to_rear > 0.0 && mu > 0.0 &&
                    cornering_front > 0.0 && cornering_rear > 0.0 && max_drive_force >= 0.0 && max_power > 0.0 &&
                    max_brake_force >= 0.0 && brake_front_share >= 0.0 && brake_front_share <= 1.0 &&
                    drag_coefficient >= 0.0 && traction_limit > 0.0 && traction_limit <= 1.0 && max_steer > 0.0;
    if (!ok) throw Error(ErrorCode::InvalidArgument, "invalid vehicle parameters");
  }
};

struct VehicleState {
  double x = 0.0, y = 0.0;  ///< m
  double yaw = 0.0;         ///< rad
  double yaw_rate = 0.0;    ///< rad/s
  double vx = 0.0, vy = 0.0;  ///< body frame, m/s
  // diagnostics from the last step
  double slip_front = 0.0, slip_rear = 0.0;  ///< rad
  double ax = 0.0, ay = 0.0;                 ///< body-frame acceleration, m/s^2
  double force_front = 0.0, force_rear = 0.0;  ///< combined tire force magnitude, N

  double speed() const { return std::hypot(vx, vy); }
  Vec2 position() const { return {x, y}; }
};

struct Action {
  double steer = 0.0;     ///< rad
  double throttle = 0.0;  ///< [0, 1]
  double brake = 0.0;     ///< [0, 1]

  /// Clamped copy. Throttle and brake together are allowed; see co_active().
  Action saturated(double max_steer) const {
    auto finite_or_zero = [](double v) { return std::isfinite(v) ? v : 0.0; };
    return {clamp_value(finite_or_zero(steer), -max_steer, max_steer), clamp_value(finite_or_zero(throttle), 0.0, 1.0),
            clamp_value(finite_or_zero(brake), 0.0, 1.0)};
  }
  bool co_active() const { return throttle > 0.0 && brake > 0.0; }
};

namespace detail {

struct AxleForces {
  double fx_front, fy_front, fx_rear, fy_rear;
  double slip_front, slip_rear;
};

inline double lateral_force(double stiffness, double alpha, double limit) {
  if (limit <= 0.0) return 0.0;
  return limit * std::tanh(stiffness * alpha / limit);
}

inline AxleForces axle_forces(const VehicleParams& p, const VehicleState& s, const Action& a) {
  AxleForces f{};
  const double u = std::max(s.vx, p.slip_speed_floor);
  f.slip_front = a.steer - std::atan2(s.vy + p.cg_to_front * s.yaw_rate, u);
  f.slip_rear = -std::atan2(s.vy - p.cg_to_rear * s.yaw_rate, u);

  const double cap_f = p.mu * p.load_front();
  const double cap_r = p.mu * p.load_rear();
  const double moving = s.vx > 1e-3 ? 1.0 : 0.0;
  const double drive = a.throttle * std::min({p.max_drive_force, p.max_power / std::max(s.vx, 1.0),
                                              p.traction_limit * cap_r});
  const double brake = a.brake * p.max_brake_force * moving;
  f.fx_front = -std::min(brake * p.brake_front_share, cap_f);
  f.fx_rear = clamp_value(drive - brake * (1.0 - p.brake_front_share), -cap_r, cap_r);

  const double lim_f = std::sqrt(std::max(0.0, cap_f * cap_f - f.fx_front * f.fx_front));
  const double lim_r = std::sqrt(std::max(0.0, cap_r * cap_r - f.fx_rear * f.fx_rear));
  f.fy_front = lateral_force(p.cornering_front, f.slip_front, lim_f);
  f.fy_rear = lateral_force(p.cornering_rear, f.slip_rear, lim_r);
  return f;
}

struct Derivative {
  double dx, dy, dyaw, dr, dvx, dvy;
};

inline Derivative derivative(const VehicleParams& p, const VehicleState& s, const Action& a, AxleForces* out = nullptr) {
  const AxleForces f = axle_forces(p, s, a);
  if (out) *out = f;
  const double c = std::cos(a.steer), sn = std::sin(a.steer);
  const double drag = p.drag_coefficient * s.vx * std::abs(s.vx);
  const double fx = f.fx_rear + f.fx_front * c - f.fy_front * sn - drag;
  const double fy = f.fy_rear + f.fx_front * sn + f.fy_front * c;
  const double mz = p.cg_to_front * (f.fy_front * c + f.fx_front * sn) - p.cg_to_rear * f.fy_rear;
  const double cy = std::cos(s.yaw), sy = std::sin(s.yaw);
  return {s.vx * cy - s.vy * sy, s.vx * sy + s.vy * cy, s.yaw_rate, mz / p.yaw_inertia,
          fx / p.mass + s.vy * s.yaw_rate, fy / p.mass - s.vx * s.yaw_rate};
}

inline VehicleState advance(VehicleState s, const Derivative& d, double h) {
  s.x += h * d.dx;
  s.y += h * d.dy;
  s.yaw += h * d.dyaw;
  s.yaw_rate += h * d.dr;
  s.vx += h * d.dvx;
  s.vy += h * d.dvy;
  return s;
}

}  // namespace detail

struct SanityBounds {
  double speed = 150.0;     ///< m/s
  double yaw_rate = 20.0;   ///< rad/s
  double position = 1e6;    ///< m
};

/// One RK4 step with the action held over dt.
inline VehicleState step(const VehicleState& state, const Action& action, double dt, const VehicleParams& p = {},
                         const SanityBounds& bounds = {}) {
  if (!(dt > 0.0 && dt <= 0.02)) throw Error(ErrorCode::InvalidArgument, "dt must lie in (0, 0.02] s");
  const Action a = action.saturated(p.max_steer);
  using detail::advance;
  using detail::derivative;
  const auto k1 = derivative(p, state, a);
  const auto k2 = derivative(p, advance(state, k1, 0.5 * dt), a);
  const auto k3 = derivative(p, advance(state, k2, 0.5 * dt), a);
  const auto k4 = derivative(p, advance(state, k3, dt), a);
  detail::Derivative d{};
  d.dx = (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx) / 6.0;
  d.dy = (k1.dy + 2.0 * k2.dy + 2.0 * k3.dy + k4.dy) / 6.0;
  d.dyaw = (k1.dyaw + 2.0 * k2.dyaw + 2.0 * k3.dyaw + k4.dyaw) / 6.0;
  d.dr = (k1.dr + 2.0 * k2.dr + 2.0 * k3.dr + k4.dr) / 6.0;
  d.dvx = (k1.dvx + 2.0 * k2.dvx + 2.0 * k3.dvx + k4.dvx) / 6.0;
  d.dvy = (k1.dvy + 2.0 * k2.dvy + 2.0 * k3.dvy + k4.dvy) / 6.0;
  VehicleState next = advance(state, d, dt);
  // brakes stop the car, they do not reverse it
  if (next.vx < 0.0) next.vx = 0.0;

  const bool finite = std::isfinite(next.x) && std::isfinite(next.y) && std::isfinite(next.yaw) &&
                      std::isfinite(next.yaw_rate) && std::isfinite(next.vx) && std::isfinite(next.vy);
  if (!finite || next.speed() > bounds.speed || std::abs(next.yaw_rate) > bounds.yaw_rate ||
      std::abs(next.x) > bounds.position || std::abs(next.y) > bounds.position) {
    throw Error(ErrorCode::NumericalBlowup, "vehicle state left the sanity bounds");
  }

  detail::AxleForces f{};
  const auto dn = derivative(p, next, a, &f);
  next.slip_front = f.slip_front;
  next.slip_rear = f.slip_rear;
  next.force_front = std::hypot(f.fx_front, f.fy_front);
  next.force_rear = std::hypot(f.fx_rear, f.fy_rear);
  next.ax = dn.dvx - next.vy * next.yaw_rate;
  next.ay = dn.dvy + next.vx * next.yaw_rate;
  return next;
}

/// Front minus rear slip-angle magnitude; positive = understeer. Zero below v_min.
inline double balance_metric(const VehicleState& s, double v_min = 2.0) {
  if (s.vx <= v_min) return 0.0;
  return std::abs(s.slip_front) - std::abs(s.slip_rear);
}

inline double kinetic_energy(const VehicleState& s, const VehicleParams& p) {
  return 0.5 * p.mass * (s.vx * s.vx + s.vy * s.vy) + 0.5 * p.yaw_inertia * s.yaw_rate * s.yaw_rate;
}

/// Straight-line acceleration of the plant at speed v with full throttle.
inline double drive_acceleration(const VehicleParams& p, double v) {
  const double force = std::min({p.max_drive_force, p.max_power / std::max(v, 1.0), p.traction_limit * p.mu * p.load_rear()});
  return (force - p.drag_coefficient * v * v) / p.mass;
}

/// Performance envelope matching the plant. Lateral and braking limits keep
/// a margin below mu g because the tanh tire only approaches saturation.
inline PerformanceEnvelope envelope_from_vehicle(const VehicleParams& p, double margin = 0.95, double step = 5.0) {
  p.validate();
  PerformanceEnvelope env;
  env.ay_max = margin * p.mu * kGravity;
  env.ax_brake = margin * std::min(p.mu * kGravity, p.max_brake_force / p.mass);
  std::vector<double> v, a;
  double top = 0.0;
  for (double s = 0.0; s <= 150.0; s += step) {
    const double acc = drive_acceleration(p, s);
    if (acc <= 0.0) break;
    top = s;
    v.push_back(s);
    a.push_back(margin * acc);
  }
  if (v.size() < 2) throw Error(ErrorCode::InvalidArgument, "vehicle cannot accelerate");
  // refine the top speed where drive force equals drag
  double lo = top, hi = top + step;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (drive_acceleration(p, mid) > 0.0 ? lo : hi) = mid;
  }
  env.v_max = lo;
  env.ax_acc = AccelerationTable{v, a};
  return env;
}

}  // namespace racedriver
