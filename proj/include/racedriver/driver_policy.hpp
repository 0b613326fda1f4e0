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
 *  \brief Preview features and the policy interface.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "racedriver/path.hpp"
#include "racedriver/speed_envelope.hpp"
#include "racedriver/vehicle.hpp"

namespace racedriver {

enum class Provenance { Sampled, Conditioned, Scaled, Manual };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::Sampled: return "sampled";
    case Provenance::Conditioned: return "conditioned";
    case Provenance::Scaled: return "scaled";
    case Provenance::Manual: return "manual";
  }
  return "unknown";
}

/// Target line with a speed per line vertex.
struct TargetTrajectory {
  ClosedPath line;
  std::vector<double> speed;  ///< m/s at line.points()[i]
  Provenance provenance = Provenance::Manual;

  double speed_at(double s) const {
    const auto [i, t] = line.locate(s);
    return speed[i] * (1.0 - t) + speed[(i + 1) % speed.size()] * t;
  }

  void validate() const {
    if (speed.size() != line.size()) throw Error(ErrorCode::InvalidArgument, "target speed must match the line vertices");
    for (double v : speed) {
      if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "target speed must be positive");
    }
  }

  /// Predicted lap time of the target itself.
  double lap_time() const {
    double t = 0.0;
    const auto& st = line.stations();
    for (std::size_t i = 0; i < speed.size(); ++i) {
      t += 2.0 * (st[i + 1] - st[i]) / (speed[i] + speed[(i + 1) % speed.size()]);
    }
    return t;
  }
};

inline TargetTrajectory make_target(const Polyline& line, const PerformanceEnvelope& env,
                                    Provenance provenance = Provenance::Manual, const SpeedConfig& cfg = {}) {
  TargetTrajectory t;
  t.line = ClosedPath(line);
  t.speed = estimate_speed(t.line.points(), env, cfg).v;
  t.provenance = provenance;
  return t;
}

inline constexpr std::size_t kHorizons = 4;

struct FeatureConfig {
  std::array<double, kHorizons> horizons{0.3, 0.8, 1.5, 2.5};  ///< s, strictly increasing
  double min_preview_speed = 5.0;  ///< m/s, preview distances never shrink below this speed
  double max_lateral = 30.0;       ///< m, farther from the target line counts as lost

  void validate() const {
    for (std::size_t k = 0; k < kHorizons; ++k) {
      if (!(horizons[k] > 0.0) || (k > 0 && !(horizons[k] > horizons[k - 1]))) {
        throw Error(ErrorCode::InvalidArgument, "preview horizons must be positive and strictly increasing");
      }
    }
  }
};

/// Local path (preview) and perception features.
///
/// Ordering of to_vector(): offset[4], speed_error[4], target_kappa[4],
/// path_kappa[4], then speed, ax, ay, yaw_rate, balance.
struct FeatureVector {
  std::array<double, kHorizons> distance{};      ///< m, preview distance per horizon
  std::array<double, kHorizons> offset{};        ///< m, straight-ahead point vs target line, + = left of it
  std::array<double, kHorizons> speed_error{};   ///< m/s, target minus current speed
  std::array<double, kHorizons> target_kappa{};  ///< 1/m
  std::array<double, kHorizons> path_kappa{};    ///< 1/m, initial curvature of the pose-matched cubic
  double speed = 0.0;                            ///< m/s
  double ax = 0.0, ay = 0.0;                     ///< m/s^2
  double yaw_rate = 0.0;                         ///< rad/s
  double balance = 0.0;                          ///< rad
  double target_s = 0.0;                         ///< station of the vehicle on the target line
  double lateral = 0.0;                          ///< m, vehicle offset from the target line

  std::vector<double> to_vector() const {
    std::vector<double> v;
    for (const auto* a : {&offset, &speed_error, &target_kappa, &path_kappa}) v.insert(v.end(), a->begin(), a->end());
    v.insert(v.end(), {speed, ax, ay, yaw_rate, balance});
    return v;
  }
};

/// Initial curvature of y = c2 x^2 + c3 x^3 through (0, 0, slope 0) and
/// (X, Y, slope Yp), in the vehicle frame.
inline double cubic_initial_curvature(double X, double Y, double Yp) {
  if (!(X > 1e-6)) return 0.0;
  return 2.0 * (3.0 * Y - X * Yp) / (X * X);
}

inline FeatureVector compute_features(const VehicleState& state, const TargetTrajectory& target,
                                      const FeatureConfig& cfg = {}, std::optional<double> hint = std::nullopt) {
  FeatureVector f;
  const Vec2 pos = state.position();
  Projection here;
  try {
    here = target.line.project(pos, hint);
  } catch (const Error& e) {
    throw Error(ErrorCode::LocalizationLost, std::string("cannot place the vehicle on the target: ") + e.what());
  }
  if (!(std::abs(here.d) <= cfg.max_lateral)) throw Error(ErrorCode::LocalizationLost, "vehicle far from the target line");
  f.target_s = here.s;
  f.lateral = here.d;

  const double v = state.vx;
  const double v_preview = std::max(v, cfg.min_preview_speed);
  const Vec2 fwd = unit_from_angle(state.yaw);
  const Vec2 left = left_normal(state.yaw);
  for (std::size_t k = 0; k < kHorizons; ++k) {
    const double dist = v_preview * cfg.horizons[k];
    f.distance[k] = dist;
    const Vec2 ahead = pos + fwd * dist;
    Projection pr;
    try {
      pr = target.line.project(ahead, here.s + dist);
    } catch (const Error&) {
      pr = {wrap_s(here.s + dist, target.line.length()), 0.0, 0};
      pr.d = dot(ahead - target.line.position_at(pr.s), target.line.normal_at(pr.s));
    }
    f.offset[k] = pr.d;
    f.speed_error[k] = target.speed_at(pr.s) - v;
    f.target_kappa[k] = target.line.curvature_at(pr.s);

    // pose-matched cubic to the target point one preview distance down the line
    const double s_k = here.s + dist;
    const Vec2 rel = target.line.position_at(s_k) - pos;
    const double slope = std::tan(clamp_value(wrap_angle(target.line.heading_at(s_k) - state.yaw), -1.2, 1.2));
    f.path_kappa[k] = cubic_initial_curvature(dot(rel, fwd), dot(rel, left), slope);
  }
  f.speed = state.speed();
  f.ax = state.ax;
  f.ay = state.ay;
  f.yaw_rate = state.yaw_rate;
  f.balance = balance_metric(state);
  return f;
}

/// Maps features to actions. Implementations must be deterministic and
/// depend on nothing but the features and their own configuration.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual Action act(const FeatureVector& f) const = 0;
};

struct PolicyConfig {
  std::array<double, kHorizons> steer_weights{0.5, 0.4, 0.1, 0.0};  ///< blend of path_kappa, sums to 1
  // steady-state steering model of the car being driven
  double wheelbase = VehicleParams{}.wheelbase();
  double front_share = VehicleParams{}.cg_to_rear / VehicleParams{}.wheelbase();  ///< of lateral force
  double front_grip = VehicleParams{}.mu * kGravity;  ///< m/s^2 of lateral acceleration per axle at saturation
  double rear_grip = VehicleParams{}.mu * kGravity;
  double front_stiffness = VehicleParams{}.cornering_front / VehicleParams{}.load_front() * kGravity;  ///< 1/rad, per g
  double rear_stiffness = VehicleParams{}.cornering_rear / VehicleParams{}.load_rear() * kGravity;
  double yaw_damping = 0.05;      ///< rad per rad/s of yaw-rate error
  double lateral_gain = 0.02;     ///< rad per m of offset from the target line
  double speed_gain = 2.0;        ///< 1/s
  double drive_reference = 5.0;   ///< m/s^2 produced by full throttle, roughly
  double brake_reference = 12.0;  ///< m/s^2 produced by full brake, roughly
  double hold_throttle = 0.05;    ///< throttle at zero speed error
  double lateral_limit = 11.5;    ///< m/s^2 used by the friction-aware clamps
  double clamp_floor = 0.3;       ///< pedals never clamped below this
  double oversteer_lift = 0.1;    ///< rad of rear-over-front slip that closes the throttle
  double max_steer = VehicleParams{}.max_steer;

  static PolicyConfig for_vehicle(const VehicleParams& p) {
    PolicyConfig c;
    c.wheelbase = p.wheelbase();
    c.front_share = p.cg_to_rear / p.wheelbase();
    c.front_grip = c.rear_grip = p.mu * kGravity;
    c.front_stiffness = p.cornering_front / p.load_front() * kGravity;
    c.rear_stiffness = p.cornering_rear / p.load_rear() * kGravity;
    c.max_steer = p.max_steer;
    c.lateral_limit = 0.95 * p.mu * kGravity;
    c.drive_reference = std::max(1.0, drive_acceleration(p, 20.0));
    c.brake_reference = std::min(p.mu * kGravity, p.max_brake_force / p.mass);
    return c;
  }
};

/// Deterministic preview controller.
///
/// Steering: the weighted initial curvature of the pose-matched cubics,
/// turned into a wheel angle with the steady-state bicycle relation, plus
/// yaw-rate damping. Pedals: proportional speed control on the nearest
/// horizon with a feed-forward from the target speed slope; the throttle
/// lifts when the rear slips more than the front.
class PreviewController : public Policy {
 public:
  explicit PreviewController(PolicyConfig cfg = {}) : cfg_(cfg) {}

  const PolicyConfig& config() const { return cfg_; }

  Action act(const FeatureVector& f) const override {
    const double v = f.speed;
    double kappa = 0.0;
    for (std::size_t k = 0; k < kHorizons; ++k) kappa += cfg_.steer_weights[k] * f.path_kappa[k];
    double steer = steady_steer(kappa, v);
    steer += cfg_.yaw_damping * (kappa * v - f.yaw_rate) - cfg_.lateral_gain * f.lateral;

    const double v0 = v + f.speed_error[0], v1 = v + f.speed_error[1];
    const double gap = f.distance[1] - f.distance[0];
    const double feed = gap > 0.0 ? (v1 * v1 - v0 * v0) / (2.0 * gap) : 0.0;
    // target speed carried back from the first horizon to the car
    const double v_here = std::sqrt(std::max(0.0, v0 * v0 - 2.0 * feed * f.distance[0]));
    const double accel = cfg_.speed_gain * (v_here - v) + feed;

    double throttle = cfg_.hold_throttle + accel / cfg_.drive_reference;
    double brake = 0.0;
    if (accel < 0.0) {
      throttle = std::max(0.0, throttle);
      brake = std::max(0.0, -accel - cfg_.hold_throttle * cfg_.drive_reference) / cfg_.brake_reference;
    }
    // leave lateral grip for the corner
    const double demand = std::max(std::abs(f.ay), std::abs(kappa) * v * v);
    const double use = std::min(1.0, demand / cfg_.lateral_limit);
    const double room = std::max(cfg_.clamp_floor, std::sqrt(1.0 - use * use));
    throttle = std::min(throttle, room);
    brake = std::min(brake, room);
    if (f.balance < 0.0) throttle *= std::max(0.0, 1.0 + f.balance / cfg_.oversteer_lift);
    return Action{steer, throttle, brake}.saturated(cfg_.max_steer);
  }

 private:
  /// Wheel angle for a steady turn of curvature kappa at speed v: kinematic
  /// angle plus front minus rear slip, inverting the saturating tire law.
  /// For small lateral acceleration this is (L + K v^2) kappa.
  double steady_steer(double kappa, double v) const {
    const double ay = v * v * kappa;
    auto slip = [&](double share, double grip, double stiffness) {
      // axle force m share ay = m grip tanh(stiffness alpha / grip)
      const double u = clamp_value(share * ay / grip, -0.97, 0.97);
      return grip / stiffness * std::atanh(u);
    };
    return cfg_.wheelbase * kappa + slip(cfg_.front_share, cfg_.front_grip, cfg_.front_stiffness) -
           slip(1.0 - cfg_.front_share, cfg_.rear_grip, cfg_.rear_stiffness);
  }

  PolicyConfig cfg_;
};

/// Replays recorded actions by station on the target line.
class RecordedPolicy : public Policy {
 public:
  RecordedPolicy(std::vector<double> stations, std::vector<Action> actions)
      : stations_(std::move(stations)), actions_(std::move(actions)) {
    if (stations_.empty() || stations_.size() != actions_.size()) {
      throw Error(ErrorCode::InvalidArgument, "recorded policy needs one action per station");
    }
    if (!std::is_sorted(stations_.begin(), stations_.end())) {
      throw Error(ErrorCode::InvalidArgument, "recorded stations must be sorted");
    }
  }

  Action act(const FeatureVector& f) const override {
    auto it = std::upper_bound(stations_.begin(), stations_.end(), f.target_s);
    if (it == stations_.begin()) return actions_.back();
    return actions_[static_cast<std::size_t>(std::distance(stations_.begin(), it)) - 1];
  }

 private:
  std::vector<double> stations_;
  std::vector<Action> actions_;
};

}  // namespace racedriver
