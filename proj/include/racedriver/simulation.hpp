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
 *  \brief Closed-loop lap simulation.
 */

#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "racedriver/driver_policy.hpp"
#include "racedriver/track.hpp"
#include "racedriver/vehicle.hpp"

namespace racedriver {

enum class LapStatus { Completed, OffTrack, Timeout, NumericalBlowup, LocalizationLost };

inline const char* to_string(LapStatus s) {
  switch (s) {
    case LapStatus::Completed: return "completed";
    case LapStatus::OffTrack: return "off_track";
    case LapStatus::Timeout: return "timeout";
    case LapStatus::NumericalBlowup: return "numerical_blowup";
    case LapStatus::LocalizationLost: return "localization_lost";
  }
  return "unknown";
}

struct SimConfig {
  double dt = 0.005;                 ///< s
  double timeout = 600.0;            ///< s of simulated time
  double off_track_tolerance = 0.5;  ///< m beyond a border before the lap fails
  FeatureConfig features;
  SanityBounds bounds;
};

struct LogSample {
  double t = 0.0;
  VehicleState state;
  Action action;
  double s = 0.0;         ///< track station
  double d = 0.0;         ///< lateral offset from the track reference
  double target_s = 0.0;  ///< station on the target line
  double balance = 0.0;
  bool off_track = false;  ///< beyond a border (any amount)
};

struct LapLog {
  std::vector<LogSample> samples;
  LapStatus status = LapStatus::Timeout;
  double lap_time = std::numeric_limits<double>::quiet_NaN();
  double distance = 0.0;      ///< m of track progress
  double exit_station = 0.0;  ///< track station where the lap ended
  double max_abs_balance = 0.0;
  std::string message;

  bool completed() const { return status == LapStatus::Completed; }
};

/// Vehicle on the target at station 0, aligned with it, at target speed.
inline VehicleState start_state(const TargetTrajectory& target) {
  VehicleState state;
  const Vec2 p0 = target.line.position_at(0.0);
  state.x = p0.x;
  state.y = p0.y;
  state.yaw = target.line.heading_at(0.0);
  state.vx = target.speed_at(0.0);
  return state;
}

/// Flying lap, by default from start_state(target). The lap is complete
/// once the track station has advanced by one track length.
inline LapLog run_lap(const Policy& policy, const TargetTrajectory& target, const Track& track,
                      const VehicleParams& params = {}, const SimConfig& cfg = {},
                      std::optional<VehicleState> start = std::nullopt) {
  target.validate();
  cfg.features.validate();
  if (!(cfg.dt > 0.0 && cfg.dt <= 0.02)) throw Error(ErrorCode::InvalidArgument, "dt must lie in (0, 0.02] s");

  LapLog log;
  VehicleState state = start ? *start : start_state(target);

  const double L = track.length();
  Projection where = track.locate(state.position());
  double s_prev = where.s;
  double progress = 0.0;
  std::optional<double> target_hint;
  if (!start) target_hint = 0.0;
  double t = 0.0;
  log.exit_station = where.s;

  while (t + 0.5 * cfg.dt < cfg.timeout) {
    FeatureVector f;
    try {
      f = compute_features(state, target, cfg.features, target_hint);
    } catch (const Error& e) {
      log.status = LapStatus::LocalizationLost;
      log.message = e.what();
      return log;
    }
    target_hint = f.target_s;
    const Action a = policy.act(f).saturated(params.max_steer);
    try {
      state = step(state, a, cfg.dt, params, cfg.bounds);
    } catch (const Error& e) {
      log.status = LapStatus::NumericalBlowup;
      log.message = e.what();
      return log;
    }
    t += cfg.dt;
    try {
      where = track.locate(state.position(), s_prev);
    } catch (const Error& e) {
      log.status = LapStatus::LocalizationLost;
      log.message = e.what();
      return log;
    }
    const double before = progress;
    progress += circular_diff(where.s, s_prev, L);
    s_prev = where.s;

    LogSample smp;
    smp.t = t;
    smp.state = state;
    smp.action = a;
    smp.s = where.s;
    smp.d = where.d;
    smp.target_s = f.target_s;
    smp.balance = balance_metric(state);
    const double excess = track.border_excess(where.s, where.d);
    smp.off_track = excess > 0.0;
    log.samples.push_back(smp);
    log.max_abs_balance = std::max(log.max_abs_balance, std::abs(smp.balance));
    log.distance = std::max(0.0, progress);
    log.exit_station = where.s;

    if (excess > cfg.off_track_tolerance) {
      log.status = LapStatus::OffTrack;
      log.message = "left the track at s = " + std::to_string(where.s);
      return log;
    }
    if (progress >= L) {
      const double frac = (progress - L) / (progress - before);
      log.lap_time = t - frac * cfg.dt;
      log.distance = L;
      log.status = LapStatus::Completed;
      return log;
    }
  }
  log.status = LapStatus::Timeout;
  return log;
}

}  // namespace racedriver
