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
 *  \brief Lap-by-lap adaptation of the target trajectory.
 *
 *  The target lives in a ProMP over (x, y, dt) sampled at the stations of a
 *  frame track. x and y are stored as the displacement from the frame
 *  reference, which keeps the weights small and the fit exact near the
 *  basis ends; dt[i] is the time from station i to i + 1. Failed or sloppy
 *  laps turn into observations that are conditioned into the ProMP, and
 *  completed laps may get their straights sped up.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "racedriver/driver_policy.hpp"
#include "racedriver/path_synthesis.hpp"
#include "racedriver/promp.hpp"
#include "racedriver/simulation.hpp"
#include "racedriver/track_analysis.hpp"

namespace racedriver {

struct AdaptationConfig {
  // conditioning confidence
  double line_std = 0.25;        ///< m, line corrections after a failure
  double corridor_std = 0.5;     ///< m, excursions on completed laps
  double speed_rel_std = 0.02;   ///< of the observed dt
  // corridor
  double half_width = 1.0;       ///< m, borders are inset by this
  double pull_margin = 0.3;      ///< m beyond the violation a correction pulls
  double violation_tolerance = 0.05;  ///< m
  double excursion_tolerance = 0.1;   ///< m
  double lookback = 150.0;       ///< m before corner entry searched for violations
  // speed reduction
  double decrement = 0.05;
  double speed_floor = 0.4;      ///< of the curvature-limited speed
  std::size_t floor_repeats = 3;
  // slip
  double slip_threshold = 0.25;  ///< rad, either axle
  double balance_threshold = 0.15;  ///< rad
  double slip_dwell = 0.2;       ///< s
  // ProMP prior and process noise
  double prior_line_std = 0.5;   ///< m, added to the transferred line spread
  double prior_dt_rel = 0.1;
  double process_line_std = 0.3;  ///< m, added before every iteration
  double process_dt_rel = 0.05;
  double correlation_length = 30.0;  ///< m, prior and process noise
  std::size_t mask_bandwidth = 8;
  MaskShape mask_shape = MaskShape::RaisedCosine;
  // speed scaling
  double min_straight = 100.0;   ///< m
  double scale_margin = 3.0;     ///< m/s above the reachable speed
  double blend = 30.0;           ///< m, cosine blend at each end
  double full_throttle = 0.98;
  double coverage = 0.9;         ///< full-throttle share that counts as saturated
  double overspeed = 0.5;        ///< m/s above target that counts as slack
  double scale_brake = 0.8;      ///< share of the envelope braking used after a raise
  double reduction_brake = 0.9;  ///< share of the envelope braking a reduced corner may ask for
  bool scaling = true;

  std::size_t budget = 40;       ///< adaptation steps after the first lap
  double min_dt = 1e-3;          ///< s, per station
  PerformanceEnvelope envelope{};  ///< full performance, floors and scaling
  AnalysisConfig analysis{};
  SimConfig sim{};

  void validate() const {
    if (!(line_std > 0.0) || !(corridor_std > 0.0) || !(speed_rel_std > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "conditioning deviations must be positive");
    }
    if (!(decrement > 0.0 && decrement < 1.0)) throw Error(ErrorCode::InvalidArgument, "decrement must lie in (0, 1)");
    if (!(speed_floor > 0.0 && speed_floor < 1.0)) throw Error(ErrorCode::InvalidArgument, "speed floor must lie in (0, 1)");
    if (mask_bandwidth < 1) throw Error(ErrorCode::InvalidArgument, "mask bandwidth must be at least 1");
    if (!(half_width >= 0.0) || !(blend > 0.0) || !(correlation_length > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "corridor, blend and correlation lengths must be positive");
    }
    envelope.validate();
  }
};

inline constexpr std::size_t kVarX = 0;
inline constexpr std::size_t kVarY = 1;
inline constexpr std::size_t kVarDt = 2;

/// ProMP over (x, y, dt) and the track whose stations parameterise it.
struct AdaptationModel {
  Track frame;
  ProMP promp;
  Eigen::MatrixXd process_noise;

  /// ProMP station of a world point.
  double station_of(const Vec2& p, std::optional<double> hint = std::nullopt) const {
    return wrap_s(frame.locate(p, hint).s, promp.basis.track_length);
  }

  Vec2 mean_point(double s) const {
    const Eigen::MatrixXd psi = promp.psi_at(s, {kVarX, kVarY});
    const Eigen::VectorXd m = psi.transpose() * promp.mu_w;
    return frame.reference().position_at(s) + Vec2{m(0), m(1)};
  }

  /// Mean line at the frame stations.
  Polyline mean_points() const {
    const Eigen::MatrixXd tr = promp.mean_trajectory();
    const auto& ref = frame.reference().points();
    Polyline out(ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      out[i] = ref[i] + Vec2{tr(r, kVarX), tr(r, kVarY)};
    }
    return out;
  }

  double mean_dt(double s) const {
    const Eigen::MatrixXd psi = promp.psi_at(s, {kVarDt});
    return (psi.transpose() * promp.mu_w)(0);
  }
};

namespace detail {

// exp(-(c_j - c_k)^2 / 2l^2) over the basis centers
inline Eigen::MatrixXd center_correlation(const BasisConfig& b, double length) {
  const auto n = static_cast<Eigen::Index>(b.n_bf);
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const double d = b.center(static_cast<std::size_t>(j)) - b.center(static_cast<std::size_t>(k));
      c(j, k) = std::exp(-d * d / (2.0 * length * length));
    }
  }
  return c;
}

inline Eigen::MatrixXd fit_columns(const RidgeProjector& proj, const Eigen::MatrixXd& m) {
  const Eigen::VectorXd w = proj.fit(m);
  return Eigen::Map<const Eigen::MatrixXd>(w.data(), static_cast<Eigen::Index>(proj.config().n_bf), m.cols());
}

// line and dt noise on the three blocks; dt scale taken near each center
inline Eigen::MatrixXd block_noise(const BasisConfig& b, const Eigen::VectorXd& dt, double line_std, double dt_rel,
                                   double length) {
  const auto nbf = static_cast<Eigen::Index>(b.n_bf);
  const Eigen::MatrixXd c = center_correlation(b, length);
  Eigen::VectorXd sd(nbf);
  for (Eigen::Index j = 0; j < nbf; ++j) {
    const double s = std::min(b.center(static_cast<std::size_t>(j)), b.track_length * (1.0 - 1e-12));
    const auto i = static_cast<Eigen::Index>(std::floor(s / b.track_length * static_cast<double>(dt.size())));
    sd(j) = dt_rel * dt(std::min<Eigen::Index>(i, dt.size() - 1));
  }
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(3 * nbf, 3 * nbf);
  q.block(0, 0, nbf, nbf) = line_std * line_std * c;
  q.block(nbf, nbf, nbf, nbf) = line_std * line_std * c;
  q.block(2 * nbf, 2 * nbf, nbf, nbf) = sd.asDiagonal() * c * sd.asDiagonal();
  return q;
}

}  // namespace detail

/// Builds the (x, y, dt) ProMP from a lateral spread around the frame
/// reference. `dy` and `dt` are per frame station; `sigma_dy` is the dy weight
/// covariance on `basis`, mapped to x and y through the station normals.
inline AdaptationModel make_adaptation_model(const Track& frame, const BasisConfig& basis, const std::vector<double>& dy,
                                             const Eigen::MatrixXd& sigma_dy, const std::vector<double>& dt,
                                             const AdaptationConfig& cfg = {}) {
  const std::size_t n = frame.station_count();
  if (basis.n_stations != n || dy.size() != n || dt.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "adaptation model needs dy and dt at every frame station");
  }
  const auto nbf = static_cast<Eigen::Index>(basis.n_bf);
  if (sigma_dy.rows() != nbf || sigma_dy.cols() != nbf) {
    throw Error(ErrorCode::InvalidArgument, "dy covariance does not match the basis");
  }
  const RidgeProjector proj(basis);
  const auto& ref = frame.reference();
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd traj(N, 3);
  Eigen::VectorXd nx(N), ny(N);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 nrm = ref.normals()[i];
    const auto r = static_cast<Eigen::Index>(i);
    traj(r, 0) = nrm.x * dy[i];
    traj(r, 1) = nrm.y * dy[i];
    if (!(dt[i] > 0.0)) throw Error(ErrorCode::InvalidArgument, "station times must be positive");
    traj(r, 2) = dt[i];
    nx(r) = nrm.x;
    ny(r) = nrm.y;
  }
  AdaptationModel m;
  m.frame = frame;
  m.promp.basis = basis;
  m.promp.variables = {"x", "y", "dt"};
  m.promp.mu_w = proj.fit(traj);

  // x = P diag(n_x) Phi w_dy
  const Eigen::MatrixXd& phi = proj.phi();
  const Eigen::MatrixXd ax = detail::fit_columns(proj, nx.asDiagonal() * phi);
  const Eigen::MatrixXd ay = detail::fit_columns(proj, ny.asDiagonal() * phi);
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(3 * nbf, 3 * nbf);
  sigma.block(0, 0, nbf, nbf) = ax * sigma_dy * ax.transpose();
  sigma.block(0, nbf, nbf, nbf) = ax * sigma_dy * ay.transpose();
  sigma.block(nbf, 0, nbf, nbf) = ay * sigma_dy * ax.transpose();
  sigma.block(nbf, nbf, nbf, nbf) = ay * sigma_dy * ay.transpose();
  const Eigen::VectorXd dtv = traj.col(2);
  sigma += detail::block_noise(basis, dtv, cfg.prior_line_std, cfg.prior_dt_rel, cfg.correlation_length);
  repair_psd(sigma);
  m.promp.sigma_w = sigma;
  m.process_noise =
      detail::block_noise(basis, dtv, cfg.process_line_std, cfg.process_dt_rel, cfg.correlation_length);
  m.promp.validate();
  return m;
}

/// From a generalized line, with speeds from `env` along its mean line.
inline AdaptationModel make_adaptation_model(const GeneralizedLine& gen, const PerformanceEnvelope& env,
                                             const AdaptationConfig& cfg = {}) {
  const std::size_t n = gen.frame.station_count();
  const auto prof = estimate_speed(gen.mean_line(), env);
  return make_adaptation_model(gen.frame, gen.dy_promp.basis, std::vector<double>(n, 0.0), gen.dy_promp.sigma_w,
                               prof.dt, cfg);
}

/// From an existing target on `track`; the line spread is the prior alone.
inline AdaptationModel make_adaptation_model(const TargetTrajectory& target, const Track& track,
                                             const AdaptationConfig& cfg = {}) {
  target.validate();
  const auto trace = to_curvilinear(target.line.points(), track, cfg.analysis.curvilinear);
  const Polyline pts = from_curvilinear(trace.dy, track, cfg.analysis.curvilinear);
  const std::size_t n = pts.size();
  std::vector<double> dt(n);
  std::optional<double> hint;
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto pr = target.line.project(pts[i], hint);
    hint = pr.s;
    v[i] = target.speed_at(pr.s);
  }
  for (std::size_t i = 0; i < n; ++i) {
    dt[i] = 2.0 * distance(pts[i], pts[(i + 1) % n]) / (v[i] + v[(i + 1) % n]);
  }
  const BasisConfig basis = basis_for_track(track.length(), n);
  const auto nbf = static_cast<Eigen::Index>(basis.n_bf);
  return make_adaptation_model(track, basis, trace.dy, Eigen::MatrixXd::Zero(nbf, nbf), dt, cfg);
}

/// Mean (x, y, dt) as a target: speed[i] covers the segment from vertex i.
inline TargetTrajectory target_from_model(const AdaptationModel& m, const AdaptationConfig& cfg = {}) {
  const Eigen::MatrixXd tr = m.promp.mean_trajectory();
  const auto n = static_cast<std::size_t>(tr.rows());
  const Polyline pts = m.mean_points();
  TargetTrajectory t;
  t.line = ClosedPath(pts);
  if (t.line.size() != n) throw Error(ErrorCode::DegenerateLine, "mean line has coincident stations");
  t.speed.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = std::max(tr(static_cast<Eigen::Index>(i), kVarDt), cfg.min_dt);
    t.speed[i] = std::clamp(distance(pts[i], pts[(i + 1) % n]) / dt, 0.5, cfg.envelope.v_max);
  }
  t.provenance = Provenance::Conditioned;
  return t;
}

/// Replaces the dt mean with the times implied by `speed` along the current mean line.
inline void set_speed(AdaptationModel& m, const std::vector<double>& speed, const AdaptationConfig& cfg = {}) {
  const Polyline pts = m.mean_points();
  const std::size_t n = pts.size();
  if (speed.size() != n) throw Error(ErrorCode::InvalidArgument, "speed must be given per model station");
  Eigen::VectorXd dt(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double ds = distance(pts[i], pts[(i + 1) % n]);
    dt(static_cast<Eigen::Index>(i)) = std::max(ds / std::max(speed[i], 0.5), cfg.min_dt);
  }
  const auto nbf = static_cast<Eigen::Index>(m.promp.basis.n_bf);
  m.promp.mu_w.segment(m.promp.block_start(kVarDt), nbf) = fit_weights(dt, m.promp.basis);
}

/// Borders inset by the vehicle half-width.
struct Corridor {
  const Track* track = nullptr;
  double inset = 1.0;

  double lo(double s) const { return -track->width_right_at(s) + inset; }
  double hi(double s) const { return track->width_left_at(s) - inset; }
  /// Signed violation: + beyond the left edge, - beyond the right edge, 0 inside.
  double violation(double s, double d) const {
    if (d > hi(s)) return d - hi(s);
    if (d < lo(s)) return d - lo(s);
    return 0.0;
  }
};

enum class EventKind { LineCorrection, SpeedReduction, EnvelopeViolation, SpeedScaling, IntervalLocked, FloorReached };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::LineCorrection: return "line_correction";
    case EventKind::SpeedReduction: return "speed_reduction";
    case EventKind::EnvelopeViolation: return "envelope_violation";
    case EventKind::SpeedScaling: return "speed_scaling";
    case EventKind::IntervalLocked: return "interval_locked";
    case EventKind::FloorReached: return "floor_reached";
  }
  return "?";
}

struct AdaptationEvent {
  EventKind kind = EventKind::LineCorrection;
  double station = 0.0;  ///< track station
  std::optional<Observation> observation;
  std::string reason;
};

namespace detail {

// Line observation moving the mean line at the sample's station by the
// violation plus margin, kept inside the corridor.
inline std::optional<Observation> line_observation(const LogSample& smp, double violation, const AdaptationModel& m,
                                                   const Corridor& cor, double margin, double std_dev) {
  const double s_model = m.station_of(smp.state.position());
  const Vec2 q = m.mean_point(s_model);
  const Projection pq = cor.track->locate(q, smp.s);
  const double side = violation > 0.0 ? 1.0 : -1.0;
  double d_new = pq.d - side * (std::abs(violation) + margin);
  d_new = std::clamp(d_new, std::min(cor.lo(pq.s), cor.hi(pq.s)), std::max(cor.lo(pq.s), cor.hi(pq.s)));
  if (std::abs(d_new - pq.d) < 0.05) return std::nullopt;
  const Vec2 y = cor.track->reference().offset_point(pq.s, d_new) - m.frame.reference().position_at(s_model);
  Observation o;
  o.s_prime = s_model;
  o.variables = {kVarX, kVarY};
  o.y_star = Eigen::Vector2d(y.x, y.y);
  o.sigma_y = Eigen::Matrix2d::Identity() * std_dev * std_dev;
  return o;
}

// ahead >= 0 when s is at or after `from`, within one lap
inline double ahead_of(double s, double from, double length) { return wrap_s(s - from, length); }

}  // namespace detail

/// Corner blamed for a failure at `exit_station`: the corner containing it,
/// the next one if the exit lies in its braking zone, else the previous one.
inline std::optional<std::size_t> failure_corner(const TrackAnalysis& an, double exit_station) {
  if (an.corners.empty()) return std::nullopt;
  const std::size_t i = an.station_index(exit_station);
  if (auto k = an.corner_at(i)) return k;
  const std::size_t next = *an.next_corner(i);
  if (an.in_interval(i, an.brake_zones[next].station, an.corners[next].apex)) return next;
  return (next + an.corners.size() - 1) % an.corners.size();
}

/// Largest corridor violation before the apex of the corner where the lap
/// ended, as one (x, y) observation. Empty when there is none.
inline std::vector<Observation> analyse_driving_line(const LapLog& log, const TrackAnalysis& an,
                                                     const AdaptationModel& m, const Corridor& cor,
                                                     const AdaptationConfig& cfg = {}) {
  if (log.completed() || log.samples.empty()) return {};
  const auto k = failure_corner(an, log.exit_station);
  if (!k) return {};
  const CornerInfo& c = an.corners[*k];
  const double L = cor.track->length();
  const double from = wrap_s(c.entry_s - cfg.lookback, L);
  const double span = detail::ahead_of(c.apex_s, from, L);
  const LogSample* worst = nullptr;
  double worst_v = 0.0;
  for (const auto& smp : log.samples) {
    if (detail::ahead_of(smp.s, from, L) > span) continue;
    const double v = cor.violation(smp.s, smp.d);
    if (std::abs(v) > cfg.violation_tolerance && std::abs(v) > std::abs(worst_v)) {
      worst_v = v;
      worst = &smp;
    }
  }
  if (!worst) return {};
  auto o = detail::line_observation(*worst, worst_v, m, cor, cfg.pull_margin, cfg.line_std);
  if (!o) return {};
  return {*o};
}


namespace detail {

// Mean speed at a model station: chord over one station spacing divided by dt.
inline double mean_speed(const AdaptationModel& m, double s) {
  const double h = m.promp.basis.track_length / static_cast<double>(m.promp.basis.n_stations);
  const double L = m.promp.basis.track_length;
  const double s0 = std::min(s, L - h);
  return distance(m.mean_point(s0), m.mean_point(s0 + h)) / m.mean_dt(s0);
}

inline double curvature_limited_speed(const PerformanceEnvelope& env, double kappa) {
  return std::min(env.v_max, std::sqrt(env.lateral_limit() / std::max(std::abs(kappa), 1e-5)));
}

}  // namespace detail

/// Three dt observations at entry, apex and exit of corner `k`, each asking
/// for `decrement` less speed than the current mean. Throws FloorReached when
/// the apex would drop below the floor.
inline std::vector<Observation> adapt_speed(const TrackAnalysis& an, std::size_t k, const AdaptationModel& m,
                                            const Track& track, const AdaptationConfig& cfg = {}) {
  if (k >= an.corners.size()) throw Error(ErrorCode::InvalidArgument, "unknown corner");
  const CornerInfo& c = an.corners[k];
  const auto& ref = track.reference();
  const double apex = m.station_of(ref.position_at(c.apex_s));
  const double v_new = (1.0 - cfg.decrement) * detail::mean_speed(m, apex);
  const double floor = cfg.speed_floor * detail::curvature_limited_speed(cfg.envelope, an.kappa[c.apex]);
  if (v_new < floor) {
    throw Error(ErrorCode::FloorReached, "corner at s = " + std::to_string(c.apex_s) + " is at the speed floor");
  }
  std::vector<Observation> out;
  for (const double s : {c.entry_s, c.apex_s, c.exit_s}) {
    Observation o;
    o.s_prime = m.station_of(ref.position_at(s));
    o.variables = {kVarDt};
    const double y = m.mean_dt(o.s_prime) / (1.0 - cfg.decrement);
    o.y_star = Eigen::VectorXd::Constant(1, y);
    o.sigma_y = Eigen::MatrixXd::Constant(1, 1, std::pow(cfg.speed_rel_std * y, 2));
    out.push_back(std::move(o));
  }
  return out;
}

struct SlipResult {
  bool triggered = false;
  double station = 0.0;  ///< track station of the worst sample
  double peak = 0.0;     ///< rad
};

/// True when a slip angle or the balance metric stayed above its threshold
/// for longer than the dwell. Slip angles are zero at standstill.
inline SlipResult slip_check(const LapLog& log, const AdaptationConfig& cfg = {}) {
  SlipResult out;
  double run_start = -1.0;
  double run_peak = 0.0, run_s = 0.0;
  for (const auto& smp : log.samples) {
    const double slip = std::max(std::abs(smp.state.slip_front), std::abs(smp.state.slip_rear));
    const bool over = slip > cfg.slip_threshold || std::abs(smp.balance) > cfg.balance_threshold;
    if (!over) {
      run_start = -1.0;
      continue;
    }
    const double level = std::max(slip, std::abs(smp.balance));
    if (run_start < 0.0) {
      run_start = smp.t;
      run_peak = 0.0;
    }
    if (level > run_peak) {
      run_peak = level;
      run_s = smp.s;
    }
    if (smp.t - run_start >= cfg.slip_dwell && run_peak > out.peak) {
      out.triggered = true;
      out.peak = run_peak;
      out.station = run_s;
    }
  }
  return out;
}

/// One mild line observation per corridor excursion, at its peak, ordered by station.
inline std::vector<Observation> check_in_envelope(const LapLog& log, const AdaptationModel& m, const Corridor& cor,
                                                  const AdaptationConfig& cfg = {}) {
  std::vector<std::pair<double, Observation>> found;
  const LogSample* peak = nullptr;
  double peak_v = 0.0;
  auto close = [&] {
    if (peak) {
      if (auto o = detail::line_observation(*peak, peak_v, m, cor, 0.0, cfg.corridor_std)) {
        found.emplace_back(peak->s, *o);
      }
    }
    peak = nullptr;
    peak_v = 0.0;
  };
  for (const auto& smp : log.samples) {
    const double v = cor.violation(smp.s, smp.d);
    if (std::abs(v) <= cfg.excursion_tolerance) {
      close();
      continue;
    }
    if (peak && std::signbit(v) != std::signbit(peak_v)) close();
    if (std::abs(v) > std::abs(peak_v)) {
      peak_v = v;
      peak = &smp;
    }
  }
  close();
  std::stable_sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Observation> out;
  for (auto& f : found) out.push_back(std::move(f.second));
  return out;
}

/// A straight whose target speed was raised.
struct ScaledInterval {
  double begin_s = 0.0;  ///< track stations
  double end_s = 0.0;
  std::size_t begin = 0;  ///< track station index, identifies the straight
  double next_apex_s = 0.0;
  double peak_s = 0.0;    ///< where the raised target starts to fall
  bool locked = false;
  std::vector<std::pair<std::size_t, double>> restore;  ///< target vertex, speed before
};

struct ScalingResult {
  TargetTrajectory target;
  std::vector<ScaledInterval> scaled;
  bool changed = false;
};

namespace detail {

inline std::vector<double> vertex_stations(const TargetTrajectory& target, const Track& track) {
  std::vector<double> out(target.line.size());
  std::optional<double> hint;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = track.locate(target.line.points()[i], hint).s;
    hint = out[i];
  }
  return out;
}

}  // namespace detail

/// Raises the target on long straights that the lap did not drive at full
/// throttle, or drove faster than asked. The raise follows a full-envelope
/// acceleration curve plus margin from the achieved entry speed, blends in and
/// out with cosine windows and is capped by a braking curve back to the old
/// target. Straights listed in `locked` are left alone.
inline ScalingResult speed_scaling(const TargetTrajectory& target, const LapLog& log, const TrackAnalysis& an,
                                   const Track& track, const std::vector<ScaledInterval>& locked = {},
                                   const AdaptationConfig& cfg = {}) {
  ScalingResult out;
  out.target = target;
  if (!log.completed() || an.corners.empty() || log.samples.empty()) return out;
  const double L = track.length();
  const auto vs = detail::vertex_stations(target, track);
  const std::size_t nv = vs.size();
  const auto& st = target.line.stations();
  auto& v = out.target.speed;

  for (const auto& straight : an.straights) {
    if (straight.length < cfg.min_straight) continue;
    const bool is_locked = std::any_of(locked.begin(), locked.end(), [&](const ScaledInterval& l) {
      return l.locked && l.begin == straight.begin;
    });
    if (is_locked) continue;
    const std::size_t next = *an.next_corner(straight.end);
    // the straight ends where the target starts braking for the next corner
    double end_s = straight.start_s, v_peak = -1.0;
    for (std::size_t i = 0; i < nv; ++i) {
      if (detail::ahead_of(vs[i], straight.start_s, L) >= straight.length) continue;
      if (v[i] > v_peak) {
        v_peak = v[i];
        end_s = vs[i];
      }
    }
    const double span = detail::ahead_of(end_s, straight.start_s, L);
    if (span < cfg.min_straight) continue;
    auto inside = [&](double s) { return detail::ahead_of(s, straight.start_s, L) < span; };

    // how the lap drove it
    std::size_t count = 0, full = 0;
    bool slack = false;
    double v_entry = -1.0, entry_gap = 1e300;
    for (const auto& smp : log.samples) {
      if (!inside(smp.s)) continue;
      ++count;
      if (smp.action.throttle >= cfg.full_throttle) ++full;
      if (smp.state.speed() > target.speed_at(target.line.project(smp.state.position()).s) + cfg.overspeed) {
        slack = true;
      }
      const double gap = detail::ahead_of(smp.s, straight.start_s, L);
      if (gap < entry_gap) {
        entry_gap = gap;
        v_entry = smp.state.speed();
      }
    }
    if (count == 0) continue;
    const double share = static_cast<double>(full) / static_cast<double>(count);
    if (share >= cfg.coverage && !slack) continue;

    // vertices from the start of the straight to the next corner entry, in driving order
    const double reach = detail::ahead_of(an.corners[next].entry_s, straight.start_s, L);
    std::vector<std::size_t> idx;
    std::size_t first = 0;
    double best = 1e300;
    for (std::size_t i = 0; i < nv; ++i) {
      const double a = detail::ahead_of(vs[i], straight.start_s, L);
      if (a < best) {
        best = a;
        first = i;
      }
    }
    for (std::size_t k = 0; k < nv; ++k) {
      const std::size_t i = (first + k) % nv;
      if (detail::ahead_of(vs[i], straight.start_s, L) > reach) break;
      idx.push_back(i);
    }
    if (idx.size() < 3) continue;

    ScaledInterval rec;
    rec.begin_s = straight.start_s;
    rec.end_s = an.corners[next].entry_s;
    rec.begin = straight.begin;
    rec.next_apex_s = an.corners[next].apex_s;
    std::vector<double> raised(idx.size());
    double vf = std::max(v_entry, 0.5);
    double along = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (k > 0) {
        const double ds = st[idx[k - 1] + 1] - st[idx[k - 1]];
        vf = std::min(cfg.envelope.v_max, std::sqrt(vf * vf + 2.0 * cfg.envelope.accel_limit(vf) * ds));
        along += ds;
      }
      const double x = std::min(along / cfg.blend, 1.0);
      const double w = 0.5 * (1.0 - std::cos(kPi * x));
      raised[k] = (1.0 - w) * v[idx[k]] + w * (vf + cfg.scale_margin);
    }
    // brake back down to the old entry speed
    const double b = cfg.scale_brake * cfg.envelope.brake_limit();
    raised.back() = v[idx.back()];
    for (std::size_t k = idx.size() - 1; k-- > 0;) {
      const double ds = st[idx[k] + 1] - st[idx[k]];
      raised[k] = std::min(raised[k], std::sqrt(raised[k + 1] * raised[k + 1] + 2.0 * b * ds));
    }
    std::size_t peak = 0;
    double gain = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      raised[k] = std::max(raised[k], v[idx[k]]);
      if (raised[k] > v[idx[k]] + 1e-9) rec.restore.emplace_back(idx[k], v[idx[k]]);
      gain = std::max(gain, raised[k] - v[idx[k]]);
      if (raised[k] > raised[peak]) peak = k;
    }
    if (gain < cfg.overspeed) continue;
    rec.peak_s = vs[idx[peak]];
    for (std::size_t k = 0; k < idx.size(); ++k) v[idx[k]] = raised[k];
    out.scaled.push_back(std::move(rec));
    out.changed = true;
  }
  if (out.changed) out.target.provenance = Provenance::Scaled;
  return out;
}

/// Share of samples at full throttle between the start of the interval and
/// the point where its raised target starts to fall.
inline double full_throttle_share(const LapLog& log, const ScaledInterval& iv, double track_length,
                                  const AdaptationConfig& cfg = {}) {
  const double span = detail::ahead_of(iv.peak_s, iv.begin_s, track_length);
  std::size_t count = 0, full = 0;
  for (const auto& smp : log.samples) {
    if (detail::ahead_of(smp.s, iv.begin_s, track_length) >= span) continue;
    ++count;
    if (smp.action.throttle >= cfg.full_throttle) ++full;
  }
  return count ? static_cast<double>(full) / static_cast<double>(count) : 0.0;
}

/// Locks every unlocked interval whose next corner is the failed one and
/// puts its old target speeds back. Returns the newly locked positions.
inline std::vector<std::size_t> lock_implicated(std::vector<ScaledInterval>& intervals, double failed_apex_s,
                                                TargetTrajectory& target, double track_length,
                                                const AdaptationConfig& cfg = {}) {
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < intervals.size(); ++n) {
    auto& iv = intervals[n];
    if (iv.locked) continue;
    if (std::abs(circular_diff(iv.next_apex_s, failed_apex_s, track_length)) > cfg.lookback) continue;
    iv.locked = true;
    for (const auto& [i, v0] : iv.restore) {
      if (i < target.speed.size()) target.speed[i] = std::min(target.speed[i], v0);
    }
    out.push_back(n);
  }
  return out;
}

enum class Termination { Converged, BudgetExhausted, Unresolvable };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::BudgetExhausted: return "budget_exhausted";
    case Termination::Unresolvable: return "unresolvable";
  }
  return "?";
}

struct IterationRecord {
  std::size_t iteration = 0;
  LapStatus status = LapStatus::Timeout;
  double lap_time = std::numeric_limits<double>::quiet_NaN();
  double distance = 0.0;
  double exit_station = 0.0;
  double target_lap_time = 0.0;
  std::optional<std::size_t> corner;  ///< index into the initial analysis
  std::vector<AdaptationEvent> events;
  std::size_t observations = 0;
  double best_lap_time = std::numeric_limits<double>::quiet_NaN();
};

struct AdaptationState {
  std::size_t iteration = 0;
  AdaptationModel model;
  TargetTrajectory target;
  std::vector<LapLog> history;
  std::vector<Observation> pending;
  std::vector<IterationRecord> records;
  std::vector<ScaledInterval> intervals;
  TrackAnalysis initial_analysis;
  double best_lap_time = std::numeric_limits<double>::quiet_NaN();
  Termination termination = Termination::BudgetExhausted;
  std::string message;

  /// Laps blamed on each corner of the initial analysis.
  std::map<std::size_t, std::size_t> corner_iterations() const {
    std::map<std::size_t, std::size_t> out;
    for (const auto& r : records) {
      if (r.corner) ++out[*r.corner];
    }
    return out;
  }

  std::optional<std::size_t> first_completion() const {
    for (const auto& r : records) {
      if (r.status == LapStatus::Completed) return r.iteration;
    }
    return std::nullopt;
  }
};

namespace detail {

inline std::size_t nearest_corner(const TrackAnalysis& reference, double apex_s, double length) {
  std::size_t best = 0;
  double gap = 1e300;
  for (std::size_t k = 0; k < reference.corners.size(); ++k) {
    const double g = std::abs(circular_diff(reference.corners[k].apex_s, apex_s, length));
    if (g < gap) {
      gap = g;
      best = k;
    }
  }
  return best;
}

// Caps every station by a braking curve back from the next one; two sweeps
// settle the wrap-around. Returns true when anything moved.
inline bool limit_braking(std::vector<double>& v, const ClosedPath& line, double decel) {
  const std::size_t n = v.size();
  const auto& st = line.stations();
  bool moved = false;
  for (int sweep = 0; sweep < 2; ++sweep) {
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = n - 1 - k;
      const std::size_t j = (i + 1) % n;
      const double cap = std::sqrt(v[j] * v[j] + 2.0 * decel * (st[i + 1] - st[i]));
      if (v[i] > cap + 1e-6) {
        v[i] = cap;
        moved = true;
      }
    }
  }
  return moved;
}

inline void condition_all(AdaptationModel& m, const std::vector<Observation>& obs, const AdaptationConfig& cfg) {
  if (obs.empty()) return;
  ProMP p = m.promp;
  p.sigma_w += m.process_noise;
  p = with_masked_covariance(std::move(p), cfg.mask_bandwidth, cfg.mask_shape, false);
  for (const auto& o : obs) p = condition(p, o, true);
  m.promp = std::move(p);
  m.promp.sigma_w_masked.reset();
}

}  // namespace detail

/// Simulates the mean target lap after lap, conditioning the ProMP on what
/// went wrong, until a completed lap needs no change, the budget runs out, or
/// a corner stays infeasible at the speed floor. Policy and plant are only read.
inline AdaptationState adaptation_loop(const AdaptationModel& initial, const Track& track, const Policy& policy,
                                       const VehicleParams& params = {}, const AdaptationConfig& cfg = {}) {
  cfg.validate();
  AdaptationState st;
  st.model = initial;
  st.target = target_from_model(st.model, cfg);
  st.initial_analysis = analyse_track(st.target.line.points(), track, cfg.analysis);
  const Corridor cor{&track, cfg.half_width};
  const double L = track.length();
  std::map<std::size_t, std::size_t> floor_hits;

  for (std::size_t it = 0; it <= cfg.budget; ++it) {
    st.iteration = it;
    st.pending.clear();
    LapLog log = run_lap(policy, st.target, track, params, cfg.sim);
    const TrackAnalysis an = analyse_track(st.target.line.points(), track, cfg.analysis);

    IterationRecord rec;
    rec.iteration = it;
    rec.status = log.status;
    rec.lap_time = log.lap_time;
    rec.distance = log.distance;
    rec.exit_station = log.exit_station;
    rec.target_lap_time = st.target.lap_time();
    if (log.completed() && !(log.lap_time >= st.best_lap_time)) st.best_lap_time = log.lap_time;
    rec.best_lap_time = st.best_lap_time;

    bool scaled = false;
    bool restored = false;
    auto speed_down = [&](std::size_t k, const char* why) -> bool {
      const std::size_t id = detail::nearest_corner(st.initial_analysis, an.corners[k].apex_s, L);
      rec.corner = id;
      try {
        auto obs = adapt_speed(an, k, st.model, track, cfg);
        floor_hits[id] = 0;
        for (auto& o : obs) {
          rec.events.push_back({EventKind::SpeedReduction, an.corners[k].apex_s, o, why});
          st.pending.push_back(std::move(o));
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::FloorReached) throw;
        rec.events.push_back({EventKind::FloorReached, an.corners[k].apex_s, std::nullopt, e.what()});
        if (++floor_hits[id] >= cfg.floor_repeats) return false;
      }
      return true;
    };

    bool resolvable = true;
    if (!log.completed()) {
      const auto k = failure_corner(an, log.exit_station);
      // a failure right after a raised straight undoes the raise for good
      if (k) {
        for (const std::size_t n : lock_implicated(st.intervals, an.corners[*k].apex_s, st.target, L, cfg)) {
          restored = true;
          rec.events.push_back({EventKind::IntervalLocked, st.intervals[n].begin_s, std::nullopt,
                                "failure after the raised straight at s = " + std::to_string(st.intervals[n].begin_s)});
        }
      }
      if (restored) {
        set_speed(st.model, st.target.speed, cfg);
        rec.corner = detail::nearest_corner(st.initial_analysis, an.corners[*k].apex_s, L);
      } else if (k) {
        auto obs = analyse_driving_line(log, an, st.model, cor, cfg);
        for (auto& o : obs) {
          rec.events.push_back({EventKind::LineCorrection, log.exit_station, o, "pre-apex corridor violation"});
          st.pending.push_back(std::move(o));
        }
        const SlipResult slip = slip_check(log, cfg);
        if (obs.empty() || slip.triggered) {
          resolvable = speed_down(*k, obs.empty() ? "no line correction available" : "tire slip");
        } else {
          rec.corner = detail::nearest_corner(st.initial_analysis, an.corners[*k].apex_s, L);
        }
      }
    } else {
      const SlipResult slip = slip_check(log, cfg);
      if (slip.triggered && !an.corners.empty()) {
        resolvable = speed_down(*failure_corner(an, slip.station), "tire slip");
      }
      for (auto& o : check_in_envelope(log, st.model, cor, cfg)) {
        rec.events.push_back({EventKind::EnvelopeViolation, cor.track->locate(st.model.mean_point(o.s_prime)).s, o,
                              "corridor excursion on a completed lap"});
        st.pending.push_back(std::move(o));
      }
    }
    rec.observations = st.pending.size();
    st.history.push_back(std::move(log));
    const LapLog& last = st.history.back();

    if (!resolvable) {
      st.records.push_back(std::move(rec));
      st.termination = Termination::Unresolvable;
      st.message = "corner stays infeasible at the speed floor";
      return st;
    }
    if (it == cfg.budget) {
      st.records.push_back(std::move(rec));
      break;
    }

    detail::condition_all(st.model, st.pending, cfg);
    const bool reduced = std::any_of(rec.events.begin(), rec.events.end(),
                                     [](const AdaptationEvent& e) { return e.kind == EventKind::SpeedReduction; });
    if (reduced) {
      // a slower corner must stay reachable under braking
      TargetTrajectory t = target_from_model(st.model, cfg);
      if (detail::limit_braking(t.speed, t.line, cfg.reduction_brake * cfg.envelope.brake_limit())) {
        set_speed(st.model, t.speed, cfg);
      }
    }
    if (last.completed() && cfg.scaling) {
      const TargetTrajectory current = target_from_model(st.model, cfg);
      const TrackAnalysis an2 = analyse_track(current.line.points(), track, cfg.analysis);
      ScalingResult sr = speed_scaling(current, last, an2, track, st.intervals, cfg);
      if (sr.changed) {
        scaled = true;
        set_speed(st.model, sr.target.speed, cfg);
        for (auto& iv : sr.scaled) {
          rec.events.push_back({EventKind::SpeedScaling, iv.begin_s, std::nullopt,
                                "raised straight from s = " + std::to_string(iv.begin_s)});
          // the straight may have been raised before; keep the oldest restore point
          auto old = std::find_if(st.intervals.begin(), st.intervals.end(),
                                  [&](const ScaledInterval& o) { return o.begin == iv.begin; });
          if (old == st.intervals.end()) {
            st.intervals.push_back(std::move(iv));
          } else {
            old->end_s = iv.end_s;
            old->peak_s = iv.peak_s;
          }
        }
      }
    }
    if (last.completed() && rec.events.empty() && !scaled) {
      st.records.push_back(std::move(rec));
      st.termination = Termination::Converged;
      return st;
    }
    st.target = target_from_model(st.model, cfg);
    st.records.push_back(std::move(rec));
  }
  st.termination = Termination::BudgetExhausted;
  return st;
}

}  // namespace racedriver
