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


#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <set>
#include <cmath>

#include "racedriver/adaptation.hpp"
#include "racedriver/elastic_band.hpp"
#include "racedriver/synthetic.hpp"

namespace racedriver {
namespace {

struct Fixture {
  Track track;
  Polyline line;
  TrackAnalysis analysis;
  TargetTrajectory target;
  AdaptationModel model;
};

Fixture make_fixture(const std::string& name, const synthetic::Layout& layout, double scale) {
  Fixture f{synthetic::make_layout_track(name, layout), {}, {}, {}, {}};
  f.line = build_mean_line(f.track).line;
  f.analysis = analyse_track(f.line, f.track);
  PerformanceEnvelope env;
  env.scale = scale;
  f.target = make_target(f.line, env);
  f.model = make_adaptation_model(f.target, f.track, AdaptationConfig{});
  return f;
}

const Fixture& six() {
  static const Fixture f = make_fixture("six", synthetic::six_corner_layout(), 0.85);
  return f;
}

// Log driving along the reference from station 0 to `to`, lateral offset d(s).
template <class D>
LapLog constructed_log(const Track& track, double to, D d, LapStatus status) {
  LapLog log;
  const auto& ref = track.reference();
  double t = 0.0;
  for (double s = 0.0; s < to; s += 1.0, t += 0.05) {
    LogSample smp;
    smp.t = t;
    smp.s = s;
    smp.d = d(s);
    const Vec2 p = ref.offset_point(s, smp.d);
    smp.state.x = p.x;
    smp.state.y = p.y;
    smp.state.yaw = ref.heading_at(s);
    smp.state.vx = 20.0;
    log.samples.push_back(smp);
  }
  log.status = status;
  log.exit_station = to;
  if (status == LapStatus::Completed) log.lap_time = t;
  return log;
}

// Bump of height h above the left corridor edge centred at s0, 10 m wide.
auto bump(const Corridor& cor, double s0, double h) {
  return [=](double s) {
    const double u = std::abs(s - s0);
    return u < 5.0 ? cor.hi(s) + h * (1.0 - u / 5.0) : 0.0;
  };
}

Corridor corridor(const Track& t) { return Corridor{&t, AdaptationConfig{}.half_width}; }

// Lateral offset on `track` of the model point an observation asks for.
double observed_offset(const AdaptationModel& m, const Observation& o, const Track& track, double hint) {
  const Vec2 p = m.frame.reference().position_at(o.s_prime) + Vec2{o.y_star(0), o.y_star(1)};
  return track.locate(p, hint).d;
}

TEST(AnalyseDrivingLine, PreApexViolationGivesOneObservationInsideCorridor) {
  const auto& f = six();
  const auto cor = corridor(f.track);
  const CornerInfo& c = f.analysis.corners[1];
  const double at = c.apex_s - 30.0;
  const auto log = constructed_log(f.track, c.apex_s + 2.0, bump(cor, at, 0.8), LapStatus::OffTrack);
  const auto obs = analyse_driving_line(log, f.analysis, f.model, cor);
  ASSERT_EQ(obs.size(), 1u);
  const double s_obs = f.model.station_of(f.track.reference().position_at(at));
  EXPECT_NEAR(circular_diff(obs[0].s_prime, s_obs, f.track.length()), 0.0, 3.0);
  const double d = observed_offset(f.model, obs[0], f.track, at);
  EXPECT_LE(d, cor.hi(at) + 1e-6);
  EXPECT_GE(d, cor.lo(at) - 1e-6);
  EXPECT_EQ(obs[0].variables, (std::vector<std::size_t>{kVarX, kVarY}));
}

TEST(AnalyseDrivingLine, PureSpeedFailureGivesNothing) {
  const auto& f = six();
  const auto cor = corridor(f.track);
  const double exit = f.analysis.corners[1].apex_s;
  const auto log = constructed_log(f.track, exit, [](double) { return 0.0; }, LapStatus::OffTrack);
  EXPECT_TRUE(analyse_driving_line(log, f.analysis, f.model, cor).empty());
}

TEST(AnalyseDrivingLine, PostApexViolationIsIgnored) {
  const auto& f = six();
  const auto cor = corridor(f.track);
  const CornerInfo& c = f.analysis.corners[1];
  const double at = c.apex_s + 0.5 * (c.exit_s - c.apex_s);
  ASSERT_GT(at - c.apex_s, 6.0);
  const auto log = constructed_log(f.track, at + 1.0, bump(cor, at, 0.8), LapStatus::OffTrack);
  EXPECT_TRUE(analyse_driving_line(log, f.analysis, f.model, cor).empty());
}

TEST(AnalyseDrivingLine, CompletedLapGivesNothing) {
  const auto& f = six();
  const auto cor = corridor(f.track);
  const auto log = constructed_log(f.track, f.track.length(), bump(cor, 100.0, 0.8), LapStatus::Completed);
  EXPECT_TRUE(analyse_driving_line(log, f.analysis, f.model, cor).empty());
}

TEST(FailureCorner, ExitInsideCornerBlamesThatCorner) {
  const auto& f = six();
  for (std::size_t k = 0; k < f.analysis.corners.size(); ++k) {
    const auto got = failure_corner(f.analysis, f.analysis.corners[k].apex_s);
    ASSERT_TRUE(got);
    EXPECT_EQ(*got, k);
  }
}

TEST(AdaptSpeed, ThreeObservationsAtEntryApexExit) {
  const auto& f = six();
  const CornerInfo& c = f.analysis.corners[2];
  const auto obs = adapt_speed(f.analysis, 2, f.model, f.track);
  ASSERT_EQ(obs.size(), 3u);
  const auto& ref = f.track.reference();
  const double want[3] = {c.entry_s, c.apex_s, c.exit_s};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(obs[i].variables, (std::vector<std::size_t>{kVarDt}));
    EXPECT_NEAR(obs[i].s_prime, f.model.station_of(ref.position_at(want[i])), 1e-9);
    // asks for a longer step: 5% less speed
    EXPECT_NEAR(obs[i].y_star(0), f.model.mean_dt(obs[i].s_prime) / 0.95, 1e-12);
  }
}

TEST(AdaptSpeed, RepeatedReductionDecreasesUntilFloor) {
  const auto& f = six();
  AdaptationConfig cfg;
  AdaptationModel m = f.model;
  const std::size_t k = 2;
  const double apex = m.station_of(f.track.reference().position_at(f.analysis.corners[k].apex_s));
  double prev = detail::mean_speed(m, apex);
  bool floor = false;
  for (int i = 0; i < 100 && !floor; ++i) {
    try {
      const auto obs = adapt_speed(f.analysis, k, m, f.track, cfg);
      detail::condition_all(m, obs, cfg);
      const double now = detail::mean_speed(m, apex);
      EXPECT_LT(now, prev);
      prev = now;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::FloorReached);
      floor = true;
    }
  }
  EXPECT_TRUE(floor);
  const double limit = detail::curvature_limited_speed(cfg.envelope, f.analysis.kappa[f.analysis.corners[k].apex]);
  EXPECT_GE(prev, cfg.speed_floor * limit * 0.95);
}

TEST(AdaptSpeed, UnknownCornerThrows) {
  const auto& f = six();
  EXPECT_THROW(adapt_speed(f.analysis, 99, f.model, f.track), Error);
}

TEST(AdaptSpeed, ReductionIsLocalToTheCorner) {
  // speed change at a non-adjacent corner stays below 1% of the local change
  const auto& f = six();
  AdaptationConfig cfg;
  AdaptationModel m = f.model;
  const auto& ref = f.track.reference();
  const double a = m.station_of(ref.position_at(f.analysis.corners[0].apex_s));
  const double b = m.station_of(ref.position_at(f.analysis.corners[3].apex_s));
  const double va = detail::mean_speed(m, a), vb = detail::mean_speed(m, b);
  detail::condition_all(m, adapt_speed(f.analysis, 0, m, f.track, cfg), cfg);
  const double da = std::abs(detail::mean_speed(m, a) - va);
  const double db = std::abs(detail::mean_speed(m, b) - vb);
  EXPECT_GT(da, 0.02 * va);
  EXPECT_LT(db, 0.01 * da);
}

TEST(SlipCheck, CleanConservativeLapIsQuiet) {
  const auto f = make_fixture("six", synthetic::six_corner_layout(), 0.6);
  const PreviewController pc(PolicyConfig::for_vehicle({}));
  const auto log = run_lap(pc, f.target, f.track);
  ASSERT_TRUE(log.completed());
  EXPECT_FALSE(slip_check(log).triggered);
}

TEST(SlipCheck, OverSpeedCornerTriggersThere) {
  const auto& f = six();
  TargetTrajectory t = f.target;
  const CornerInfo& c = f.analysis.corners[1];
  const double L = f.track.length();
  for (std::size_t i = 0; i < t.speed.size(); ++i) {
    const double s = f.track.locate(t.line.points()[i]).s;
    if (circular_diff(s, c.entry_s, L) > -60.0 && circular_diff(c.exit_s, s, L) > 0.0) t.speed[i] *= 1.6;
  }
  const PreviewController pc(PolicyConfig::for_vehicle({}));
  const auto log = run_lap(pc, t, f.track);
  const auto r = slip_check(log);
  ASSERT_TRUE(r.triggered);
  const auto k = failure_corner(f.analysis, r.station);
  ASSERT_TRUE(k);
  EXPECT_EQ(*k, 1u);
}

TEST(SlipCheck, ShortSpikeBelowDwellIsIgnored) {
  const auto& f = six();
  auto log = constructed_log(f.track, 200.0, [](double) { return 0.0; }, LapStatus::Completed);
  for (auto& smp : log.samples) {
    if (smp.s >= 100.0 && smp.s < 102.0) smp.state.slip_rear = 0.4;  // 0.1 s
  }
  EXPECT_FALSE(slip_check(log).triggered);
  for (auto& smp : log.samples) {
    if (smp.s >= 100.0 && smp.s < 110.0) smp.state.slip_rear = 0.4;  // 0.5 s
  }
  const auto r = slip_check(log);
  EXPECT_TRUE(r.triggered);
  EXPECT_GE(r.station, 100.0);
  EXPECT_LT(r.station, 110.0);
}

TEST(SlipCheck, StandstillIsQuiet) {
  // full steering lock at rest for 5 s
  LapLog log;
  VehicleState state;
  Action a;
  a.steer = VehicleParams{}.max_steer;
  for (int i = 0; i < 1000; ++i) {
    state = step(state, a, 0.005);
    LogSample smp;
    smp.t = 0.005 * i;
    smp.state = state;
    smp.action = a;
    smp.balance = balance_metric(state);
    log.samples.push_back(smp);
  }
  EXPECT_FALSE(slip_check(log).triggered);
}

TEST(CheckInEnvelope, InsideCorridorIsEmpty) {
  const auto& f = six();
  const auto log = constructed_log(f.track, f.track.length(), [](double) { return 0.0; }, LapStatus::Completed);
  EXPECT_TRUE(check_in_envelope(log, f.model, corridor(f.track)).empty());
}

TEST(CheckInEnvelope, OneExcursionGivesOneObservationThere) {
  const auto& f = six();
  const auto cor = corridor(f.track);
  const double at = f.analysis.corners[2].apex_s;
  const auto log = constructed_log(f.track, f.track.length(), bump(cor, at, 0.3), LapStatus::Completed);
  const auto obs = check_in_envelope(log, f.model, cor);
  ASSERT_EQ(obs.size(), 1u);
  const double s_obs = f.model.station_of(f.track.reference().position_at(at));
  EXPECT_NEAR(circular_diff(obs[0].s_prime, s_obs, f.track.length()), 0.0, 3.0);
  // milder than a failure correction
  EXPECT_NEAR(obs[0].sigma_y(0, 0), 0.25, 1e-12);
  const double d = observed_offset(f.model, obs[0], f.track, at);
  EXPECT_LE(d, cor.hi(at) + 1e-6);
}

TEST(CheckInEnvelope, ExcursionsAreOrderedByStation) {
  const auto& f = six();
  const auto cor = corridor(f.track);
  const auto& cs = f.analysis.corners;
  const auto a = bump(cor, cs[4].apex_s, 0.4), b = bump(cor, cs[1].apex_s, 0.3), c = bump(cor, cs[3].apex_s, 0.5);
  const auto log = constructed_log(f.track, f.track.length(), [&](double s) { return a(s) + b(s) + c(s); },
                                   LapStatus::Completed);
  const auto obs = check_in_envelope(log, f.model, cor);
  ASSERT_EQ(obs.size(), 3u);
  for (std::size_t i = 1; i < obs.size(); ++i) EXPECT_LT(obs[i - 1].s_prime, obs[i].s_prime);
}

TEST(SpeedScaling, CircleIsUnchanged) {
  const Track track = synthetic::make_circle_track(100.0);
  PerformanceEnvelope env;
  env.scale = 0.6;
  const auto target = make_target(track.reference().points(), env);
  const auto an = analyse_track(target.line.points(), track);
  const PreviewController pc(PolicyConfig::for_vehicle({}));
  const auto log = run_lap(pc, target, track);
  ASSERT_TRUE(log.completed());
  const auto r = speed_scaling(target, log, an, track);
  EXPECT_FALSE(r.changed);
  EXPECT_TRUE(r.scaled.empty());
  EXPECT_EQ(r.target.speed, target.speed);
}

struct LongStraight {
  Fixture f = make_fixture("long", synthetic::long_straight_layout(), 0.6);
  PreviewController pc{PolicyConfig::for_vehicle({})};
  LapLog before = run_lap(pc, f.target, f.track);
};

const LongStraight& long_straight() {
  static const LongStraight l;
  return l;
}

TEST(SpeedScaling, ScaledStraightsRunAtFullThrottle) {
  const auto& l = long_straight();
  ASSERT_TRUE(l.before.completed());
  const auto r = speed_scaling(l.f.target, l.before, l.f.analysis, l.f.track);
  ASSERT_TRUE(r.changed);
  ASSERT_FALSE(r.scaled.empty());
  for (std::size_t i = 0; i < r.target.speed.size(); ++i) EXPECT_GE(r.target.speed[i], l.f.target.speed[i] - 1e-9);
  const auto after = run_lap(l.pc, r.target, l.f.track);
  ASSERT_TRUE(after.completed());
  EXPECT_LT(after.lap_time, l.before.lap_time);
  for (const auto& iv : r.scaled) {
    EXPECT_LT(full_throttle_share(l.before, iv, l.f.track.length()), 0.9);
    EXPECT_GE(full_throttle_share(after, iv, l.f.track.length()), 0.9);
  }
}

TEST(SpeedScaling, LockedIntervalsAreNotRescaled) {
  const auto& l = long_straight();
  auto r = speed_scaling(l.f.target, l.before, l.f.analysis, l.f.track);
  ASSERT_FALSE(r.scaled.empty());
  for (auto& iv : r.scaled) iv.locked = true;
  const auto again = speed_scaling(l.f.target, l.before, l.f.analysis, l.f.track, r.scaled);
  EXPECT_FALSE(again.changed);
  EXPECT_EQ(again.target.speed, l.f.target.speed);
}

TEST(SpeedScaling, FailureAfterScalingLocksAndRestores) {
  const auto& l = long_straight();
  AdaptationConfig cfg;
  cfg.scale_brake = 1.6;  // brakes later than the car can
  auto r = speed_scaling(l.f.target, l.before, l.f.analysis, l.f.track, {}, cfg);
  ASSERT_TRUE(r.changed);
  const auto failed = run_lap(l.pc, r.target, l.f.track);
  ASSERT_FALSE(failed.completed());
  const auto k = failure_corner(l.f.analysis, failed.exit_station);
  ASSERT_TRUE(k);
  TargetTrajectory t = r.target;
  const auto locked = lock_implicated(r.scaled, l.f.analysis.corners[*k].apex_s, t, l.f.track.length(), cfg);
  ASSERT_EQ(locked.size(), 1u);
  EXPECT_TRUE(r.scaled[locked[0]].locked);
  for (const auto& [i, v] : r.scaled[locked[0]].restore) EXPECT_EQ(t.speed[i], l.f.target.speed[i]);
  // a second failure does not lock it twice
  EXPECT_TRUE(lock_implicated(r.scaled, l.f.analysis.corners[*k].apex_s, t, l.f.track.length(), cfg).empty());
}

TEST(AdaptationLoop, ScalingAloneImprovesConservativeTarget) {
  const auto& l = long_straight();
  AdaptationConfig cfg;
  cfg.budget = 3;
  const auto st = adaptation_loop(make_adaptation_model(l.f.target, l.f.track, cfg), l.f.track, l.pc, {}, cfg);
  ASSERT_GE(st.records.size(), 2u);
  ASSERT_TRUE(st.records[0].status == LapStatus::Completed);
  EXPECT_LT(st.best_lap_time, st.records[0].lap_time);
}

TEST(AdaptationLoop, ZeroBudgetRunsOnlyTheFirstLap) {
  const auto& l = long_straight();
  AdaptationConfig cfg;
  cfg.budget = 0;
  const auto st = adaptation_loop(make_adaptation_model(l.f.target, l.f.track, cfg), l.f.track, l.pc, {}, cfg);
  ASSERT_EQ(st.records.size(), 1u);
  EXPECT_EQ(st.records[0].iteration, 0u);
  EXPECT_EQ(st.termination, Termination::BudgetExhausted);
}

TEST(AdaptationLoop, RecoversOverSpeedCorners) {
  const auto& f = six();
  TargetTrajectory t = f.target;
  const double L = f.track.length();
  for (const std::size_t k : {std::size_t{1}, std::size_t{3}}) {
    const CornerInfo& c = f.analysis.corners[k];
    for (std::size_t i = 0; i < t.speed.size(); ++i) {
      const double s = t.line.station(i);
      if (circular_diff(s, c.entry_s, L) > -60.0 && circular_diff(c.exit_s, s, L) > 0.0) t.speed[i] *= 1.2;
    }
  }
  const PreviewController pc(PolicyConfig::for_vehicle({}));
  const PolicyConfig policy_before = pc.config();
  const VehicleParams params;
  AdaptationConfig cfg;
  const auto st = adaptation_loop(make_adaptation_model(t, f.track, cfg), f.track, pc, params, cfg);

  // fails at two corners first
  std::set<std::size_t> failing;
  for (const auto& r : st.records) {
    if (r.status != LapStatus::Completed && r.corner) failing.insert(*r.corner);
  }
  EXPECT_GE(failing.size(), 2u);
  const auto first = st.first_completion();
  ASSERT_TRUE(first);
  EXPECT_LE(*first, 20u);
  for (const auto& [k, n] : st.corner_iterations()) EXPECT_LE(n, 5u) << "corner " << k;

  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : st.records) {
    if (!std::isnan(r.best_lap_time)) {
      EXPECT_LE(r.best_lap_time, best);
      best = r.best_lap_time;
    }
  }
  EXPECT_EQ(st.history.size(), st.records.size());
  EXPECT_EQ(std::memcmp(&pc.config(), &policy_before, sizeof(PolicyConfig)), 0);
}

TEST(AdaptationConfigTest, RejectsBadValues) {
  AdaptationConfig cfg;
  cfg.decrement = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
}

}  // namespace
}  // namespace racedriver
