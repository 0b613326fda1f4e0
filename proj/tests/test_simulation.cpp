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

#include <cmath>

#include "racedriver/elastic_band.hpp"
#include "racedriver/simulation.hpp"
#include "racedriver/synthetic.hpp"
#include "racedriver/track_analysis.hpp"

namespace racedriver {
namespace {

PerformanceEnvelope scaled(double scale) {
  PerformanceEnvelope env;
  env.scale = scale;
  return env;
}

TEST(RunLap, SlowProfileOnOvalCompletes) {
  const Track track = synthetic::make_oval_track();
  const auto target = make_target(build_mean_line(track).line, scaled(0.7));
  const PreviewController pc(PolicyConfig::for_vehicle({}));
  const LapLog log = run_lap(pc, target, track);
  ASSERT_TRUE(log.completed()) << log.message;
  EXPECT_TRUE(std::isfinite(log.lap_time));
  EXPECT_NEAR(log.lap_time, target.lap_time(), 0.1 * target.lap_time());
  EXPECT_DOUBLE_EQ(log.distance, track.length());
  // time is monotone and the station wraps exactly once
  int wraps = 0;
  for (std::size_t i = 1; i < log.samples.size(); ++i) {
    EXPECT_GT(log.samples[i].t, log.samples[i - 1].t);
    if (log.samples[i].s < log.samples[i - 1].s - 0.5 * track.length()) ++wraps;
  }
  EXPECT_EQ(wraps, 1);
  EXPECT_LT(log.max_abs_balance, 0.1);
}

TEST(RunLap, OverSpeedAtHairpinFailsInsideTheCorner) {
  const Track track = synthetic::make_layout_track("long", synthetic::long_straight_layout());
  const auto line = build_mean_line(track).line;
  TargetTrajectory target = make_target(line, scaled(0.8));
  const auto an = analyse_track(line, track);
  ASSERT_EQ(an.status, AnalysisStatus::Ok);
  // the first hairpin: the corner with the largest curvature
  const CornerInfo* hairpin = &an.corners.front();
  for (const auto& c : an.corners) {
    if (std::abs(c.peak_kappa) > std::abs(hairpin->peak_kappa)) hairpin = &c;
  }
  const double apex_v = target.speed_at(hairpin->apex_s);
  // demand twice the feasible speed from well before entry through the apex
  for (std::size_t i = 0; i < target.speed.size(); ++i) {
    const double s = target.line.station(i);
    const double from_entry = circular_diff(s, hairpin->entry_s, track.length());
    const double to_apex = circular_diff(hairpin->apex_s, s, track.length());
    if (from_entry > -150.0 && to_apex > 0.0) target.speed[i] = std::max(target.speed[i], 2.0 * apex_v);
  }
  const LapLog log = run_lap(PreviewController(PolicyConfig::for_vehicle({})), target, track);
  EXPECT_FALSE(log.completed());
  EXPECT_EQ(log.status, LapStatus::OffTrack);
  EXPECT_TRUE(an.in_interval(an.station_index(log.exit_station), hairpin->entry, hairpin->exit))
      << "exit at " << log.exit_station << ", corner " << hairpin->entry_s << " .. " << hairpin->exit_s;
}

TEST(RunLap, ZeroBudgetIsIncomplete) {
  const Track track = synthetic::make_oval_track();
  const auto target = make_target(track.reference().points(), scaled(0.5));
  SimConfig cfg;
  cfg.timeout = 0.0;
  const LapLog log = run_lap(PreviewController{}, target, track, {}, cfg);
  EXPECT_EQ(log.status, LapStatus::Timeout);
  EXPECT_EQ(log.distance, 0.0);
  EXPECT_TRUE(log.samples.empty());
}

TEST(RunLap, Deterministic) {
  const Track track = synthetic::make_oval_track();
  const auto target = make_target(build_mean_line(track).line, scaled(0.8));
  const PreviewController pc(PolicyConfig::for_vehicle({}));
  const LapLog a = run_lap(pc, target, track);
  const LapLog b = run_lap(pc, target, track);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    ASSERT_EQ(a.samples[i].state.x, b.samples[i].state.x);
    ASSERT_EQ(a.samples[i].action.steer, b.samples[i].action.steer);
  }
  EXPECT_EQ(a.lap_time, b.lap_time);
}

TEST(RunLap, RejectsBadStep) {
  const Track track = synthetic::make_oval_track();
  const auto target = make_target(track.reference().points(), scaled(0.5));
  SimConfig cfg;
  cfg.dt = 0.05;
  EXPECT_THROW(run_lap(PreviewController{}, target, track, {}, cfg), Error);
}

}  // namespace
}  // namespace racedriver
