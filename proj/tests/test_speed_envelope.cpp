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
#include <random>

#include "racedriver/speed_envelope.hpp"
#include "racedriver/synthetic.hpp"
#include "oracles.hpp"

namespace racedriver {
namespace {

PerformanceEnvelope simple_envelope(double ay, double ax, double brake, double vmax) {
  PerformanceEnvelope env;
  env.ay_max = ay;
  env.ax_acc = AccelerationTable::constant(ax);
  env.ax_brake = brake;
  env.v_max = vmax;
  return env;
}

PerformanceEnvelope power_limited_envelope() {
  PerformanceEnvelope env = simple_envelope(11.0, 8.0, 11.0, 75.0);
  env.ax_acc = {{0.0, 20.0, 40.0, 60.0, 80.0}, {8.0, 7.0, 4.5, 2.6, 1.2}};
  return env;
}

TEST(SpeedProfile, CircleIsPureLateralLimit) {
  const auto env = simple_envelope(10.0, 5.0, 10.0, 100.0);
  const auto p = estimate_speed(synthetic::circle_points(50.0, 1.0), env);
  for (double v : p.v) EXPECT_NEAR(v, 22.3607, 0.005 * 22.3607);
  EXPECT_TRUE(p.converged);
}

TEST(SpeedProfile, StraightFollowsConstantAccelerationKinematics) {
  // 100 m of R=50 arc, then a 1000 m straight with very strong brakes.
  std::vector<double> ds(1100, 1.0), kappa(1100, 0.0);
  for (std::size_t i = 0; i < 100; ++i) kappa[i] = 1.0 / 50.0;
  const auto env = simple_envelope(10.0, 5.0, 1000.0, 60.0);
  const auto p = estimate_speed(ds, kappa, env);
  const double v0 = std::sqrt(500.0);
  for (std::size_t i = 100; i < 1090; ++i) {
    const double s = static_cast<double>(i - 100);
    const double expected = std::min(60.0, std::sqrt(v0 * v0 + 2.0 * 5.0 * s));
    EXPECT_NEAR(p.v[i], expected, 1e-9) << i;
  }
}

TEST(SpeedProfile, OvalLapTimeMatchesTimeIntegration) {
  const double straight = 400.0, radius = 60.0;
  for (const auto& env : {simple_envelope(10.0, 5.0, 10.0, 100.0), power_limited_envelope()}) {
    const auto p = estimate_speed(synthetic::make_oval_track(straight, radius).reference().points(), env);
    const double oracle_time = oracle::oval_lap_time(straight, radius, env.ay_max, env.ax_brake, env.v_max,
                                                     [&](double v) { return env.ax_acc.at(v); });
    EXPECT_NEAR(p.lap_time, oracle_time, 0.01 * oracle_time);
  }
}

TEST(SpeedProfile, LapTimeIsSumOfIncrements) {
  const auto p = estimate_speed(synthetic::make_layout_track("six", synthetic::six_corner_layout()).reference().points(),
                                power_limited_envelope());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_GT(p.v[i], 0.0);
    EXPECT_NEAR(p.dt[i], p.ds[i] / (0.5 * (p.v[i] + p.v[(i + 1) % p.size()])), 1e-12);
    sum += p.dt[i];
  }
  EXPECT_NEAR(p.lap_time, sum, 1e-9);
}

TEST(SpeedProfile, ZeroLengthLineIsDegenerate) {
  const Polyline pts(10, Vec2{1.0, 2.0});
  EXPECT_THROW(estimate_speed(pts, PerformanceEnvelope{}), Error);
  try {
    estimate_speed(std::vector<double>(10, 0.0), std::vector<double>(10, 0.0), PerformanceEnvelope{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateLine);
  }
}

// Property: on random curvature profiles the speed stays below the curvature
// limit and every implied acceleration fits the scaled friction ellipse.
TEST(SpeedProfile, FrictionEllipseRespectedOnRandomProfiles) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 300 + static_cast<std::size_t>(u(rng) * 400);
    std::vector<double> ds(n), kappa(n);
    const double f1 = 1.0 + std::floor(6.0 * u(rng)), f2 = 3.0 + std::floor(9.0 * u(rng));
    const double a1 = 0.02 * u(rng), a2 = 0.015 * u(rng);
    for (std::size_t i = 0; i < n; ++i) {
      ds[i] = 1.0 + 2.0 * u(rng);
      const double t = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
      kappa[i] = a1 * std::sin(f1 * t) + a2 * std::sin(f2 * t + 1.0);
    }
    auto env = power_limited_envelope();
    env.scale = 0.5 + 0.5 * u(rng);
    const auto p = estimate_speed(ds, kappa, env);
    ASSERT_TRUE(p.converged);
    const double ay = env.lateral_limit();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = (i + 1) % n;
      const double v_lim = std::min(env.v_max, std::sqrt(ay / std::max(std::abs(kappa[i]), 1e-5)));
      EXPECT_LE(p.v[i], v_lim * (1.0 + 1e-12));
      const double ax = (p.v[j] * p.v[j] - p.v[i] * p.v[i]) / (2.0 * ds[i]);
      if (ax > 0.0) {
        const double lat = p.v[i] * p.v[i] * kappa[i] / ay;
        const double lon = ax / env.accel_limit(p.v[i]);
        EXPECT_LE(lat * lat + lon * lon, 1.0 + 1e-6) << "station " << i;
      } else if (ax < 0.0) {
        const double lat = p.v[j] * p.v[j] * kappa[j] / ay;
        const double lon = ax / env.brake_limit();
        EXPECT_LE(lat * lat + lon * lon, 1.0 + 1e-6) << "station " << i;
      }
    }
  }
}

TEST(SpeedProfile, LapTimeNonIncreasingInScale) {
  const auto pts = synthetic::make_layout_track("six", synthetic::six_corner_layout()).reference().points();
  double prev = 1e300;
  for (double scale = 0.3; scale <= 1.0 + 1e-12; scale += 0.05) {
    auto env = power_limited_envelope();
    env.scale = std::min(scale, 1.0);
    const double t = estimate_speed(pts, env).lap_time;
    EXPECT_LE(t, prev + 1e-9);
    prev = t;
  }
}

TEST(SpeedProfile, LapTimeNonDecreasingInLength) {
  const auto env = power_limited_envelope();
  std::vector<double> kappa(400, 0.0);
  for (std::size_t i = 100; i < 150; ++i) kappa[i] = 0.02;
  for (std::size_t i = 300; i < 350; ++i) kappa[i] = -0.015;
  double prev = 0.0;
  for (double step : {1.0, 1.2, 1.5, 2.0}) {
    const double t = estimate_speed(std::vector<double>(400, step), kappa, env).lap_time;
    EXPECT_GE(t, prev);
    prev = t;
  }
}

TEST(ExpandEnvelope, Schedule) {
  PerformanceEnvelope env;
  env.scale = 1.0;
  EXPECT_EQ(expand_envelope(env).scale, 1.0);
  env.scale = 0.7;
  EXPECT_DOUBLE_EQ(expand_envelope(env).scale, 0.8);
  env.scale = 0.95;
  EXPECT_EQ(expand_envelope(env).scale, 1.0);
  const auto sched = envelope_schedule();
  ASSERT_EQ(sched.size(), 4u);
  EXPECT_DOUBLE_EQ(sched[0], 0.7);
  EXPECT_DOUBLE_EQ(sched[3], 1.0);
}

TEST(ExpandEnvelope, LapTimeStrictlyDecreasesAlongSchedule) {
  const auto pts = synthetic::circle_points(80.0, 1.0);
  auto env = power_limited_envelope();
  env.scale = 0.7;
  double prev = estimate_speed(pts, env).lap_time;
  while (env.scale < 1.0) {
    env = expand_envelope(env);
    const double t = estimate_speed(pts, env).lap_time;
    EXPECT_LT(t, prev);
    prev = t;
  }
}

TEST(AccelerationTable, InterpolatesAndHoldsEnds) {
  const AccelerationTable t{{0.0, 10.0, 20.0}, {6.0, 4.0, 1.0}};
  EXPECT_DOUBLE_EQ(t.at(-3.0), 6.0);
  EXPECT_DOUBLE_EQ(t.at(5.0), 5.0);
  EXPECT_DOUBLE_EQ(t.at(15.0), 2.5);
  EXPECT_DOUBLE_EQ(t.at(99.0), 1.0);
}

TEST(PerformanceEnvelope, ValidatesLimits) {
  PerformanceEnvelope env;
  env.scale = 0.0;
  EXPECT_THROW(env.validate(), Error);
  env.scale = 1.2;
  EXPECT_THROW(env.validate(), Error);
  env = PerformanceEnvelope{};
  env.ay_max = -1.0;
  EXPECT_THROW(env.validate(), Error);
}

}  // namespace
}  // namespace racedriver
