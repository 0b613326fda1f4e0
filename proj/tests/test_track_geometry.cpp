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

#include "racedriver/curvilinear.hpp"
#include "racedriver/synthetic.hpp"
#include "racedriver/track.hpp"

namespace racedriver {
namespace {

double rms(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc / static_cast<double>(a.size()));
}

bool on_bottom_straight(const Track& t, std::size_t i, double straight) {
  const Vec2 p = t.reference().points()[i];
  return p.y < 0.0 && p.x > 20.0 && p.x < straight - 20.0;
}

TEST(Track, StationsAreEquidistantAndClosed) {
  const Track t = synthetic::make_oval_track(300.0, 60.0);
  const auto& pts = t.reference().points();
  double lo = 1e9, hi = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = distance(pts[i], pts[(i + 1) % pts.size()]);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  EXPECT_LT(hi - lo, 1e-8);
  EXPECT_NEAR(t.station(pts.size() - 1) + t.spacing(), t.length(), 1e-8);
}

TEST(Track, ResamplingPreservesLength) {
  const Polyline raw = synthetic::oval_points(300.0, 60.0, 0.5);
  const Track t("oval", raw, 6.0, 6.0);
  const double exact = 2.0 * 300.0 + 2.0 * kPi * 60.0;
  EXPECT_LT(std::abs(t.length() - closed_length(raw)) / closed_length(raw), 1e-3);
  EXPECT_LT(std::abs(t.length() - exact) / exact, 1e-3);
}

TEST(Track, BordersLieOnOppositeSides) {
  const Track t = synthetic::make_layout_track("six", synthetic::six_corner_layout());
  const auto left = t.left_border();
  const auto right = t.right_border();
  for (std::size_t i = 0; i < t.station_count(); ++i) {
    const Vec2 n = t.reference().normals()[i];
    const Vec2 p = t.reference().points()[i];
    EXPECT_GT(dot(left[i] - p, n), 0.0);
    EXPECT_LT(dot(right[i] - p, n), 0.0);
  }
}

TEST(Track, RejectsNegativeWidths) {
  EXPECT_THROW(Track("bad", synthetic::circle_points(50.0), -1.0, 5.0), Error);
}

TEST(ToCurvilinear, ParallelOffsetOfStraight) {
  const double straight = 300.0;
  const Track t = synthetic::make_oval_track(straight, 60.0);
  // The oval shrunk by one metre lies +1 m to the left everywhere.
  Polyline inner = synthetic::oval_points(straight, 59.0, 0.25);
  const auto trace = to_curvilinear(inner, t);
  for (std::size_t i = 0; i < t.station_count(); ++i) {
    if (on_bottom_straight(t, i, straight)) {
      EXPECT_NEAR(trace.dy[i], 1.0, 1e-6);
      EXPECT_NEAR(trace.kappa[i], 0.0, 1e-9);
    } else {
      // chord sag of 2 m stations on a 60 m arc is about 8 mm
      EXPECT_NEAR(trace.dy[i], 1.0, 1e-2);
    }
  }
}

TEST(ToCurvilinear, IdentityLine) {
  const Track t = synthetic::make_layout_track("six", synthetic::six_corner_layout());
  const auto trace = to_curvilinear(t.reference().points(), t);
  for (std::size_t i = 0; i < t.station_count(); ++i) {
    EXPECT_NEAR(trace.dy[i], 0.0, 1e-9);
    EXPECT_NEAR(trace.kappa[i], t.reference().curvatures()[i], 1e-9);
  }
}

TEST(ToCurvilinear, ConcentricCircle) {
  // Closed form: dy = R - r (inner circle is on the left of a CCW lap), kappa = 1/r.
  const Track t = synthetic::make_circle_track(100.0, 6.0);
  const auto trace = to_curvilinear(synthetic::circle_points(99.0, 0.25), t);
  for (std::size_t i = 0; i < t.station_count(); ++i) {
    EXPECT_NEAR(trace.dy[i], 1.0, 1e-2);
    EXPECT_NEAR(trace.kappa[i], 1.0 / 99.0, 1e-4);
  }
}

TEST(ToCurvilinear, OutOfBandLineIsRejected) {
  const Track t = synthetic::make_circle_track(100.0, 2.0);
  EXPECT_THROW(to_curvilinear(synthetic::circle_points(120.0), t), Error);
  try {
    to_curvilinear(synthetic::circle_points(120.0), t);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfBand);
  }
}

TEST(ToCurvilinear, DoublingBackIsAmbiguous) {
  const Track t = synthetic::make_circle_track(100.0, 6.0);
  Polyline line = synthetic::circle_points(100.0, 1.0);
  std::swap(line[10], line[20]);
  try {
    to_curvilinear(line, t);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AmbiguousProjection);
  }
}

TEST(ClosedPath, GlobalTieIsAmbiguous) {
  // A point on the symmetry axis between the two straights of a narrow oval.
  const ClosedPath path(synthetic::oval_points(200.0, 10.0, 1.0));
  EXPECT_THROW(path.project({100.0, 0.0}), Error);
}

TEST(FromCurvilinear, ZeroOffsetIsReference) {
  const Track t = synthetic::make_oval_track();
  const auto line = from_curvilinear(std::vector<double>(t.station_count(), 0.0), t);
  for (std::size_t i = 0; i < line.size(); ++i) {
    EXPECT_EQ(line[i], t.reference().points()[i]);
  }
}

TEST(FromCurvilinear, ConstantOffsetOnStraightShiftsY) {
  const double straight = 300.0;
  const Track t = synthetic::make_oval_track(straight, 60.0);
  const auto line = from_curvilinear(std::vector<double>(t.station_count(), 2.0), t);
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (!on_bottom_straight(t, i, straight)) continue;
    EXPECT_NEAR(line[i].x, t.reference().points()[i].x, 1e-12);
    EXPECT_NEAR(line[i].y, t.reference().points()[i].y + 2.0, 1e-12);
  }
}

TEST(FromCurvilinear, RoundTripSmoothOffsetOnOval) {
  const Track t = synthetic::make_oval_track(300.0, 60.0);
  std::vector<double> dy(t.station_count());
  for (std::size_t i = 0; i < dy.size(); ++i) {
    const double u = 2.0 * kPi * t.station(i) / t.length();
    dy[i] = 2.5 * std::sin(3.0 * u) + 1.0 * std::cos(7.0 * u + 0.3);
  }
  const auto back = to_curvilinear(from_curvilinear(dy, t), t);
  EXPECT_LT(rms(back.dy, dy), 1e-3);
}

// Property: the round trip is the identity for random smooth offsets inside
// the band on several track shapes.
TEST(FromCurvilinear, RoundTripProperty) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> amp(-4.0, 4.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  const std::vector<Track> tracks = {synthetic::make_oval_track(),
                                     synthetic::make_layout_track("six", synthetic::six_corner_layout()),
                                     synthetic::make_circle_track(80.0)};
  for (const auto& t : tracks) {
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> dy(t.station_count(), 0.0);
      for (int h = 1; h <= 4; ++h) {
        const double a = amp(rng) / h, p = phase(rng);
        for (std::size_t i = 0; i < dy.size(); ++i) dy[i] += a * std::sin(2.0 * kPi * h * 2 * t.station(i) / t.length() + p);
      }
      for (auto& v : dy) v = clamp_value(v, -5.5, 5.5);
      const auto back = to_curvilinear(from_curvilinear(dy, t), t);
      EXPECT_LT(rms(back.dy, dy), 1e-3) << t.name() << " trial " << trial;
    }
  }
}

TEST(Track, WithReferenceRemeasuresWidths) {
  const Track t = synthetic::make_oval_track(300.0, 60.0, 6.0);
  const auto inner = from_curvilinear(std::vector<double>(t.station_count(), 1.5), t);
  const Track m = t.with_reference(inner);
  EXPECT_EQ(m.reference_kind(), ReferenceKind::MeanLine);
  for (std::size_t i = 0; i < m.station_count(); ++i) {
    EXPECT_NEAR(m.width_left()[i], 4.5, 0.05);
    EXPECT_NEAR(m.width_right()[i], 7.5, 0.05);
  }
}

}  // namespace
}  // namespace racedriver
