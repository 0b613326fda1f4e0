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
 *  \brief Synthetic circuits built from straights and smooth corners.
 */

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "racedriver/core.hpp"
#include "racedriver/track.hpp"

namespace racedriver::synthetic {

/// Counter-clockwise circle starting at (R, 0).
inline Polyline circle_points(double radius, double step = 0.5) {
  const auto n = static_cast<std::size_t>(std::max(16.0, std::round(2.0 * kPi * radius / step)));
  Polyline pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
    pts[i] = {radius * std::cos(a), radius * std::sin(a)};
  }
  return pts;
}

/// Counter-clockwise oval: bottom straight from (0, -R) to (L, -R), then a
/// half circle, the top straight back, and a second half circle.
inline Polyline oval_points(double straight, double radius, double step = 0.5) {
  Polyline pts;
  const auto ns = static_cast<std::size_t>(std::max(1.0, std::round(straight / step)));
  const auto na = static_cast<std::size_t>(std::max(8.0, std::round(kPi * radius / step)));
  for (std::size_t i = 0; i < ns; ++i) pts.push_back({straight * static_cast<double>(i) / static_cast<double>(ns), -radius});
  for (std::size_t i = 0; i < na; ++i) {
    const double a = -0.5 * kPi + kPi * static_cast<double>(i) / static_cast<double>(na);
    pts.push_back({straight + radius * std::cos(a), radius * std::sin(a)});
  }
  for (std::size_t i = 0; i < ns; ++i) pts.push_back({straight * (1.0 - static_cast<double>(i) / static_cast<double>(ns)), radius});
  for (std::size_t i = 0; i < na; ++i) {
    const double a = 0.5 * kPi + kPi * static_cast<double>(i) / static_cast<double>(na);
    pts.push_back({radius * std::cos(a), radius * std::sin(a)});
  }
  return pts;
}

/// Corner with a raised-cosine curvature bump: kappa(u) = A/len (1 - cos(2 pi u/len)).
struct Corner {
  double angle;   ///< signed turning angle, rad (+ = left)
  double length;  ///< arc length of the curvature bump, m
};

/// Circuit layout: straight[k] precedes corner[k]; straights.size() == corners.size().
struct Layout {
  std::vector<double> straights;
  std::vector<Corner> corners;
};

inline double corner_curvature(const Corner& c, double u) {
  return c.angle / c.length * (1.0 - std::cos(2.0 * kPi * u / c.length));
}

namespace detail {

inline void append_corner(Polyline& pts, Vec2& p, double& heading, const Corner& c, double step) {
  const auto n = static_cast<std::size_t>(std::max(8.0, std::ceil(c.length / 0.02)));
  const double h = c.length / static_cast<double>(n);
  double next_emit = step;
  double u = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    // exact integral of kappa over [u, u + h]
    const double a = c.angle / c.length;
    const double w = 2.0 * kPi / c.length;
    const double dtheta = a * (h - (std::sin(w * (u + h)) - std::sin(w * u)) / w);
    const double hm = heading + 0.5 * dtheta;
    p += Vec2{std::cos(hm), std::sin(hm)} * h;
    heading += dtheta;
    u += h;
    if (u + 1e-9 >= next_emit && u < c.length - 1e-9) {
      pts.push_back(p);
      next_emit += step;
    }
  }
}

inline void append_straight(Polyline& pts, Vec2& p, double heading, double length, double step) {
  const auto n = static_cast<std::size_t>(std::max(1.0, std::round(length / step)));
  const Vec2 dir{std::cos(heading), std::sin(heading)};
  const Vec2 start = p;
  for (std::size_t k = 0; k < n; ++k) pts.push_back(start + dir * (length * static_cast<double>(k) / static_cast<double>(n)));
  p = start + dir * length;
}

/// End point of the layout walked from the origin with heading 0.
inline Vec2 layout_endpoint(const Layout& l, Polyline* pts, double step) {
  Polyline scratch;
  Polyline& out = pts ? *pts : scratch;
  Vec2 p{0.0, 0.0};
  double heading = 0.0;
  for (std::size_t k = 0; k < l.corners.size(); ++k) {
    append_straight(out, p, heading, l.straights[k], step);
    out.push_back(p);
    append_corner(out, p, heading, l.corners[k], step);
  }
  return p;
}

inline std::vector<double> straight_headings(const Layout& l) {
  std::vector<double> h(l.corners.size());
  double heading = 0.0;
  for (std::size_t k = 0; k < l.corners.size(); ++k) {
    h[k] = heading;
    heading += l.corners[k].angle;
  }
  return h;
}

}  // namespace detail

/// Adjusts two straights so the layout closes exactly.
inline Layout close_layout(Layout l, double min_straight = 5.0) {
  if (l.corners.size() != l.straights.size() || l.corners.empty()) {
    throw Error(ErrorCode::InvalidArgument, "layout needs one straight per corner");
  }
  double total = 0.0;
  for (const auto& c : l.corners) total += c.angle;
  if (std::abs(total - 2.0 * kPi) > 1e-9) throw Error(ErrorCode::InvalidArgument, "corner angles must sum to 2 pi");
  const Vec2 e = detail::layout_endpoint(l, nullptr, 1e9);
  const auto h = detail::straight_headings(l);
  std::size_t bi = 0, bj = 1 % h.size();
  double best = -1.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    for (std::size_t j = i + 1; j < h.size(); ++j) {
      const double sn = std::abs(std::sin(h[i] - h[j]));
      if (sn > best + 1e-9) {
        best = sn;
        bi = i;
        bj = j;
      }
    }
  }
  if (best < 0.1) throw Error(ErrorCode::InvalidArgument, "layout has no pair of non-parallel straights");
  // [cos hi cos hj; sin hi sin hj] [di; dj] = -e
  const double a = std::cos(h[bi]), b = std::cos(h[bj]), c = std::sin(h[bi]), d = std::sin(h[bj]);
  const double det = a * d - b * c;
  const double di = (-e.x * d + b * e.y) / det;
  const double dj = (-a * e.y + c * e.x) / det;
  l.straights[bi] += di;
  l.straights[bj] += dj;
  for (double s : l.straights) {
    if (s < min_straight) throw Error(ErrorCode::InvalidArgument, "layout cannot be closed with positive straights");
  }
  return l;
}

/// Centerline points of a closed layout, spaced about `step` metres.
inline Polyline layout_points(const Layout& layout, double step = 0.5) {
  const Layout l = close_layout(layout);
  Polyline pts;
  detail::layout_endpoint(l, &pts, step);
  return pts;
}

/// Arc-length position of each corner's curvature maximum along the layout.
inline std::vector<double> layout_apexes(const Layout& layout) {
  const Layout l = close_layout(layout);
  std::vector<double> out;
  double s = 0.0;
  for (std::size_t k = 0; k < l.corners.size(); ++k) {
    s += l.straights[k];
    out.push_back(s + 0.5 * l.corners[k].length);
    s += l.corners[k].length;
  }
  return out;
}

inline double deg(double d) { return d * kPi / 180.0; }

inline Track make_circle_track(double radius = 100.0, double half_width = 6.0, double spacing = 2.0) {
  return Track("circle", circle_points(radius), half_width, half_width, spacing);
}

inline Track make_oval_track(double straight = 300.0, double radius = 60.0, double half_width = 6.0,
                             double spacing = 2.0) {
  return Track("oval", oval_points(straight, radius), half_width, half_width, spacing);
}

inline Track make_layout_track(const std::string& name, const Layout& layout, double half_width = 6.0,
                               double spacing = 2.0) {
  return Track(name, layout_points(layout), half_width, half_width, spacing);
}

/// Six corners of mixed direction and radius.
inline Layout six_corner_layout() {
  return {{220.0, 120.0, 90.0, 160.0, 110.0, 140.0},
          {{deg(90), 90.0}, {deg(120), 130.0}, {deg(-60), 80.0}, {deg(90), 110.0}, {deg(60), 70.0}, {deg(60), 90.0}}};
}

/// Three corners separated by long straights.
inline Layout three_corner_layout() {
  return {{400.0, 400.0, 400.0}, {{deg(120), 140.0}, {deg(120), 140.0}, {deg(120), 140.0}}};
}

/// Long straights with a hairpin at each end and two kinks between.
inline Layout long_straight_layout() {
  return {{600.0, 60.0, 600.0, 60.0}, {{deg(150), 150.0}, {deg(30), 60.0}, {deg(150), 150.0}, {deg(30), 60.0}}};
}

inline Layout training_layout_a() {
  return {{250.0, 150.0, 200.0, 120.0, 180.0},
          {{deg(100), 110.0}, {deg(80), 90.0}, {deg(-45), 70.0}, {deg(135), 120.0}, {deg(90), 100.0}}};
}

inline Layout training_layout_b() {
  return {{300.0, 100.0, 160.0, 140.0, 220.0, 90.0},
          {{deg(70), 90.0}, {deg(110), 120.0}, {deg(50), 70.0}, {deg(-70), 90.0}, {deg(120), 130.0}, {deg(80), 100.0}}};
}

inline Layout held_out_layout() {
  return {{280.0, 140.0, 180.0, 150.0, 200.0},
          {{deg(90), 100.0}, {deg(120), 120.0}, {deg(-50), 75.0}, {deg(110), 110.0}, {deg(90), 100.0}}};
}

}  // namespace racedriver::synthetic
