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

#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "racedriver/core.hpp"

namespace racedriver {

/// Heading (unwrapped) and curvature of a closed polyline.
struct LineShape {
  std::vector<double> heading;
  std::vector<double> kappa;
};

inline constexpr std::size_t kCurvatureSmoothing = 5;

/// Central-difference heading and curvature of a closed polyline, with a
/// circular 5-point moving average on the curvature.
inline LineShape closed_line_shape(const Polyline& pts, std::size_t smoothing = kCurvatureSmoothing) {
  const std::size_t n = pts.size();
  if (n < 3) throw Error(ErrorCode::DegenerateLine, "closed line needs at least 3 points");
  std::vector<double> seg(n);
  for (std::size_t i = 0; i < n; ++i) seg[i] = distance(pts[i], pts[(i + 1) % n]);

  LineShape out;
  out.heading.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 d = pts[(i + 1) % n] - pts[(i + n - 1) % n];
    out.heading[i] = std::atan2(d.y, d.x);
  }
  for (std::size_t i = 1; i < n; ++i) {
    out.heading[i] = out.heading[i - 1] + wrap_angle(out.heading[i] - out.heading[i - 1]);
  }
  std::vector<double> raw(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ip = (i + 1) % n;
    const std::size_t im = (i + n - 1) % n;
    const double dphi = wrap_angle(out.heading[ip] - out.heading[im]);
    const double dsig = seg[im] + seg[i];
    raw[i] = dsig > 0.0 ? dphi / dsig : 0.0;
  }
  out.kappa = smooth_periodic(raw, smoothing);
  return out;
}

/// Removes a duplicated closing point and consecutive duplicates.
inline Polyline open_loop(Polyline pts, double tol = 1e-9) {
  Polyline out;
  out.reserve(pts.size());
  for (const auto& p : pts) {
    if (out.empty() || distance(out.back(), p) > tol) out.push_back(p);
  }
  while (out.size() > 1 && distance(out.front(), out.back()) <= 1e-6) out.pop_back();
  return out;
}

/// Resamples a closed polyline to `count` points equidistant in chord arc length.
inline Polyline resample_closed(const Polyline& pts, std::size_t count) {
  const std::size_t n = pts.size();
  if (n < 3 || count < 3) throw Error(ErrorCode::DegenerateLine, "cannot resample fewer than 3 points");
  std::vector<double> cum(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) cum[i + 1] = cum[i] + distance(pts[i], pts[(i + 1) % n]);
  const double total = cum[n];
  if (total <= 0.0) throw Error(ErrorCode::DegenerateLine, "zero-length line");
  Polyline out(count);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double s = total * static_cast<double>(k) / static_cast<double>(count);
    while (seg + 1 < n && cum[seg + 1] <= s) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double t = len > 0.0 ? (s - cum[seg]) / len : 0.0;
    out[k] = pts[seg] + (pts[(seg + 1) % n] - pts[seg]) * t;
  }
  return out;
}

inline double closed_length(const Polyline& pts) {
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) total += distance(pts[i], pts[(i + 1) % pts.size()]);
  return total;
}

/// Result of locating a point relative to a path.
struct Projection {
  double s{};        ///< arc length of the foot point
  double d{};        ///< signed lateral offset, positive to the left
  std::size_t segment{};
};

/// Closed polyline with arc-length parameterization and a continuous frame.
///
/// Normals are interpolated linearly between vertices, so that a point placed
/// at offset d along the vertex normal projects back to exactly that vertex.
class ClosedPath {
 public:
  ClosedPath() = default;

  explicit ClosedPath(Polyline points) : pts_(open_loop(std::move(points))) {
    const std::size_t n = pts_.size();
    if (n < 3) throw Error(ErrorCode::DegenerateLine, "closed path needs at least 3 distinct points");
    cum_.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) cum_[i + 1] = cum_[i] + distance(pts_[i], pts_[(i + 1) % n]);
    length_ = cum_[n];
    if (!(length_ > 0.0)) throw Error(ErrorCode::DegenerateLine, "zero-length path");
    auto shape = closed_line_shape(pts_);
    heading_ = std::move(shape.heading);
    kappa_ = std::move(shape.kappa);
    normal_.resize(n);
    for (std::size_t i = 0; i < n; ++i) normal_[i] = left_normal(heading_[i]);
  }

  std::size_t size() const { return pts_.size(); }
  double length() const { return length_; }
  const Polyline& points() const { return pts_; }
  const std::vector<double>& stations() const { return cum_; }
  const std::vector<double>& headings() const { return heading_; }
  const std::vector<double>& curvatures() const { return kappa_; }
  const std::vector<Vec2>& normals() const { return normal_; }
  double station(std::size_t i) const { return cum_[i]; }

  /// Segment index and fraction for an arc length.
  std::pair<std::size_t, double> locate(double s) const {
    const double sw = wrap_s(s, length_);
    auto it = std::upper_bound(cum_.begin(), cum_.end(), sw);
    std::size_t i = static_cast<std::size_t>(std::distance(cum_.begin(), it));
    i = i == 0 ? 0 : i - 1;
    if (i >= pts_.size()) i = pts_.size() - 1;
    const double len = cum_[i + 1] - cum_[i];
    return {i, len > 0.0 ? (sw - cum_[i]) / len : 0.0};
  }

  Vec2 position_at(double s) const {
    const auto [i, t] = locate(s);
    return pts_[i] + (pts_[(i + 1) % pts_.size()] - pts_[i]) * t;
  }

  Vec2 normal_at(double s) const {
    const auto [i, t] = locate(s);
    const Vec2 n = normal_[i] * (1.0 - t) + normal_[(i + 1) % pts_.size()] * t;
    return n * (1.0 / norm(n));
  }

  double heading_at(double s) const {
    const Vec2 n = normal_at(s);
    return std::atan2(-n.x, n.y);
  }

  double curvature_at(double s) const {
    const auto [i, t] = locate(s);
    return kappa_[i] * (1.0 - t) + kappa_[(i + 1) % pts_.size()] * t;
  }

  Vec2 offset_point(double s, double d) const { return position_at(s) + normal_at(s) * d; }

  /// Projects `p` using the interpolated-normal frame.
  ///
  /// With `hint`, only segments within `window` metres of the hint are
  /// searched; the global search is used as fallback. Throws
  /// AmbiguousProjection when two distant foot points tie within `tie_tol`.
  Projection project(const Vec2& p, std::optional<double> hint = std::nullopt, double window = 60.0,
                     double tie_tol = 1e-6) const {
    if (hint) {
      if (auto local = search(p, *hint, window)) return *local;
    }
    return global_search(p, tie_tol);
  }

 private:
  /// Foot point on segment i, if the interpolated normal through p hits it.
  std::optional<Projection> on_segment(const Vec2& p, std::size_t i) const {
    const std::size_t j = (i + 1) % pts_.size();
    const Vec2 e = pts_[j] - pts_[i];
    const Vec2 n0 = normal_[i];
    const Vec2 dn = normal_[j] - normal_[i];
    const Vec2 q = p - pts_[i];
    // cross(n0 + u dn, q - u e) = 0
    const double c0 = cross(n0, q);
    const double c1 = cross(dn, q) - cross(n0, e);
    const double c2 = -cross(dn, e);
    double roots[2];
    int nroots = 0;
    constexpr double eps = 1e-12;
    if (std::abs(c2) < eps * (std::abs(c1) + 1.0)) {
      if (std::abs(c1) > 0.0) roots[nroots++] = -c0 / c1;
    } else {
      const double disc = c1 * c1 - 4.0 * c2 * c0;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double qq = -0.5 * (c1 + (c1 >= 0.0 ? sq : -sq));
        roots[nroots++] = qq / c2;
        if (qq != 0.0) roots[nroots++] = c0 / qq;
      }
    }
    std::optional<Projection> best;
    constexpr double utol = 1e-9;
    for (int k = 0; k < nroots; ++k) {
      double u = roots[k];
      if (!(u >= -utol && u <= 1.0 + utol)) continue;
      u = clamp_value(u, 0.0, 1.0);
      const Vec2 r = pts_[i] + e * u;
      Vec2 nu = n0 + dn * u;
      const double nn = norm(nu);
      if (nn <= 0.0) continue;
      nu = nu * (1.0 / nn);
      const double d = dot(p - r, nu);
      const double s = cum_[i] + u * (cum_[i + 1] - cum_[i]);
      if (!best || std::abs(d) < std::abs(best->d)) best = Projection{wrap_s(s, length_), d, i};
    }
    return best;
  }

  std::optional<Projection> search(const Vec2& p, double hint, double window) const {
    const auto [i0, t0] = locate(hint);
    (void)t0;
    const std::size_t n = pts_.size();
    std::optional<Projection> best;
    // walk outwards from the hint segment until the window is exhausted
    for (int dir : {0, 1, -1}) {
      std::ptrdiff_t k = dir == 0 ? 0 : dir;
      double travelled = 0.0;
      while (travelled <= window && static_cast<std::size_t>(std::abs(k)) < n) {
        const std::size_t i = wrap_index(static_cast<std::ptrdiff_t>(i0) + k, n);
        if (auto c = on_segment(p, i)) {
          if (!best || std::abs(c->d) < std::abs(best->d)) best = c;
        }
        if (dir == 0) break;
        travelled += cum_[i + 1] - cum_[i];
        k += dir;
      }
    }
    return best;
  }

  Projection global_search(const Vec2& p, double tie_tol) const {
    std::optional<Projection> best;
    std::vector<Projection> cands;
    cands.reserve(8);
    for (std::size_t i = 0; i < pts_.size(); ++i) {
      if (auto c = on_segment(p, i)) {
        cands.push_back(*c);
        if (!best || std::abs(c->d) < std::abs(best->d)) best = c;
      }
    }
    if (!best) {
      // Fall back to the nearest vertex; only reachable far outside any band.
      std::size_t bi = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < pts_.size(); ++i) {
        const double dd = distance(p, pts_[i]);
        if (dd < bd) {
          bd = dd;
          bi = i;
        }
      }
      return Projection{cum_[bi], dot(p - pts_[bi], normal_[bi]), bi};
    }
    const double sep = std::max(4.0 * length_ / static_cast<double>(pts_.size()), 1e-6 * length_);
    for (const auto& c : cands) {
      if (std::abs(std::abs(c.d) - std::abs(best->d)) <= tie_tol &&
          std::abs(circular_diff(c.s, best->s, length_)) > sep) {
        throw Error(ErrorCode::AmbiguousProjection, "point is equidistant from distant parts of the line");
      }
    }
    return *best;
  }

  Polyline pts_;
  std::vector<double> cum_;
  std::vector<double> heading_;
  std::vector<double> kappa_;
  std::vector<Vec2> normal_;
  double length_{};
};

}  // namespace racedriver
