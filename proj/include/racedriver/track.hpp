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

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "racedriver/core.hpp"
#include "racedriver/path.hpp"

namespace racedriver {

/// Which line the curvilinear frame of a track is built around.
enum class ReferenceKind { Centerline, MeanLine };

inline const char* to_string(ReferenceKind k) {
  return k == ReferenceKind::Centerline ? "centerline" : "mean_line";
}

inline constexpr double kDefaultStationSpacing = 2.0;

/// Closed circuit: a reference line resampled to equidistant stations plus
/// left/right border distances measured along the station normals.
class Track {
 public:
  Track() = default;

  /// Builds a track from an ordered closed reference line with per-point
  /// widths. Points are resampled to stations spaced as close to `spacing`
  /// as the loop length allows.
  Track(std::string name, const Polyline& reference, const std::vector<double>& width_left,
        const std::vector<double>& width_right, double spacing = kDefaultStationSpacing,
        ReferenceKind kind = ReferenceKind::Centerline)
      : name_(std::move(name)), kind_(kind) {
    if (reference.size() != width_left.size() || reference.size() != width_right.size()) {
      throw Error(ErrorCode::InvalidArgument, "reference and width arrays differ in length");
    }
    if (!(spacing > 0.0)) throw Error(ErrorCode::InvalidArgument, "station spacing must be positive");
    // Drop a duplicated closing point together with its width sample.
    Polyline pts = reference;
    std::vector<double> wl = width_left, wr = width_right;
    while (pts.size() > 1 && distance(pts.front(), pts.back()) <= 1e-6) {
      pts.pop_back();
      wl.pop_back();
      wr.pop_back();
    }
    if (pts.size() < 3) throw Error(ErrorCode::DegenerateLine, "track needs at least 3 distinct points");
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (!(wl[i] >= 0.0) || !(wr[i] >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "border widths must be non-negative");
      }
    }
    const double input_length = closed_length(pts);
    const auto count = static_cast<std::size_t>(std::max(8.0, std::round(input_length / spacing)));
    Polyline res = equalize(pts, count);

    // Widths follow the input arc-length fraction.
    std::vector<double> cum(pts.size() + 1, 0.0);
    for (std::size_t i = 0; i < pts.size(); ++i) cum[i + 1] = cum[i] + distance(pts[i], pts[(i + 1) % pts.size()]);
    width_left_.resize(count);
    width_right_.resize(count);
    std::size_t seg = 0;
    for (std::size_t k = 0; k < count; ++k) {
      const double s = input_length * static_cast<double>(k) / static_cast<double>(count);
      while (seg + 1 < pts.size() && cum[seg + 1] <= s) ++seg;
      const double len = cum[seg + 1] - cum[seg];
      const double t = len > 0.0 ? (s - cum[seg]) / len : 0.0;
      const std::size_t j = (seg + 1) % pts.size();
      width_left_[k] = wl[seg] * (1.0 - t) + wl[j] * t;
      width_right_[k] = wr[seg] * (1.0 - t) + wr[j] * t;
    }
    ref_ = ClosedPath(std::move(res));
    ds_ = ref_.length() / static_cast<double>(ref_.size());
  }

  /// Constant-width convenience constructor.
  Track(std::string name, const Polyline& reference, double width_left, double width_right,
        double spacing = kDefaultStationSpacing)
      : Track(std::move(name), reference, std::vector<double>(reference.size(), width_left),
              std::vector<double>(reference.size(), width_right), spacing) {}

  const std::string& name() const { return name_; }
  ReferenceKind reference_kind() const { return kind_; }
  const ClosedPath& reference() const { return ref_; }
  std::size_t station_count() const { return ref_.size(); }
  double length() const { return ref_.length(); }
  double spacing() const { return ds_; }
  double station(std::size_t i) const { return ref_.station(i); }
  const std::vector<double>& width_left() const { return width_left_; }
  const std::vector<double>& width_right() const { return width_right_; }

  double width_left_at(double s) const { return interp_periodic(width_left_, ds_, s); }
  double width_right_at(double s) const { return interp_periodic(width_right_, ds_, s); }

  /// Maximum admissible |dy| at a station: three full track widths.
  double lateral_band(std::size_t i, double widths = 3.0) const {
    return widths * (width_left_[i] + width_right_[i]);
  }

  Polyline left_border() const { return border(+1.0); }
  Polyline right_border() const { return border(-1.0); }

  /// Station arc length and signed offset of a point.
  Projection locate(const Vec2& p, std::optional<double> hint = std::nullopt) const {
    return ref_.project(p, hint);
  }

  /// Positive when `d` at `s` is beyond a border, in metres.
  double border_excess(double s, double d) const {
    const double wl = width_left_at(s);
    const double wr = width_right_at(s);
    if (d > wl) return d - wl;
    if (d < -wr) return -wr - d;
    return 0.0;
  }

  /// Returns a copy whose reference is `line`; widths are re-measured along
  /// the new normals.
  Track with_reference(const Polyline& line, ReferenceKind kind = ReferenceKind::MeanLine,
                       double spacing = -1.0) const {
    const double sp = spacing > 0.0 ? spacing : ds_;
    const ClosedPath probe(line);
    const auto count = static_cast<std::size_t>(std::max(8.0, std::round(probe.length() / sp)));
    Polyline res = equalize(open_loop(line), count);
    const ClosedPath path(res);
    std::vector<double> wl(count), wr(count);
    std::optional<double> hint;
    for (std::size_t i = 0; i < count; ++i) {
      const auto pr = ref_.project(path.points()[i], hint);
      hint = pr.s;
      const double c = std::max(0.2, std::abs(dot(path.normals()[i], ref_.normal_at(pr.s))));
      wl[i] = std::max(0.0, (width_left_at(pr.s) - pr.d) / c);
      wr[i] = std::max(0.0, (width_right_at(pr.s) + pr.d) / c);
    }
    Track t;
    t.name_ = name_;
    t.kind_ = kind;
    t.ref_ = path;
    t.ds_ = path.length() / static_cast<double>(count);
    t.width_left_ = std::move(wl);
    t.width_right_ = std::move(wr);
    return t;
  }

  /// Places `count` points on the closed polyline so that all consecutive
  /// chords have the same length (the chord is found by bisection on closure).
  static Polyline equalize(const Polyline& pts, std::size_t count) {
    const std::size_t n = pts.size();
    const double total = closed_length(pts);
    auto walk = [&](double c, Polyline& out) -> double {
      out.assign(count, pts[0]);
      std::size_t seg = 0;
      double u = 0.0;
      for (std::size_t k = 1; k < count; ++k) {
        const Vec2 prev = out[k - 1];
        bool found = false;
        while (seg < n) {
          const Vec2 a = pts[seg];
          const Vec2 e = pts[(seg + 1) % n] - a;
          const Vec2 q = a - prev;
          const double A = dot(e, e);
          const double B = 2.0 * dot(q, e);
          const double C = dot(q, q) - c * c;
          const double disc = B * B - 4.0 * A * C;
          if (A > 0.0 && disc >= 0.0) {
            const double t = (-B + std::sqrt(disc)) / (2.0 * A);
            if (t >= u && t <= 1.0) {
              out[k] = a + e * t;
              u = t;
              found = true;
              break;
            }
          }
          ++seg;
          u = 0.0;
        }
        if (!found) return -1.0;  // walked past the loop end: chord too long
      }
      return distance(out[count - 1], pts[0]) - c;
    };
    double lo = 0.9 * total / static_cast<double>(count);
    double hi = total / static_cast<double>(count);
    Polyline out;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * total; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (walk(mid, out) > 0.0) lo = mid; else hi = mid;
    }
    if (walk(lo, out) < 0.0) return resample_closed(pts, count);
    return out;
  }

 private:
  Polyline border(double side) const {
    Polyline out(ref_.size());
    for (std::size_t i = 0; i < ref_.size(); ++i) {
      const double w = side > 0.0 ? width_left_[i] : -width_right_[i];
      out[i] = ref_.points()[i] + ref_.normals()[i] * w;
    }
    return out;
  }

  std::string name_;
  ReferenceKind kind_{ReferenceKind::Centerline};
  ClosedPath ref_;
  std::vector<double> width_left_;
  std::vector<double> width_right_;
  double ds_{};
};

}  // namespace racedriver
