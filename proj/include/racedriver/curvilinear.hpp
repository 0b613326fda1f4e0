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
#include <optional>
#include <vector>

#include "racedriver/core.hpp"
#include "racedriver/path.hpp"
#include "racedriver/track.hpp"

namespace racedriver {

/// A line described relative to a track reference at its equidistant stations.
struct CurvilinearTrace {
  std::vector<double> s;
  std::vector<double> dy;       ///< signed lateral deviation, + = left of reference
  std::vector<double> kappa;    ///< curvature of the traced line
  std::vector<double> heading;  ///< heading of the traced line (unwrapped)
};

struct CurvilinearConfig {
  double band_widths = 3.0;  ///< admissible |dy| in multiples of the local track width
  double kappa_max = 1.0;    ///< 1/m
};

/// Cartesian line through the station normals: x' - sin(phi) dy, y' + cos(phi) dy.
inline Polyline from_curvilinear(const std::vector<double>& dy, const Track& track,
                                 const CurvilinearConfig& cfg = {}) {
  const auto& ref = track.reference();
  if (dy.size() != ref.size()) {
    throw Error(ErrorCode::InvalidArgument, "dy must have one value per track station");
  }
  Polyline out(dy.size());
  for (std::size_t i = 0; i < dy.size(); ++i) {
    if (!(std::abs(dy[i]) < track.lateral_band(i, cfg.band_widths))) {
      throw Error(ErrorCode::OutOfBand, "lateral deviation exceeds the admissible band");
    }
    out[i] = ref.points()[i] + ref.normals()[i] * dy[i];
  }
  return out;
}

inline Polyline from_curvilinear(const CurvilinearTrace& trace, const Track& track,
                                 const CurvilinearConfig& cfg = {}) {
  return from_curvilinear(trace.dy, track, cfg);
}

/// Heading and curvature of the line traced by `dy` around the reference.
inline void fill_trace_shape(CurvilinearTrace& trace, const Track& track, const CurvilinearConfig& cfg) {
  const Polyline traced = from_curvilinear(trace.dy, track, cfg);
  auto shape = closed_line_shape(traced);
  trace.heading = std::move(shape.heading);
  trace.kappa = std::move(shape.kappa);
  for (auto& k : trace.kappa) k = clamp_value(k, -cfg.kappa_max, cfg.kappa_max);
}

/// Builds a trace from a lateral-deviation profile at the track stations.
inline CurvilinearTrace make_trace(std::vector<double> dy, const Track& track, const CurvilinearConfig& cfg = {}) {
  CurvilinearTrace t;
  t.s.resize(track.station_count());
  for (std::size_t i = 0; i < t.s.size(); ++i) t.s[i] = track.station(i);
  t.dy = std::move(dy);
  fill_trace_shape(t, track, cfg);
  return t;
}

/// Maps a closed Cartesian line onto the track's curvilinear frame.
///
/// Every line point is projected onto the reference (seeded from the
/// previous point), and the offsets are interpolated at the stations.
inline CurvilinearTrace to_curvilinear(const Polyline& line, const Track& track, const CurvilinearConfig& cfg = {}) {
  const Polyline pts = open_loop(line);
  if (pts.size() < 3) throw Error(ErrorCode::DegenerateLine, "line needs at least 3 points");
  const double L = track.length();
  const auto& ref = track.reference();

  std::vector<double> su(pts.size());
  std::vector<double> du(pts.size());
  std::optional<double> hint;
  double prev_raw = 0.0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const Projection pr = ref.project(pts[k], hint);
    const double band = cfg.band_widths * (track.width_left_at(pr.s) + track.width_right_at(pr.s));
    if (std::abs(pr.d) > band) throw Error(ErrorCode::OutOfBand, "line leaves the admissible band");
    if (k == 0) {
      su[k] = pr.s;
    } else {
      const double step = circular_diff(pr.s, prev_raw, L);
      if (step < -1e-6) {
        throw Error(ErrorCode::AmbiguousProjection, "line doubles back along the reference");
      }
      su[k] = su[k - 1] + step;
    }
    du[k] = pr.d;
    prev_raw = pr.s;
    hint = pr.s;
  }
  if (su.back() - su.front() > L + 1e-6) {
    throw Error(ErrorCode::AmbiguousProjection, "line covers more than one lap");
  }
  su.push_back(su.front() + L);
  du.push_back(du.front());

  CurvilinearTrace t;
  const std::size_t n = track.station_count();
  t.s.resize(n);
  t.dy.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    t.s[i] = track.station(i);
    double q = t.s[i];
    while (q < su.front()) q += L;
    while (q > su.back()) q -= L;
    auto it = std::upper_bound(su.begin(), su.end(), q);
    std::size_t j = static_cast<std::size_t>(std::distance(su.begin(), it));
    j = std::clamp<std::size_t>(j, 1, su.size() - 1);
    const double span = su[j] - su[j - 1];
    const double w = span > 0.0 ? (q - su[j - 1]) / span : 0.0;
    t.dy[i] = du[j - 1] * (1.0 - w) + du[j] * w;
  }
  fill_trace_shape(t, track, cfg);
  return t;
}

}  // namespace racedriver
