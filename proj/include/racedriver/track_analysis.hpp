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
 *  \brief Corner, straight and brake-zone segmentation of a driving line.
 */

#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "racedriver/curvilinear.hpp"
#include "racedriver/speed_envelope.hpp"
#include "racedriver/track.hpp"

namespace racedriver {

/// Station intervals are [begin, end) in track station indices and may wrap.
struct CornerInfo {
  std::size_t entry{};
  std::size_t apex{};
  std::size_t exit{};  ///< first station after the corner
  double entry_s{};
  double apex_s{};
  double exit_s{};
  double peak_kappa{};  ///< signed, + = left
};

struct StraightInfo {
  std::size_t begin{};
  std::size_t end{};
  double start_s{};
  double end_s{};
  double length{};
};

struct BrakeZone {
  std::size_t station{};
  double brake_s{};
  std::size_t corner{};
};

enum class AnalysisStatus { Ok, NoCornersFound, DegenerateCorner };

inline const char* to_string(AnalysisStatus s) {
  switch (s) {
    case AnalysisStatus::Ok: return "ok";
    case AnalysisStatus::NoCornersFound: return "no_corners_found";
    case AnalysisStatus::DegenerateCorner: return "degenerate_corner";
  }
  return "?";
}

struct AnalysisConfig {
  double kappa_threshold = 0.01;  ///< 1/m, corner entry
  double hysteresis = 0.2;        ///< exit below (1 - hysteresis) * threshold
  /// Curvature spread below this fraction of the mean marks a constant-radius loop.
  double constant_curvature_tolerance = 0.05;
  PerformanceEnvelope envelope{};
  CurvilinearConfig curvilinear{};
};

struct TrackAnalysis {
  AnalysisStatus status = AnalysisStatus::Ok;
  std::vector<CornerInfo> corners;
  std::vector<StraightInfo> straights;
  std::vector<BrakeZone> brake_zones;
  std::vector<double> kappa;  ///< driving-line curvature per station
  SpeedProfile speed;         ///< envelope speed along the driving line
  std::size_t n_stations{};
  double spacing{};

  /// Index walk distance from `from` forward to `to` on the station loop.
  std::size_t forward_steps(std::size_t from, std::size_t to) const { return (to + n_stations - from) % n_stations; }

  bool in_interval(std::size_t i, std::size_t begin, std::size_t end) const {
    if (begin == end) return true;  // whole loop
    return forward_steps(begin, i) < forward_steps(begin, end);
  }

  std::size_t station_index(double s) const {
    const double L = spacing * static_cast<double>(n_stations);
    return static_cast<std::size_t>(std::floor(wrap_s(s, L) / spacing + 0.5)) % n_stations;
  }

  std::optional<std::size_t> corner_at(std::size_t i) const {
    for (std::size_t k = 0; k < corners.size(); ++k) {
      if (in_interval(i, corners[k].entry, corners[k].exit)) return k;
    }
    return std::nullopt;
  }

  std::optional<std::size_t> straight_at(std::size_t i) const {
    for (std::size_t k = 0; k < straights.size(); ++k) {
      if (in_interval(i, straights[k].begin, straights[k].end)) return k;
    }
    return std::nullopt;
  }

  /// Next corner whose apex is at or ahead of station i.
  std::optional<std::size_t> next_corner(std::size_t i) const {
    if (corners.empty()) return std::nullopt;
    std::size_t best = 0;
    std::size_t best_steps = n_stations + 1;
    for (std::size_t k = 0; k < corners.size(); ++k) {
      const std::size_t steps = forward_steps(i, corners[k].apex);
      if (steps < best_steps) {
        best_steps = steps;
        best = k;
      }
    }
    return best;
  }
};

namespace detail {

inline std::size_t argmax_abs(const std::vector<double>& v, std::size_t begin, std::size_t count) {
  const std::size_t n = v.size();
  std::size_t best = begin;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = (begin + k) % n;
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  return best;
}

}  // namespace detail

/// Segments the lap driven along `line` into corners and straights.
inline TrackAnalysis analyse_track(const Polyline& line, const Track& track, const AnalysisConfig& cfg = {}) {
  const CurvilinearTrace trace = to_curvilinear(line, track, cfg.curvilinear);
  const Polyline pts = from_curvilinear(trace.dy, track, cfg.curvilinear);
  const std::size_t n = pts.size();

  TrackAnalysis out;
  out.n_stations = n;
  out.spacing = track.spacing();
  out.kappa = trace.kappa;
  std::vector<double> ds(n);
  for (std::size_t i = 0; i < n; ++i) ds[i] = distance(pts[i], pts[(i + 1) % n]);
  out.speed = estimate_speed(ds, out.kappa, cfg.envelope);

  const auto& kappa = out.kappa;
  auto station_s = [&](std::size_t i) { return track.station(i); };
  auto make_corner = [&](std::size_t entry, std::size_t exit) {
    const std::size_t count = entry == exit ? n : (exit + n - entry) % n;
    CornerInfo c;
    c.entry = entry;
    c.exit = exit;
    c.apex = detail::argmax_abs(kappa, entry, count);
    c.entry_s = station_s(entry);
    c.exit_s = station_s(exit);
    c.apex_s = station_s(c.apex);
    c.peak_kappa = kappa[c.apex];
    return c;
  };

  double k_min = 1e300, k_max = 0.0, k_mean = 0.0;
  for (double k : kappa) {
    k_min = std::min(k_min, std::abs(k));
    k_max = std::max(k_max, std::abs(k));
    k_mean += std::abs(k) / static_cast<double>(n);
  }
  const double exit_threshold = (1.0 - cfg.hysteresis) * cfg.kappa_threshold;
  const bool constant_radius = k_mean > 1e-4 &&
                               k_max - k_min < cfg.constant_curvature_tolerance * k_mean;

  if (constant_radius || k_min > exit_threshold) {
    out.status = AnalysisStatus::DegenerateCorner;
    out.corners.push_back(make_corner(0, 0));
  } else if (k_max <= cfg.kappa_threshold) {
    out.status = AnalysisStatus::NoCornersFound;
    out.straights.push_back({0, 0, 0.0, 0.0, track.length()});
    return out;
  } else {
    // start scanning from a station that is clearly on a straight
    std::size_t start = 0;
    while (std::abs(kappa[start]) >= exit_threshold) ++start;
    bool inside = false;
    std::size_t entry = 0;
    for (std::size_t k = 1; k <= n; ++k) {
      const std::size_t i = (start + k) % n;
      const double a = std::abs(kappa[i]);
      if (!inside && a > cfg.kappa_threshold) {
        inside = true;
        entry = i;
      } else if (inside && (a < exit_threshold || std::signbit(kappa[i]) != std::signbit(kappa[entry]))) {
        // a sign change closes the corner even inside the hysteresis band
        out.corners.push_back(make_corner(entry, i));
        inside = a > cfg.kappa_threshold;
        entry = i;
      }
    }
    // order by station
    std::sort(out.corners.begin(), out.corners.end(),
              [](const CornerInfo& a, const CornerInfo& b) { return a.entry < b.entry; });
    for (std::size_t k = 0; k < out.corners.size(); ++k) {
      const auto& c = out.corners[k];
      const auto& next = out.corners[(k + 1) % out.corners.size()];
      if (c.exit == next.entry) continue;
      StraightInfo st;
      st.begin = c.exit;
      st.end = next.entry;
      st.start_s = station_s(st.begin);
      st.end_s = station_s(st.end);
      for (std::size_t i = st.begin; i != st.end; i = (i + 1) % n) st.length += ds[i];
      out.straights.push_back(st);
    }
  }

  // Brake point: walk back from the apex while the envelope speed keeps
  // rising, but never past the previous apex.
  const auto& v = out.speed.v;
  for (std::size_t k = 0; k < out.corners.size(); ++k) {
    const auto& c = out.corners[k];
    const std::size_t prev_apex = out.corners[(k + out.corners.size() - 1) % out.corners.size()].apex;
    std::size_t i = c.apex;
    std::size_t guard = out.corners.size() == 1 ? n - 1 : out.forward_steps(prev_apex, c.apex);
    bool rising = false;  // speed seen rising when walking backward
    while (guard > 1) {
      const std::size_t p = (i + n - 1) % n;
      if (v[p] > v[i] + 1e-9) {
        rising = true;
      } else if (v[p] < v[i] - 1e-9 || rising) {
        // plateaus next to the apex are part of the corner, plateaus
        // beyond the speed peak are not
        break;
      }
      i = p;
      --guard;
    }
    if (i == c.apex) i = c.entry;
    out.brake_zones.push_back({i, station_s(i), k});
  }
  return out;
}

}  // namespace racedriver
