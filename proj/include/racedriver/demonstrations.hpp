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
 *  \brief Synthetic demonstration laps scattered around a mean line.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "racedriver/curvilinear.hpp"
#include "racedriver/elastic_band.hpp"
#include "racedriver/track.hpp"

namespace racedriver::synthetic {

struct DemoNoise {
  double sigma = 1.0;            ///< m, lateral spread where the corridor allows it
  double room_fraction = 0.35;   ///< spread limited to this share of the free room
  double min_wavelength = 60.0;  ///< m
  double max_wavelength = 400.0;  ///< m
  std::size_t envelope_window = 21;  ///< stations, smoothing of the spread envelope
};

/// Smooth zero-mean, unit-variance periodic process sampled at n stations.
inline std::vector<double> smooth_unit_process(std::size_t n, double length, const DemoNoise& noise,
                                               std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  const auto h_lo = static_cast<int>(std::max(1.0, std::floor(length / noise.max_wavelength)));
  const auto h_hi = static_cast<int>(std::max<double>(h_lo, std::floor(length / noise.min_wavelength)));
  std::vector<double> z(n, 0.0);
  const double norm = std::sqrt(1.0 / static_cast<double>(h_hi - h_lo + 1));
  for (int h = h_lo; h <= h_hi; ++h) {
    const double a = n01(rng) * norm, b = n01(rng) * norm;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = 2.0 * kPi * h * static_cast<double>(i) / static_cast<double>(n);
      z[i] += a * std::sin(u) + b * std::cos(u);
    }
  }
  return z;
}

/// Per-station spread: sigma capped by the room left around `offsets`
/// inside the corridor, then eroded and smoothed so it varies gently.
inline std::vector<double> spread_envelope(const Track& track, const std::vector<double>& offsets,
                                           double vehicle_half_width, const DemoNoise& noise) {
  const std::size_t n = track.station_count();
  std::vector<double> room(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double hi = track.width_left()[i] - vehicle_half_width;
    const double lo = -track.width_right()[i] + vehicle_half_width;
    room[i] = std::max(0.0, std::min(hi - offsets[i], offsets[i] - lo));
  }
  const auto half = static_cast<std::ptrdiff_t>(noise.envelope_window / 2);
  std::vector<double> env(n);
  for (std::size_t i = 0; i < n; ++i) {
    double r = room[i];
    for (std::ptrdiff_t k = -half; k <= half; ++k) r = std::min(r, room[wrap_index(static_cast<std::ptrdiff_t>(i) + k, n)]);
    env[i] = std::min(noise.sigma, noise.room_fraction * r);
  }
  return smooth_periodic(env, noise.envelope_window);
}

/// Laps offset from the elastic-band line by smooth noise whose spread
/// shrinks where the corridor is tight (typically at apexes).
inline std::vector<Polyline> noisy_demonstrations(const Track& track, std::size_t count, std::uint64_t seed,
                                                  const DemoNoise& noise = {}, const BandConfig& band = {}) {
  const MeanLine ml = build_mean_line(track, band);
  const auto env = spread_envelope(track, ml.offsets, band.vehicle_half_width, noise);
  std::mt19937_64 rng(seed);
  std::vector<Polyline> laps;
  const std::size_t n = track.station_count();
  for (std::size_t l = 0; l < count; ++l) {
    const auto z = smooth_unit_process(n, track.length(), noise, rng);
    std::vector<double> dy(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double hi = track.width_left()[i] - band.vehicle_half_width;
      const double lo = -track.width_right()[i] + band.vehicle_half_width;
      dy[i] = clamp_value(ml.offsets[i] + env[i] * z[i], lo, hi);
    }
    laps.push_back(from_curvilinear(dy, track));
  }
  return laps;
}

}  // namespace racedriver::synthetic
