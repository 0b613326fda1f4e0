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
 *  \brief Elastic-band relaxation of a line inside a driving corridor.
 *
 *  Nodes slide along fixed normals of a base line. The band minimizes the
 *  squared second differences of the node positions, plus a quadratic
 *  penalty for leaving the corridor, solved by damped Newton steps on the
 *  sparse banded system.
 */

#pragma once

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <vector>

#include "racedriver/core.hpp"
#include "racedriver/curvilinear.hpp"
#include "racedriver/track.hpp"

namespace racedriver {

struct BandConfig {
  double vehicle_half_width = 1.0;  ///< corridor inset from each border, m
  double tie_weight = 1e-6;         ///< pull toward the corridor middle; only breaks ties
  double penalty = 1e6;             ///< weight of squared corridor violation
  double tolerance = 1e-4;          ///< m, max node displacement between iterations
  std::size_t max_iterations = 200;
};

struct BandResult {
  std::vector<double> offsets;  ///< along the base normals, + = left
  bool converged = false;
  std::size_t iterations = 0;
  std::vector<std::size_t> infeasible;  ///< stations where the corridor is empty
};

/// Relaxes a band whose node i may move along normals[i] between lo[i] and
/// hi[i]. Open bands keep second differences only at interior nodes.
inline BandResult relax_band(const Polyline& base, const std::vector<Vec2>& normals, std::vector<double> lo,
                             std::vector<double> hi, bool closed, const BandConfig& cfg = {}) {
  const std::size_t n = base.size();
  if (n < 3 || normals.size() != n || lo.size() != n || hi.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "band arrays must have equal length of at least 3");
  }
  BandResult out;
  for (std::size_t i = 0; i < n; ++i) {
    if (lo[i] > hi[i]) {
      out.infeasible.push_back(i);
      lo[i] = hi[i] = 0.5 * (lo[i] + hi[i]);
    }
  }

  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> smooth;
  Eigen::VectorXd g0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  const double c[3] = {1.0, -2.0, 1.0};
  const std::size_t first = closed ? 0 : 1;
  const std::size_t last = closed ? n : n - 1;
  for (std::size_t i = first; i < last; ++i) {
    const std::size_t idx[3] = {(i + n - 1) % n, i, (i + 1) % n};
    const Vec2 r0 = base[idx[0]] - base[idx[1]] * 2.0 + base[idx[2]];
    for (int a = 0; a < 3; ++a) {
      g0(static_cast<Eigen::Index>(idx[a])) += c[a] * dot(normals[idx[a]], r0);
      for (int b = 0; b < 3; ++b) {
        smooth.emplace_back(static_cast<int>(idx[a]), static_cast<int>(idx[b]),
                            c[a] * c[b] * dot(normals[idx[a]], normals[idx[b]]));
      }
    }
  }

  std::vector<double> mid(n);
  for (std::size_t i = 0; i < n; ++i) mid[i] = 0.5 * (lo[i] + hi[i]);
  for (std::size_t i = 0; i < n; ++i) smooth.emplace_back(static_cast<int>(i), static_cast<int>(i), cfg.tie_weight);
  Eigen::SparseMatrix<double> h0(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  h0.setFromTriplets(smooth.begin(), smooth.end());
  Eigen::VectorXd r0 = -g0;
  for (std::size_t i = 0; i < n; ++i) r0(static_cast<Eigen::Index>(i)) += cfg.tie_weight * mid[i];

  auto violation = [&](const Eigen::VectorXd& x, Eigen::Index i) {
    const auto k = static_cast<std::size_t>(i);
    return x(i) < lo[k] ? x(i) - lo[k] : (x(i) > hi[k] ? x(i) - hi[k] : 0.0);
  };
  auto objective = [&](const Eigen::VectorXd& x) {
    double pen = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) pen += violation(x, i) * violation(x, i);
    return 0.5 * x.dot(h0 * x) - r0.dot(x) + 0.5 * cfg.penalty * pen;
  };

  // Newton steps on the convex piecewise-quadratic objective, with a
  // backtracking line search so the penalized set cannot cycle.
  Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(mid.data(), static_cast<Eigen::Index>(n));
  double f = objective(d);
  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    Eigen::SparseMatrix<double> h = h0;
    Eigen::VectorXd grad = h0 * d - r0;
    Eigen::VectorXd rhs = r0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double v = violation(d, i);
      if (v != 0.0) {
        h.coeffRef(i, i) += cfg.penalty;
        rhs(i) += cfg.penalty * (v < 0.0 ? lo[k] : hi[k]);
        grad(i) += cfg.penalty * v;
      }
    }
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(h);
    if (solver.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "band system is singular");
    const Eigen::VectorXd step = solver.solve(rhs) - d;
    const double slope = grad.dot(step);
    double alpha = 1.0;
    Eigen::VectorXd trial = d + step;
    double f_trial = objective(trial);
    while (f_trial > f + 1e-4 * alpha * slope && alpha > 1e-8) {
      alpha *= 0.5;
      trial = d + alpha * step;
      f_trial = objective(trial);
    }
    const double moved = (alpha * step).cwiseAbs().maxCoeff();
    d = trial;
    f = f_trial;
    out.iterations = it + 1;
    if (moved < cfg.tolerance) {
      out.converged = true;
      break;
    }
  }
  std::vector<double> offsets(d.data(), d.data() + d.size());
  for (std::size_t i = 0; i < n; ++i) offsets[i] = clamp_value(offsets[i], lo[i], hi[i]);
  out.offsets = std::move(offsets);
  return out;
}

struct MeanLine {
  Polyline line;
  std::vector<double> offsets;  ///< lateral offsets from the track reference
  bool converged = false;
  std::size_t iterations = 0;
  std::vector<std::size_t> infeasible;
};

/// Smooth closed line inside the track borders inset by the vehicle half-width.
inline MeanLine build_mean_line(const Track& track, const BandConfig& cfg = {}) {
  const std::size_t n = track.station_count();
  std::vector<double> lo(n), hi(n);
  for (std::size_t i = 0; i < n; ++i) {
    lo[i] = -track.width_right()[i] + cfg.vehicle_half_width;
    hi[i] = track.width_left()[i] - cfg.vehicle_half_width;
  }
  const auto& ref = track.reference();
  BandResult band = relax_band(ref.points(), ref.normals(), lo, hi, true, cfg);
  MeanLine out;
  out.line = from_curvilinear(band.offsets, track);
  out.offsets = std::move(band.offsets);
  out.converged = band.converged;
  out.iterations = band.iterations;
  out.infeasible = std::move(band.infeasible);
  return out;
}

}  // namespace racedriver
