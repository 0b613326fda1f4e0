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
 *  \brief Driving-line distributions on known tracks and their transfer to new ones.
 *
 *  Each known track gets a ProMP over (dy, kappa) relative to its own mean
 *  line. On a new track the mean line comes from the elastic band, and the
 *  lateral spread is borrowed window by window from the library section with
 *  the most similar curvature.
 */

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "racedriver/curvilinear.hpp"
#include "racedriver/elastic_band.hpp"
#include "racedriver/promp.hpp"
#include "racedriver/track.hpp"

namespace racedriver {

struct SynthesisConfig {
  double center_spacing = kDefaultCenterSpacing;  ///< m between basis centers
  double relative_ridge = kDefaultRelativeRidge;
  BandConfig band{};
  CurvilinearConfig curvilinear{};
  double window = 120.0;             ///< m, curvature matching window
  double overlap = 0.5;              ///< fraction shared by neighbouring windows
  std::size_t window_samples = 32;   ///< curvature samples compared per window
  std::size_t recommended_laps = 3;  ///< fewer laps only produce a warning
};

/// Laps driven on one known track.
struct TrackDemonstrations {
  Track track;
  std::vector<Polyline> laps;
};

struct LibraryEntry {
  std::string track_id;
  Track frame;   ///< the track re-referenced to its mean line
  ProMP promp;   ///< variables {"dy", "kappa"}
  std::size_t laps = 0;
  double fit_rms_dy = 0.0;  ///< mean per-lap dy reconstruction RMS, m
  std::vector<std::string> warnings;

  /// Mean curvature of the library track at its stations.
  std::vector<double> mean_kappa() const {
    const Eigen::MatrixXd m = promp.mean_trajectory();
    const Eigen::VectorXd k = m.col(static_cast<Eigen::Index>(promp.variable_index("kappa")));
    return {k.data(), k.data() + k.size()};
  }

  /// Curvature of the frame's reference line, smoothed onto the basis. This
  /// is what windows are matched against: a new track offers the same
  /// quantity for its own mean line, while the demonstration mean curvature
  /// carries lap noise.
  std::vector<double> reference_kappa() const {
    const auto& k = frame.reference().curvatures();
    const Eigen::VectorXd w =
        fit_weights(Eigen::Map<const Eigen::VectorXd>(k.data(), static_cast<Eigen::Index>(k.size())), promp.basis);
    const Eigen::VectorXd sm = basis_matrix(promp.basis) * w;
    return {sm.data(), sm.data() + sm.size()};
  }

  Eigen::MatrixXd dy_covariance() const {
    const auto nbf = static_cast<Eigen::Index>(promp.basis.n_bf);
    const Eigen::Index b = promp.block_start(promp.variable_index("dy"));
    return promp.sigma_w.block(b, b, nbf, nbf);
  }
};

struct DemonstrationLibrary {
  std::vector<LibraryEntry> entries;

  bool empty() const { return entries.empty(); }

  const LibraryEntry& find(const std::string& id) const {
    for (const auto& e : entries) {
      if (e.track_id == id) return e;
    }
    throw Error(ErrorCode::InvalidArgument, "no library entry for track '" + id + "'");
  }
};

/// Maps laps onto the frame and fits the per-track (dy, kappa) distribution.
inline LibraryEntry fit_library_entry(const std::string& id, const Track& frame, const std::vector<Polyline>& laps,
                                      const SynthesisConfig& cfg = {}) {
  if (laps.empty()) throw Error(ErrorCode::InsufficientDemos, "track '" + id + "' has no demonstration laps");
  const BasisConfig basis =
      basis_for_track(frame.length(), frame.station_count(), cfg.center_spacing, cfg.relative_ridge);
  const RidgeProjector proj(basis);
  const auto n = static_cast<Eigen::Index>(frame.station_count());
  std::vector<Eigen::VectorXd> ws;
  double rms_sum = 0.0;
  for (const auto& lap : laps) {
    const CurvilinearTrace trace = to_curvilinear(lap, frame, cfg.curvilinear);
    Eigen::MatrixXd traj(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      traj(i, 0) = trace.dy[static_cast<std::size_t>(i)];
      traj(i, 1) = trace.kappa[static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd w = proj.fit(traj);
    const Eigen::VectorXd dy_fit = proj.phi() * w.head(static_cast<Eigen::Index>(basis.n_bf));
    rms_sum += std::sqrt((dy_fit - traj.col(0)).squaredNorm() / static_cast<double>(n));
    ws.push_back(w);
  }
  auto dist = fit_distribution(ws);
  LibraryEntry e;
  e.track_id = id;
  e.frame = frame;
  e.promp.basis = basis;
  e.promp.variables = {"dy", "kappa"};
  e.promp.mu_w = std::move(dist.mu);
  e.promp.sigma_w = std::move(dist.sigma);
  e.laps = laps.size();
  e.fit_rms_dy = rms_sum / static_cast<double>(laps.size());
  if (laps.size() < cfg.recommended_laps) {
    e.warnings.push_back("only " + std::to_string(laps.size()) + " lap(s); at least " +
                         std::to_string(cfg.recommended_laps) + " recommended");
  }
  return e;
}

/// One entry per track; each track is re-referenced to its elastic-band mean line.
inline DemonstrationLibrary build_library(const std::vector<TrackDemonstrations>& demos, const SynthesisConfig& cfg = {}) {
  DemonstrationLibrary lib;
  for (const auto& d : demos) {
    if (d.laps.empty()) {
      throw Error(ErrorCode::InsufficientDemos, "track '" + d.track.name() + "' has no demonstration laps");
    }
    const MeanLine ml = build_mean_line(d.track, cfg.band);
    lib.entries.push_back(fit_library_entry(d.track.name(), d.track.with_reference(ml.line), d.laps, cfg));
  }
  return lib;
}

/// Library window chosen for one window of the new track.
struct WindowMatch {
  double center_s{};      ///< window center on the new track
  std::size_t entry{};    ///< library entry index
  double library_s{};     ///< matched window center on the library track
  double cost{};          ///< mean |kappa difference|, 1/m
};

struct VarianceTransfer {
  Eigen::MatrixXd sigma;  ///< dy weight covariance on the new basis
  std::vector<WindowMatch> matches;
  bool repaired = false;
};

/// Builds the dy weight covariance of a new track from the library.
///
/// `kappa` holds the new mean line's curvature at the stations of `basis`.
/// Windows of length cfg.window advance by window * (1 - overlap); each is
/// compared against every library station after resampling both curvature
/// windows to cfg.window_samples points. Each matched covariance block enters
/// with triangular weights centered on its window.
inline VarianceTransfer estimate_variance(const std::vector<double>& kappa, const BasisConfig& basis,
                                          const DemonstrationLibrary& lib, const SynthesisConfig& cfg = {}) {
  if (lib.empty()) throw Error(ErrorCode::EmptyLibrary, "variance transfer needs at least one library track");
  if (kappa.size() != basis.n_stations) throw Error(ErrorCode::InvalidArgument, "curvature must be given per station");
  if (!(cfg.window >= 3.0 * basis.center_spacing())) {
    throw Error(ErrorCode::InvalidArgument, "matching window must cover at least three basis centers");
  }
  if (!(cfg.overlap >= 0.0 && cfg.overlap < 1.0) || cfg.window_samples < 2) {
    throw Error(ErrorCode::InvalidArgument, "invalid window overlap or sample count");
  }
  const double L = basis.track_length;
  const double ds = L / static_cast<double>(basis.n_stations);
  const auto windows = static_cast<std::size_t>(std::max(1.0, std::round(L / (cfg.window * (1.0 - cfg.overlap)))));
  const double stride = L / static_cast<double>(windows);
  const double half = 0.5 * cfg.window;
  const std::size_t m = cfg.window_samples;
  const auto nbf = static_cast<Eigen::Index>(basis.n_bf);

  struct Source {
    std::vector<double> kappa;
    double ds;
    double length;
    Eigen::MatrixXd sigma;
    double spacing;
    std::size_t period;  // distinct centers on the loop
  };
  std::vector<Source> sources;
  for (const auto& e : lib.entries) {
    const double len = e.promp.basis.track_length;
    sources.push_back({e.reference_kappa(), len / static_cast<double>(e.promp.basis.n_stations), len, e.dy_covariance(),
                       e.promp.basis.center_spacing(), e.promp.basis.n_bf - 1});
  }

  struct Placement {
    std::size_t entry = 0;
    std::vector<Eigen::Index> idx, lib_idx;
    std::vector<double> weight;
  };
  std::vector<Placement> placements;
  VarianceTransfer out;
  std::vector<double> probe(m), offsets(m);
  for (std::size_t k = 0; k < m; ++k) offsets[k] = -half + cfg.window * static_cast<double>(k) / static_cast<double>(m - 1);

  for (std::size_t w = 0; w < windows; ++w) {
    const double center = stride * static_cast<double>(w);
    for (std::size_t k = 0; k < m; ++k) probe[k] = interp_periodic(kappa, ds, center + offsets[k]);

    WindowMatch best{center, 0, 0.0, std::numeric_limits<double>::infinity()};
    for (std::size_t e = 0; e < sources.size(); ++e) {
      const Source& src = sources[e];
      for (std::size_t p = 0; p < src.kappa.size(); ++p) {
        const double s = src.ds * static_cast<double>(p);
        double cost = 0.0;
        for (std::size_t k = 0; k < m && cost < best.cost * static_cast<double>(m); ++k) {
          cost += std::abs(probe[k] - interp_periodic(src.kappa, src.ds, s + offsets[k]));
        }
        cost /= static_cast<double>(m);
        if (cost < best.cost) best = {center, e, s, cost};
      }
    }
    out.matches.push_back(best);

    const Source& src = sources[best.entry];
    Placement pl;
    pl.entry = best.entry;
    for (Eigen::Index j = 0; j < nbf; ++j) {
      const double off = circular_diff(basis.center(static_cast<std::size_t>(j)), center, L);
      const double t = 1.0 - std::abs(off) / half;
      if (t <= 0.0) continue;
      const double ls = wrap_s(best.library_s + off, src.length);
      pl.idx.push_back(j);
      pl.lib_idx.push_back(static_cast<Eigen::Index>(static_cast<std::size_t>(std::lround(ls / src.spacing)) % src.period));
      pl.weight.push_back(t);
    }
    placements.push_back(std::move(pl));
  }

  // Sigma = sum_k D_k S_k D_k over windows, with D_k the triangular window
  // weights normalized so their squares sum to one per basis index. Each term
  // is PSD and confined to its window, and variances are a weighted average
  // of the matched ones. Windows never couple to each other, so matches from
  // different source tracks stay uncorrelated.
  std::vector<double> norm2(static_cast<std::size_t>(nbf), 0.0);
  for (const auto& pl : placements) {
    for (std::size_t a = 0; a < pl.idx.size(); ++a) norm2[static_cast<std::size_t>(pl.idx[a])] += pl.weight[a] * pl.weight[a];
  }
  out.sigma = Eigen::MatrixXd::Zero(nbf, nbf);
  for (const auto& pl : placements) {
    const Eigen::MatrixXd& sig = sources[pl.entry].sigma;
    std::vector<double> d(pl.idx.size());
    for (std::size_t a = 0; a < d.size(); ++a) d[a] = pl.weight[a] / std::sqrt(norm2[static_cast<std::size_t>(pl.idx[a])]);
    for (std::size_t a = 0; a < d.size(); ++a) {
      for (std::size_t b = 0; b < d.size(); ++b) {
        out.sigma(pl.idx[a], pl.idx[b]) += d[a] * d[b] * sig(pl.lib_idx[a], pl.lib_idx[b]);
      }
    }
  }
  out.repaired = repair_psd(out.sigma);
  return out;
}

/// Mean line plus transferred lateral spread for a new track.
struct GeneralizedLine {
  Track frame;               ///< new track re-referenced to the mean line
  MeanLine band;             ///< elastic-band result on the original track
  Eigen::VectorXd mu_kappa;  ///< mean-line curvature weights
  ProMP dy_promp;            ///< variables {"dy"}, zero mean
  VarianceTransfer transfer;

  const Polyline& mean_line() const { return frame.reference().points(); }
};

inline GeneralizedLine generalize(const DemonstrationLibrary& lib, const Track& track, const SynthesisConfig& cfg = {}) {
  if (lib.empty()) throw Error(ErrorCode::EmptyLibrary, "generalization needs at least one library track");
  GeneralizedLine g;
  g.band = build_mean_line(track, cfg.band);
  g.frame = track.with_reference(g.band.line);
  const BasisConfig basis =
      basis_for_track(g.frame.length(), g.frame.station_count(), cfg.center_spacing, cfg.relative_ridge);
  const auto& k = g.frame.reference().curvatures();
  g.mu_kappa = fit_weights(Eigen::Map<const Eigen::VectorXd>(k.data(), static_cast<Eigen::Index>(k.size())), basis);
  const Eigen::VectorXd smooth = basis_matrix(basis) * g.mu_kappa;
  g.transfer = estimate_variance({smooth.data(), smooth.data() + smooth.size()}, basis, lib, cfg);
  g.dy_promp.basis = basis;
  g.dy_promp.variables = {"dy"};
  g.dy_promp.mu_w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis.n_bf));
  g.dy_promp.sigma_w = g.transfer.sigma;
  return g;
}

struct SampledLine {
  Polyline points;
  std::vector<double> dy;
  double inside_fraction = 1.0;  ///< share of arc length within the track borders
};

/// Fraction of the closed line's arc length whose segment midpoints lie within the borders.
inline double inside_fraction(const Polyline& line, const Track& track) {
  double inside = 0.0, total = 0.0;
  std::optional<double> hint;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const Vec2 a = line[i];
    const Vec2 b = line[(i + 1) % line.size()];
    const double len = distance(a, b);
    const auto pr = track.locate((a + b) * 0.5, hint);
    hint = pr.s;
    total += len;
    if (track.border_excess(pr.s, pr.d) <= 0.0) inside += len;
  }
  return total > 0.0 ? inside / total : 0.0;
}

/// Draws `count` lines around the mean line; deterministic given the seed.
inline std::vector<SampledLine> sample_lines(const GeneralizedLine& gen, const Track& track, std::size_t count,
                                             std::uint64_t seed, const CurvilinearConfig& curv = {}) {
  std::vector<SampledLine> out;
  for (const auto& tau : sample(gen.dy_promp, count, seed)) {
    SampledLine l;
    l.dy.assign(tau.data(), tau.data() + tau.rows());
    l.points = from_curvilinear(l.dy, gen.frame, curv);
    l.inside_fraction = inside_fraction(l.points, track);
    out.push_back(std::move(l));
  }
  return out;
}

/// Arc-length weighted inside fraction over a set of samples.
inline double inside_fraction(const std::vector<SampledLine>& lines) {
  double inside = 0.0, total = 0.0;
  for (const auto& l : lines) {
    const double len = closed_length(l.points);
    inside += l.inside_fraction * len;
    total += len;
  }
  return total > 0.0 ? inside / total : 0.0;
}

}  // namespace racedriver
