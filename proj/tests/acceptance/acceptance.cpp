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


// Acceptance runner. One PASS/FAIL line per criterion, nonzero exit if any
// fails. Each check also has a wall-clock limit.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "racedriver/racedriver.hpp"

using namespace racedriver;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

BasisConfig basis(std::size_t n_bf, double length, std::size_t stations) {
  BasisConfig c;
  c.n_bf = n_bf;
  c.track_length = length;
  c.n_stations = stations;
  c.width = c.center_spacing() * c.center_spacing();
  return c;
}

ProMP random_promp(const BasisConfig& b, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  ProMP p;
  p.basis = b;
  p.variables = {"v"};
  p.mu_w = Eigen::VectorXd::NullaryExpr(static_cast<Eigen::Index>(b.n_bf), [&] { return n01(rng); });
  p.sigma_w = oracle::random_spd(static_cast<Eigen::Index>(b.n_bf), rng);
  return p;
}

Observation scalar(double s, double y, double var) {
  Observation o;
  o.s_prime = s;
  o.variables = {0};
  o.y_star = Eigen::VectorXd::Constant(1, y);
  o.sigma_y = Eigen::MatrixXd::Constant(1, 1, var);
  return o;
}

// 1. conditioning against the joint-Gaussian oracle
Outcome conditioning_oracle() {
  std::mt19937_64 rng(2026);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const ProMP p = random_promp(basis(5, 50.0, 40), rng);
    const Observation o = scalar(50.0 * u01(rng), 3.0 * n01(rng), 0.01 + u01(rng));
    const ProMP post = condition(p, o);
    const auto ref = oracle::condition_joint(p.mu_w, p.sigma_w, p.psi_at(o.s_prime, o.variables), o.y_star, o.sigma_y);
    worst = std::max({worst, (post.mu_w - ref.mu).cwiseAbs().maxCoeff(), (post.sigma_w - ref.sigma).cwiseAbs().maxCoeff()});
  }
  return {worst <= 1e-9, fmt("100 priors, max abs deviation %.2e (limit 1e-9)", worst)};
}

// 2. zero and infinite observation noise
Outcome noise_limits() {
  std::mt19937_64 rng(7);
  double pin = 0.0, rel = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const ProMP p = random_promp(basis(12, 100.0, 200), rng);
    const double s = 3.0 + 4.5 * trial;
    const ProMP exact = condition(p, scalar(s, 2.5, 0.0));
    pin = std::max(pin, std::abs(eval_basis(p.basis, s).dot(exact.mu_w) - 2.5));
    const ProMP none = condition(p, scalar(s, 2.5, std::numeric_limits<double>::max() / 1e10));
    rel = std::max({rel, (none.mu_w - p.mu_w).norm() / p.mu_w.norm(), (none.sigma_w - p.sigma_w).norm() / p.sigma_w.norm()});
  }
  return {pin <= 1e-6 && rel <= 1e-6, fmt("pin error %.2e, uninformative change %.2e relative (limits 1e-6)", pin, rel)};
}

// 3. masked conditioning on a three-corner track stays at its corner
Outcome masking_locality() {
  const Track track = synthetic::make_layout_track("three", synthetic::three_corner_layout());
  const auto line = build_mean_line(track).line;
  const auto an = analyse_track(line, track);
  if (an.corners.size() != 3) return {false, "expected three corners"};
  AdaptationConfig cfg;
  AdaptationModel m = make_adaptation_model(make_target(line, PerformanceEnvelope{}), track, cfg);
  const auto& ref = track.reference();
  const double s0 = m.station_of(ref.position_at(an.corners[0].apex_s));
  Observation o;
  o.s_prime = s0;
  o.variables = {kVarX, kVarY};
  const Vec2 shift = ref.normal_at(an.corners[0].apex_s) * 1.5;
  const Vec2 y = m.mean_point(s0) + shift - m.frame.reference().position_at(s0);
  o.y_star = Eigen::Vector2d(y.x, y.y);
  o.sigma_y = Eigen::Matrix2d::Identity() * 0.01;
  const Polyline before = m.mean_points();
  detail::condition_all(m, {o}, cfg);
  const Polyline after = m.mean_points();
  auto change_near = [&](double apex_s) {
    double worst = 0.0;
    for (std::size_t i = 0; i < before.size(); ++i) {
      if (std::abs(circular_diff(m.frame.station(i), m.station_of(ref.position_at(apex_s)), track.length())) < 30.0) {
        worst = std::max(worst, distance(before[i], after[i]));
      }
    }
    return worst;
  };
  const double local = change_near(an.corners[0].apex_s);
  const double far = std::max(change_near(an.corners[1].apex_s), change_near(an.corners[2].apex_s));
  return {local > 0.5 && far < 0.01 * local, fmt("local change %.3f m, other corners %.2e m (ratio %.2e, limit 1e-2)",
                                                 local, far, far / local)};
}

// 4. ridge reconstruction of a smooth line on a 1 km loop
Outcome ridge_reconstruction() {
  const double L = 1000.0, R = L / (2.0 * kPi), amp = 3.0;
  const Track track("loop", synthetic::circle_points(R, 1.0), 8.0, 8.0);
  const std::size_t n = track.station_count();
  Polyline pts;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = track.station(i);
    const double d = amp * (std::sin(2.0 * kPi * 3.0 * s / L) + 0.4 * std::cos(2.0 * kPi * 7.0 * s / L));
    pts.push_back(track.reference().offset_point(s, d));
  }
  const auto trace = to_curvilinear(pts, track);
  const BasisConfig b = basis_for_track(track.length(), n);
  const Eigen::Map<const Eigen::VectorXd> dy(trace.dy.data(), static_cast<Eigen::Index>(n));
  const Eigen::VectorXd w = fit_weights(dy, b);
  const Eigen::VectorXd rec = basis_matrix(b) * w;
  // compare against the generating offsets
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = track.station(i);
    const double d = amp * (std::sin(2.0 * kPi * 3.0 * s / L) + 0.4 * std::cos(2.0 * kPi * 7.0 * s / L));
    sq += std::pow(rec(static_cast<Eigen::Index>(i)) - d, 2);
  }
  const double rms = std::sqrt(sq / static_cast<double>(n));
  return {rms < 0.01 * amp, fmt("%.0f basis functions, RMS %.4f m = %.3f%% of amplitude (limit 1%%)",
                                static_cast<double>(b.n_bf), rms, 100.0 * rms / amp)};
}

// 5. speed profile on a circle and an oval
Outcome speed_analytics() {
  PerformanceEnvelope env;
  env.ay_max = 10.0;
  env.ax_acc = AccelerationTable::constant(5.0);
  env.ax_brake = 10.0;
  env.v_max = 100.0;
  const auto circle = estimate_speed(synthetic::circle_points(50.0, 0.25), env);
  double v_err = 0.0;
  for (double v : circle.v) v_err = std::max(v_err, std::abs(v - 22.3607) / 22.3607);
  const double straight = 300.0, radius = 60.0;
  const auto oval = estimate_speed(synthetic::oval_points(straight, radius, 1.0), env);
  const double ref = oracle::oval_lap_time(straight, radius, env.ay_max, env.ax_brake, env.v_max,
                                           [&](double) { return 5.0; }, 1e-4);
  const double t_err = std::abs(oval.lap_time - ref) / ref;
  return {v_err < 0.005 && t_err < 0.01, fmt("circle speed error %.3f%% (limit 0.5%%), oval %.3f s vs %.3f s (%.3f%%, limit 1%%)",
                                             100.0 * v_err, oval.lap_time, ref, 100.0 * t_err)};
}

// 6. closed loop on the oval at 90% envelope
Outcome closed_loop() {
  const VehicleParams params;
  const Track track = synthetic::make_oval_track();
  PerformanceEnvelope env = envelope_from_vehicle(params);
  env.scale = 0.9;
  const auto target = make_target(build_mean_line(track).line, env);
  const PreviewController pc(PolicyConfig::for_vehicle(params));
  const auto log = run_lap(pc, target, track, params);
  if (!log.completed()) return {false, std::string("lap not completed: ") + to_string(log.status)};
  const double err = std::abs(log.lap_time - target.lap_time()) / target.lap_time();
  return {err < 0.1, fmt("lap %.2f s, predicted %.2f s, %.2f%% apart (limit 10%%)", log.lap_time, target.lap_time(),
                         100.0 * err)};
}

// 7. generalization to a held-out track
Outcome generalization() {
  const Track a = synthetic::make_layout_track("a", synthetic::training_layout_a());
  const Track b = synthetic::make_layout_track("b", synthetic::training_layout_b());
  const Track held = synthetic::make_layout_track("held", synthetic::held_out_layout());
  const auto lib = build_library({{a, synthetic::noisy_demonstrations(a, 20, 101)},
                                  {b, synthetic::noisy_demonstrations(b, 20, 102)}});
  const auto g = generalize(lib, held);
  const auto lines = sample_lines(g, held, 25, 103);
  const double inside = inside_fraction(lines);
  const PerformanceEnvelope env;
  const double t_mean = estimate_speed(g.mean_line(), env).lap_time;
  const double t_band = estimate_speed(build_mean_line(held).line, env).lap_time;
  const double gap = std::abs(t_mean - t_band) / t_band;
  return {inside >= 0.95 && gap <= 0.05, fmt("%.2f%% of sampled arc length inside (limit 95%%), mean line %.2f s vs band %.2f s",
                                             100.0 * inside, t_mean, t_band)};
}

// 8. variance transfer onto a copy of a library track
Outcome variance_transfer() {
  const Track a = synthetic::make_layout_track("a", synthetic::training_layout_a());
  const Track b = synthetic::make_layout_track("b", synthetic::training_layout_b());
  const auto lib = build_library({{a, synthetic::noisy_demonstrations(a, 30, 1)},
                                  {b, synthetic::noisy_demonstrations(b, 30, 2)}});
  const auto g = generalize(lib, a);
  const auto& e = lib.find("a");
  const Eigen::MatrixXd src = e.promp.station_variance();
  const Eigen::MatrixXd dst = g.dy_promp.station_variance();
  const Eigen::Index col = static_cast<Eigen::Index>(e.promp.variable_index("dy"));
  if (src.rows() != dst.rows()) return {false, "station counts differ"};
  Eigen::Index good = 0;
  for (Eigen::Index i = 0; i < src.rows(); ++i) {
    const double s = src(i, col), d = dst(i, 0);
    if (d <= 2.0 * s && d >= 0.5 * s) ++good;
  }
  const double share = static_cast<double>(good) / static_cast<double>(src.rows());
  return {share >= 0.9, fmt("%.1f%% of stations within a factor of 2 (limit 90%%)", 100.0 * share)};
}

std::vector<AdaptationState> g_runs;  // runs kept for criterion 11

// 9. adaptation completes a lap that fails at two corners
Outcome adaptation_completion() {
  const Track track = synthetic::make_layout_track("six", synthetic::six_corner_layout());
  const auto line = build_mean_line(track).line;
  const auto an = analyse_track(line, track);
  PerformanceEnvelope env;
  env.scale = 0.85;
  TargetTrajectory t = make_target(line, env);
  for (const std::size_t k : {std::size_t{1}, std::size_t{3}}) {
    const CornerInfo& c = an.corners[k];
    for (std::size_t i = 0; i < t.speed.size(); ++i) {
      const double s = t.line.station(i);
      if (circular_diff(s, c.entry_s, track.length()) > -60.0 && circular_diff(c.exit_s, s, track.length()) > 0.0) {
        t.speed[i] *= 1.2;
      }
    }
  }
  const PreviewController pc(PolicyConfig::for_vehicle({}));
  AdaptationConfig cfg;
  const auto st = adaptation_loop(make_adaptation_model(t, track, cfg), track, pc, {}, cfg);
  g_runs.push_back(st);
  std::set<std::size_t> failing;
  for (const auto& r : st.records) {
    if (r.status != LapStatus::Completed && r.corner) failing.insert(*r.corner);
  }
  std::size_t per_corner = 0;
  for (const auto& [k, n] : st.corner_iterations()) per_corner = std::max(per_corner, n);
  const auto first = st.first_completion();
  const bool ok = failing.size() >= 2 && first && *first <= 20 && per_corner <= 5;
  return {ok, fmt("failing corners %.0f (need >= 2), first completed lap at iteration %.0f (limit 20), "
                  "at most %.0f iterations on one corner (limit 5)",
                  static_cast<double>(failing.size()), first ? static_cast<double>(*first) : -1.0,
                  static_cast<double>(per_corner))};
}

// 10. scaling on long straights
Outcome scaling_benefit() {
  const Track track = synthetic::make_layout_track("long", synthetic::long_straight_layout());
  const auto line = build_mean_line(track).line;
  const auto an = analyse_track(line, track);
  PerformanceEnvelope env;
  env.scale = 0.6;
  const auto target = make_target(line, env);
  const PreviewController pc(PolicyConfig::for_vehicle({}));
  const auto before = run_lap(pc, target, track);
  if (!before.completed()) return {false, "conservative target does not complete"};
  const auto r = speed_scaling(target, before, an, track);
  const auto after = run_lap(pc, r.target, track);
  if (r.scaled.empty() || !after.completed()) return {false, "no scaling applied or scaled lap failed"};
  double coverage = 1.0;
  for (const auto& iv : r.scaled) coverage = std::min(coverage, full_throttle_share(after, iv, track.length()));

  // downstream failures lock; locked straights are never raised again
  AdaptationConfig cfg;
  cfg.scale_brake = 1.6;
  cfg.budget = 8;
  const auto st = adaptation_loop(make_adaptation_model(target, track, cfg), track, pc, {}, cfg);
  g_runs.push_back(st);
  std::set<long> locked;
  std::size_t locks = 0, rescaled = 0;
  for (const auto& rec : st.records) {
    for (const auto& e : rec.events) {
      const long key = std::lround(e.station);
      if (e.kind == EventKind::IntervalLocked) {
        locked.insert(key);
        ++locks;
      }
      if (e.kind == EventKind::SpeedScaling && locked.count(key)) ++rescaled;
    }
  }
  const bool ok = after.lap_time < before.lap_time && coverage >= 0.9 && locks > 0 && rescaled == 0;
  return {ok, fmt("lap %.2f s -> %.2f s, full throttle on scaled straights >= %.1f%% (limit 90%%), ",
                  before.lap_time, after.lap_time, 100.0 * coverage) +
                  fmt("%.0f intervals locked, %.0f re-scaled", static_cast<double>(locks), static_cast<double>(rescaled))};
}

// 11. best lap time never increases; the loop cannot touch policy or plant
Outcome monotone_improvement() {
  using Loop = AdaptationState (*)(const AdaptationModel&, const Track&, const Policy&, const VehicleParams&,
                                   const AdaptationConfig&);
  [[maybe_unused]] const Loop loop = &adaptation_loop;  // const access only
  if (g_runs.empty()) return {false, "no adaptation runs recorded"};
  std::size_t checked = 0;
  for (const auto& st : g_runs) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : st.records) {
      if (std::isnan(r.best_lap_time)) continue;
      if (r.best_lap_time > best) return {false, fmt("best lap rose at iteration %.0f", static_cast<double>(r.iteration))};
      best = r.best_lap_time;
      ++checked;
    }
  }
  // policy and plant are taken by const reference; check their state after a run too
  const Track track = synthetic::make_oval_track();
  const PreviewController pc(PolicyConfig::for_vehicle({}));
  const VehicleParams params;
  const PolicyConfig policy_before = pc.config();
  const VehicleParams params_before = params;
  PerformanceEnvelope env;
  env.scale = 0.7;
  AdaptationConfig cfg;
  cfg.budget = 2;
  (void)adaptation_loop(make_adaptation_model(make_target(build_mean_line(track).line, env), track, cfg), track, pc,
                        params, cfg);
  const bool same = std::memcmp(&pc.config(), &policy_before, sizeof(PolicyConfig)) == 0 &&
                    std::memcmp(&params, &params_before, sizeof(VehicleParams)) == 0;
  return {same, fmt("%.0f recorded best-lap values non-increasing over %.0f runs; policy and plant unchanged",
                    static_cast<double>(checked), static_cast<double>(g_runs.size()))};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {1, "conditioning oracle", 5.0, conditioning_oracle},
      {2, "noise limits", 1.0, noise_limits},
      {3, "masking locality", 10.0, masking_locality},
      {4, "ridge reconstruction", 1.0, ridge_reconstruction},
      {5, "speed analytics", 5.0, speed_analytics},
      {6, "closed loop", 30.0, closed_loop},
      {7, "track generalization", 120.0, generalization},
      {8, "variance transfer", 60.0, variance_transfer},
      {9, "adaptation completion", 300.0, adaptation_completion},
      {10, "scaling benefit", 120.0, scaling_benefit},
      {11, "monotone improvement", 60.0, monotone_improvement},
  };
  int failed = 0;
  for (const auto& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && secs < c.limit_s;
    if (!pass) ++failed;
    std::printf("%s  %2d %-22s %s [%.2f s, limit %.0f s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                c.limit_s);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
  return failed == 0 ? 0 : 1;
}
