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
 *  \brief File formats.
 *
 *  Plain CSV for tracks, laps and targets; JSON for ProMPs, libraries,
 *  generalized lines, adaptation reports and the run configuration.
 *  Needs nlohmann/json on the include path as "json.hpp".
 *
 *  track CSV   `x,y,width_left,width_right`, optional `# name: <id>` line
 *  lap CSV     `lap,t,x,y,v,steer,throttle,brake`, shared by demonstrations and simulated laps
 *  target CSV  `x,y,v`
 *
 *  Lines starting with '#' are comments. Malformed input throws
 *  Error(Schema) naming the file and line.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "racedriver/adaptation.hpp"
#include "racedriver/driver_policy.hpp"
#include "racedriver/path_synthesis.hpp"
#include "racedriver/promp.hpp"
#include "racedriver/simulation.hpp"
#include "racedriver/track.hpp"
#include "racedriver/vehicle.hpp"

namespace racedriver::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] inline void schema_error(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::Schema, where + ": " + what);
}

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> line;               ///< source line of each row
  std::map<std::string, std::string> comments;  ///< `# key: value` lines

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) schema_error(path, "missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
  std::string where(std::size_t row) const { return path + ":" + std::to_string(line[row]); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, sep)) out.push_back(trim(cell));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double parse_number(const std::string& cell, const std::string& where) {
  if (cell.empty()) schema_error(where, "empty cell");
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    schema_error(where, "not a number: '" + cell + "'");
  }
  if (used != cell.size()) schema_error(where, "not a number: '" + cell + "'");
  if (!std::isfinite(v)) schema_error(where, "non-finite value");
  return v;
}

inline std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

}  // namespace detail

/// `# key: value` lines written ahead of a CSV header.
using Meta = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline void write_meta(std::ostream& out, const Meta& meta) {
  for (const auto& [k, v] : meta) out << "# " << k << ": " << v << '\n';
}

}  // namespace detail

inline CsvTable parse_csv(std::istream& in, const std::string& path) {
  CsvTable t;
  t.path = path;
  std::string raw;
  std::size_t n = 0;
  while (std::getline(in, raw)) {
    ++n;
    const std::string s = detail::trim(raw);
    if (s.empty()) continue;
    if (s[0] == '#') {
      const auto colon = s.find(':');
      if (colon != std::string::npos) t.comments[detail::trim(s.substr(1, colon - 1))] = detail::trim(s.substr(colon + 1));
      continue;
    }
    auto cells = detail::split(s);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    const std::string where = path + ":" + std::to_string(n);
    if (cells.size() != t.header.size()) {
      schema_error(where, "expected " + std::to_string(t.header.size()) + " fields, found " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(detail::parse_number(c, where));
    t.rows.push_back(std::move(row));
    t.line.push_back(n);
  }
  if (t.header.empty()) schema_error(path, "no header line");
  return t;
}

inline CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::EmptyInput, "cannot open " + path.string());
  return parse_csv(in, path.string());
}

// ---------------------------------------------------------------------------
// Tracks

/// Checks a reference line for closure and strictly increasing arc length.
inline void validate_track_points(const Polyline& pts, const CsvTable& t) {
  if (pts.size() < 4) schema_error(t.path, "a track needs at least 4 points");
  double longest = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double seg = distance(pts[i - 1], pts[i]);
    if (!(seg > 1e-9)) schema_error(t.where(i), "repeated point, arc length must increase");
    longest = std::max(longest, seg);
  }
  const double gap = distance(pts.back(), pts.front());
  if (gap > 5.0 * longest) schema_error(t.where(pts.size() - 1), "reference line is not closed");
}

inline Track parse_track(const CsvTable& t, const std::string& fallback_name,
                         double spacing = kDefaultStationSpacing) {
  const std::size_t cx = t.column("x"), cy = t.column("y"), cl = t.column("width_left"), cr = t.column("width_right");
  Polyline pts;
  std::vector<double> wl, wr;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    if (!(r[cl] > 0.0) || !(r[cr] > 0.0)) schema_error(t.where(i), "widths must be positive");
    pts.push_back({r[cx], r[cy]});
    wl.push_back(r[cl]);
    wr.push_back(r[cr]);
  }
  validate_track_points(pts, t);
  const auto it = t.comments.find("name");
  return Track(it != t.comments.end() ? it->second : fallback_name, pts, wl, wr, spacing);
}

inline Track load_track(const fs::path& path, double spacing = kDefaultStationSpacing) {
  return parse_track(read_csv(path), path.stem().string(), spacing);
}

inline void save_track(const fs::path& path, const Track& track, const Meta& meta = {}) {
  auto out = detail::open_out(path);
  out << "# name: " << track.name() << "\n";
  detail::write_meta(out, meta);
  out << "x,y,width_left,width_right\n";
  const auto& p = track.reference().points();
  for (std::size_t i = 0; i < p.size(); ++i) {
    out << p[i].x << ',' << p[i].y << ',' << track.width_left()[i] << ',' << track.width_right()[i] << '\n';
  }
}

// ---------------------------------------------------------------------------
// Laps

struct LapRecord {
  double t = 0.0;
  double x = 0.0, y = 0.0;
  double v = 0.0;
  double steer = 0.0, throttle = 0.0, brake = 0.0;
};

using Lap = std::vector<LapRecord>;

inline Lap lap_records(const LapLog& log) {
  Lap out;
  out.reserve(log.samples.size());
  for (const auto& s : log.samples) {
    out.push_back({s.t, s.state.x, s.state.y, s.state.speed(), s.action.steer, s.action.throttle, s.action.brake});
  }
  return out;
}

/// Laps from a polyline, driven at constant speed; used for synthetic demonstrations.
inline Lap lap_from_line(const Polyline& line, double v = 20.0) {
  Lap out;
  double t = 0.0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (i > 0) t += distance(line[i - 1], line[i]) / v;
    out.push_back({t, line[i].x, line[i].y, v, 0.0, 0.0, 0.0});
  }
  return out;
}

inline Polyline lap_points(const Lap& lap) {
  Polyline out;
  out.reserve(lap.size());
  for (const auto& r : lap) out.push_back({r.x, r.y});
  return out;
}

inline std::vector<Lap> parse_laps(const CsvTable& t) {
  const std::size_t cl = t.column("lap"), ct = t.column("t"), cx = t.column("x"), cy = t.column("y"),
                    cv = t.column("v"), cs = t.column("steer"), cg = t.column("throttle"), cb = t.column("brake");
  std::vector<Lap> laps;
  std::map<long, std::size_t> index;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    if (r[cl] < 0.0 || r[cl] != std::floor(r[cl])) schema_error(t.where(i), "lap must be a non-negative integer");
    const auto id = static_cast<long>(r[cl]);
    auto [it, fresh] = index.try_emplace(id, laps.size());
    if (fresh) laps.emplace_back();
    Lap& lap = laps[it->second];
    if (!lap.empty() && !(r[ct] >= lap.back().t)) schema_error(t.where(i), "time must not decrease within a lap");
    lap.push_back({r[ct], r[cx], r[cy], r[cv], r[cs], r[cg], r[cb]});
  }
  return laps;
}

inline std::vector<Lap> load_laps(const fs::path& path) { return parse_laps(read_csv(path)); }

inline void save_laps(const fs::path& path, const std::vector<Lap>& laps, const Meta& meta = {}) {
  auto out = detail::open_out(path);
  detail::write_meta(out, meta);
  out << "lap,t,x,y,v,steer,throttle,brake\n";
  for (std::size_t k = 0; k < laps.size(); ++k) {
    for (const auto& r : laps[k]) {
      out << k << ',' << r.t << ',' << r.x << ',' << r.y << ',' << r.v << ',' << r.steer << ',' << r.throttle << ','
          << r.brake << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Targets

inline TargetTrajectory parse_target(const CsvTable& t) {
  const std::size_t cx = t.column("x"), cy = t.column("y"), cv = t.column("v");
  Polyline pts;
  std::vector<double> v;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    if (!(r[cv] > 0.0)) schema_error(t.where(i), "target speed must be positive");
    pts.push_back({r[cx], r[cy]});
    v.push_back(r[cv]);
  }
  validate_track_points(pts, t);
  if (distance(pts.front(), pts.back()) <= 1e-6) {
    pts.pop_back();
    v.pop_back();
  }
  TargetTrajectory target;
  target.line = ClosedPath(pts);
  target.speed = std::move(v);
  target.validate();
  return target;
}

inline TargetTrajectory load_target(const fs::path& path) { return parse_target(read_csv(path)); }

inline void save_target(const fs::path& path, const TargetTrajectory& target, const Meta& meta = {}) {
  auto out = detail::open_out(path);
  out << "# provenance: " << to_string(target.provenance) << "\n";
  detail::write_meta(out, meta);
  out << "x,y,v\n";
  const auto& p = target.line.points();
  for (std::size_t i = 0; i < p.size(); ++i) out << p[i].x << ',' << p[i].y << ',' << target.speed[i] << '\n';
}

// ---------------------------------------------------------------------------
// JSON

inline json matrix_json(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Eigen::MatrixXd matrix_from(const json& j, const std::string& where) {
  try {
    const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows * cols)) {
      schema_error(where, "matrix size does not match its data");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)].get<double>();
    }
    return m;
  } catch (const json::exception& e) {
    schema_error(where, e.what());
  }
}

inline json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline json to_json(const BasisConfig& b) {
  return {{"n_bf", b.n_bf}, {"width", b.width}, {"track_length", b.track_length}, {"ridge", b.ridge},
          {"n_stations", b.n_stations}};
}

inline BasisConfig basis_from(const json& j) {
  BasisConfig b;
  b.n_bf = j.at("n_bf").get<std::size_t>();
  b.width = j.at("width").get<double>();
  b.track_length = j.at("track_length").get<double>();
  b.ridge = j.at("ridge").get<double>();
  b.n_stations = j.at("n_stations").get<std::size_t>();
  b.validate();
  return b;
}

/// Basis, variable names, mean weights and covariance (row-major).
inline json to_json(const ProMP& p) {
  return {{"basis", to_json(p.basis)}, {"variables", p.variables}, {"mu_w", vector_json(p.mu_w)},
          {"sigma_w", matrix_json(p.sigma_w)}};
}

inline ProMP promp_from(const json& j, const std::string& where = "promp") {
  try {
    ProMP p;
    p.basis = basis_from(j.at("basis"));
    p.variables = j.at("variables").get<std::vector<std::string>>();
    p.mu_w = vector_from(j.at("mu_w"));
    p.sigma_w = matrix_from(j.at("sigma_w"), where + ".sigma_w");
    p.validate();
    return p;
  } catch (const json::exception& e) {
    schema_error(where, e.what());
  }
}

inline json polyline_json(const Polyline& pts) {
  json out = json::array();
  for (const auto& p : pts) out.push_back({p.x, p.y});
  return out;
}

inline Polyline polyline_from(const json& j) {
  Polyline out;
  for (const auto& p : j) out.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return out;
}

inline json to_json(const Track& t) {
  return {{"name", t.name()},
          {"kind", to_string(t.reference_kind())},
          {"spacing", t.spacing()},
          {"points", polyline_json(t.reference().points())},
          {"width_left", t.width_left()},
          {"width_right", t.width_right()}};
}

inline Track track_from(const json& j, const std::string& where = "track") {
  try {
    const auto kind = j.value("kind", std::string("centerline")) == to_string(ReferenceKind::MeanLine)
                          ? ReferenceKind::MeanLine
                          : ReferenceKind::Centerline;
    return Track(j.at("name").get<std::string>(), polyline_from(j.at("points")),
                 j.at("width_left").get<std::vector<double>>(), j.at("width_right").get<std::vector<double>>(),
                 j.at("spacing").get<double>(), kind);
  } catch (const json::exception& e) {
    schema_error(where, e.what());
  }
}

inline json to_json(const DemonstrationLibrary& lib) {
  json entries = json::array();
  for (const auto& e : lib.entries) {
    entries.push_back({{"track_id", e.track_id},
                       {"laps", e.laps},
                       {"fit_rms_dy", e.fit_rms_dy},
                       {"warnings", e.warnings},
                       {"frame", to_json(e.frame)},
                       {"promp", to_json(e.promp)}});
  }
  return {{"format", "racedriver-library"}, {"version", 1}, {"entries", std::move(entries)}};
}

inline DemonstrationLibrary library_from(const json& j, const std::string& where = "library") {
  if (j.value("format", std::string()) != "racedriver-library") schema_error(where, "not a library file");
  DemonstrationLibrary lib;
  try {
    for (const auto& e : j.at("entries")) {
      LibraryEntry le;
      le.track_id = e.at("track_id").get<std::string>();
      le.laps = e.at("laps").get<std::size_t>();
      le.fit_rms_dy = e.at("fit_rms_dy").get<double>();
      le.warnings = e.at("warnings").get<std::vector<std::string>>();
      le.frame = track_from(e.at("frame"), where + "." + le.track_id);
      le.promp = promp_from(e.at("promp"), where + "." + le.track_id);
      lib.entries.push_back(std::move(le));
    }
  } catch (const json::exception& e) {
    schema_error(where, e.what());
  }
  return lib;
}

inline json to_json(const GeneralizedLine& g) {
  return {{"format", "racedriver-generalized"},
          {"version", 1},
          {"frame", to_json(g.frame)},
          {"band_offsets", g.band.offsets},
          {"band_converged", g.band.converged},
          {"mu_kappa", vector_json(g.mu_kappa)},
          {"dy_promp", to_json(g.dy_promp)},
          {"variance_repaired", g.transfer.repaired}};
}

inline GeneralizedLine generalized_from(const json& j, const std::string& where = "generalized") {
  if (j.value("format", std::string()) != "racedriver-generalized") schema_error(where, "not a generalized-line file");
  try {
    GeneralizedLine g;
    g.frame = track_from(j.at("frame"), where + ".frame");
    g.band.line = g.frame.reference().points();
    g.band.offsets = j.at("band_offsets").get<std::vector<double>>();
    g.band.converged = j.at("band_converged").get<bool>();
    g.mu_kappa = vector_from(j.at("mu_kappa"));
    g.dy_promp = promp_from(j.at("dy_promp"), where + ".dy_promp");
    g.transfer.sigma = g.dy_promp.sigma_w;
    g.transfer.repaired = j.at("variance_repaired").get<bool>();
    return g;
  } catch (const json::exception& e) {
    schema_error(where, e.what());
  }
}

inline json to_json(const Observation& o) {
  return {{"station", o.s_prime}, {"variables", o.variables}, {"y_star", vector_json(o.y_star)},
          {"sigma_y", matrix_json(o.sigma_y)}};
}

inline json summary_json(const LapLog& log) {
  json j = {{"status", to_string(log.status)},
            {"completed", log.completed()},
            {"distance", log.distance},
            {"exit_station", log.exit_station},
            {"max_abs_balance", log.max_abs_balance},
            {"message", log.message}};
  j["lap_time"] = log.completed() ? json(log.lap_time) : json(nullptr);
  return j;
}

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

/// Per-iteration adaptation report.
inline json to_json(const AdaptationState& st) {
  json its = json::array();
  for (const auto& r : st.records) {
    json events = json::array();
    for (const auto& e : r.events) {
      json ev = {{"kind", to_string(e.kind)}, {"station", e.station}, {"reason", e.reason}};
      if (e.observation) ev["observation"] = to_json(*e.observation);
      events.push_back(std::move(ev));
    }
    json it = {{"iteration", r.iteration},
               {"status", to_string(r.status)},
               {"lap_time", number_or_null(r.lap_time)},
               {"distance", r.distance},
               {"exit_station", r.exit_station},
               {"target_lap_time", r.target_lap_time},
               {"observations", r.observations},
               {"best_lap_time", number_or_null(r.best_lap_time)},
               {"events", std::move(events)}};
    it["corner"] = r.corner ? json(*r.corner) : json(nullptr);
    its.push_back(std::move(it));
  }
  json iv = json::array();
  for (const auto& s : st.intervals) {
    iv.push_back({{"begin", s.begin_s}, {"end", s.end_s}, {"locked", s.locked}});
  }
  const auto first = st.first_completion();
  return {{"termination", to_string(st.termination)},
          {"message", st.message},
          {"iterations", std::move(its)},
          {"first_completion", first ? json(*first) : json(nullptr)},
          {"best_lap_time", number_or_null(st.best_lap_time)},
          {"scaled_intervals", std::move(iv)}};
}

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::EmptyInput, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    schema_error(path.string(), e.what());
  }
}

inline void write_json(const fs::path& path, const json& j) {
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Run configuration

struct TrackInput {
  std::string id;
  fs::path track;
  fs::path demos;  ///< lap CSV, may be empty
};

struct RunConfig {
  std::vector<TrackInput> tracks;
  SynthesisConfig synthesis{};
  PerformanceEnvelope envelope = envelope_from_vehicle({});
  PolicyConfig policy = PolicyConfig::for_vehicle({});
  VehicleParams vehicle{};
  AdaptationConfig adaptation{};
  std::size_t samples = 25;
  std::uint64_t seed = 0;
  fs::path out = "out";
};

namespace detail {

template <class T>
void read_opt(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

}  // namespace detail

/// Reads a run configuration. Relative paths resolve against the file's directory.
inline RunConfig config_from(const json& j, const fs::path& base = {}, const std::string& where = "config") {
  RunConfig c;
  auto resolve = [&](const std::string& p) { return p.empty() || fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  try {
    if (j.contains("tracks")) {
      for (const auto& t : j.at("tracks")) {
        TrackInput in;
        in.track = resolve(t.at("track").get<std::string>());
        in.id = t.value("id", in.track.stem().string());
        in.demos = resolve(t.value("demos", std::string()));
        c.tracks.push_back(std::move(in));
      }
    }
    if (j.contains("basis")) {
      const auto& b = j.at("basis");
      detail::read_opt(b, "center_spacing", c.synthesis.center_spacing);
      detail::read_opt(b, "relative_ridge", c.synthesis.relative_ridge);
    }
    if (j.contains("envelope")) {
      const auto& e = j.at("envelope");
      detail::read_opt(e, "ay_max", c.envelope.ay_max);
      detail::read_opt(e, "ax_brake", c.envelope.ax_brake);
      detail::read_opt(e, "v_max", c.envelope.v_max);
      detail::read_opt(e, "scale", c.envelope.scale);
      if (e.contains("ax_acc")) {
        const auto& a = e.at("ax_acc");
        if (a.is_number()) {
          c.envelope.ax_acc = AccelerationTable::constant(a.get<double>());
        } else {
          c.envelope.ax_acc.speed = a.at("speed").get<std::vector<double>>();
          c.envelope.ax_acc.accel = a.at("accel").get<std::vector<double>>();
        }
      }
    }
    if (j.contains("policy")) {
      const auto& p = j.at("policy");
      detail::read_opt(p, "speed_gain", c.policy.speed_gain);
      detail::read_opt(p, "lateral_gain", c.policy.lateral_gain);
      detail::read_opt(p, "yaw_damping", c.policy.yaw_damping);
      detail::read_opt(p, "lateral_limit", c.policy.lateral_limit);
      detail::read_opt(p, "oversteer_lift", c.policy.oversteer_lift);
    }
    if (j.contains("adaptation")) {
      const auto& a = j.at("adaptation");
      auto& ac = c.adaptation;
      detail::read_opt(a, "budget", ac.budget);
      detail::read_opt(a, "decrement", ac.decrement);
      detail::read_opt(a, "speed_floor", ac.speed_floor);
      detail::read_opt(a, "line_std", ac.line_std);
      detail::read_opt(a, "corridor_std", ac.corridor_std);
      detail::read_opt(a, "speed_rel_std", ac.speed_rel_std);
      detail::read_opt(a, "half_width", ac.half_width);
      detail::read_opt(a, "scaling", ac.scaling);
    }
    detail::read_opt(j, "samples", c.samples);
    detail::read_opt(j, "seed", c.seed);
    if (j.contains("out")) c.out = resolve(j.at("out").get<std::string>());
  } catch (const json::exception& e) {
    schema_error(where, e.what());
  }
  try {
    c.envelope.validate();
    c.adaptation.validate();
  } catch (const Error& e) {
    schema_error(where, e.what());
  }
  return c;
}

/// The resolved configuration, in a fixed key order.
inline json to_json(const RunConfig& c) {
  json tracks = json::array();
  for (const auto& t : c.tracks) tracks.push_back({{"id", t.id}, {"track", t.track.string()}, {"demos", t.demos.string()}});
  const auto& a = c.adaptation;
  return {{"tracks", std::move(tracks)},
          {"basis", {{"center_spacing", c.synthesis.center_spacing}, {"relative_ridge", c.synthesis.relative_ridge}}},
          {"envelope",
           {{"ay_max", c.envelope.ay_max},
            {"ax_acc", {{"speed", c.envelope.ax_acc.speed}, {"accel", c.envelope.ax_acc.accel}}},
            {"ax_brake", c.envelope.ax_brake},
            {"v_max", c.envelope.v_max},
            {"scale", c.envelope.scale}}},
          {"policy",
           {{"speed_gain", c.policy.speed_gain},
            {"lateral_gain", c.policy.lateral_gain},
            {"yaw_damping", c.policy.yaw_damping},
            {"lateral_limit", c.policy.lateral_limit},
            {"oversteer_lift", c.policy.oversteer_lift}}},
          {"adaptation",
           {{"budget", a.budget},
            {"decrement", a.decrement},
            {"speed_floor", a.speed_floor},
            {"line_std", a.line_std},
            {"corridor_std", a.corridor_std},
            {"speed_rel_std", a.speed_rel_std},
            {"half_width", a.half_width},
            {"scaling", a.scaling}}},
          {"samples", c.samples},
          {"seed", c.seed},
          {"out", c.out.string()}};
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (const unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

/// Digest of the resolved configuration without the output directory.
inline std::string config_digest(const RunConfig& c) {
  json j = to_json(c);
  j.erase("out");
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(j.dump());
  return os.str();
}

}  // namespace racedriver::io
