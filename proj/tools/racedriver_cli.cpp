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

// racedriver: fit / generalize / simulate / adapt / export.
//
// Exit codes: 0 ok, 2 usage, 3 data error, 4 runtime failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "racedriver/io.hpp"
#include "racedriver/racedriver.hpp"

namespace rd = racedriver;
namespace io = racedriver::io;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kData = 3;
constexpr int kRuntime = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "run configuration (JSON)")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "random seed, overrides the config");
  app->add_option("--out", c.out, "output directory, overrides the config");
}

io::RunConfig resolve(const Common& c) {
  io::RunConfig cfg;
  if (!c.config.empty()) {
    const fs::path p(c.config);
    cfg = io::config_from(io::read_json(p), p.parent_path(), p.string());
  }
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out = c.out;
  return cfg;
}

io::Meta meta(const io::RunConfig& cfg) {
  return {{"seed", std::to_string(cfg.seed)}, {"config_digest", io::config_digest(cfg)}};
}

io::json stamp(io::json j, const io::RunConfig& cfg) {
  j["seed"] = cfg.seed;
  j["config_digest"] = io::config_digest(cfg);
  return j;
}

void announce(const io::RunConfig& cfg) {
  std::cout << "config digest " << io::config_digest(cfg) << "  seed " << cfg.seed << "\n";
}

rd::PerformanceEnvelope full(rd::PerformanceEnvelope env) {
  env.scale = 1.0;
  return env;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  Common common;
  std::vector<std::string> tracks, demos;
};

int cmd_fit(const FitArgs& a) {
  io::RunConfig cfg = resolve(a.common);
  if (a.tracks.size() != a.demos.size()) throw UsageError("--track and --demos must be given in pairs");
  for (std::size_t i = 0; i < a.tracks.size(); ++i) {
    cfg.tracks.push_back({fs::path(a.tracks[i]).stem().string(), a.tracks[i], a.demos[i]});
  }
  if (cfg.tracks.empty()) throw UsageError("no demonstrations given");
  announce(cfg);

  std::vector<rd::TrackDemonstrations> demos;
  for (const auto& t : cfg.tracks) {
    if (t.demos.empty()) throw UsageError("track '" + t.id + "' has no demonstrations");
    rd::TrackDemonstrations d{io::load_track(t.track), {}};
    for (const auto& lap : io::load_laps(t.demos)) d.laps.push_back(io::lap_points(lap));
    if (d.laps.empty()) throw UsageError("no laps in " + t.demos.string());
    demos.push_back(std::move(d));
  }
  rd::DemonstrationLibrary lib;
  io::json report = io::json::array();
  for (std::size_t i = 0; i < demos.size(); ++i) {
    const auto& d = demos[i];
    const auto band = rd::build_mean_line(d.track, cfg.synthesis.band);
    lib.entries.push_back(rd::fit_library_entry(cfg.tracks[i].id, d.track.with_reference(band.line), d.laps, cfg.synthesis));
    const auto& e = lib.entries.back();
    report.push_back({{"track_id", e.track_id}, {"laps", e.laps}, {"fit_rms_dy", e.fit_rms_dy}, {"warnings", e.warnings}});
    std::printf("%-16s %4zu laps  dy fit rms %.4f m\n", e.track_id.c_str(), e.laps, e.fit_rms_dy);
  }
  io::write_json(cfg.out / "library.json", stamp(io::to_json(lib), cfg));
  io::write_json(cfg.out / "fit_report.json", stamp({{"tracks", report}}, cfg));
  return kOk;
}

// ---------------------------------------------------------------------------

struct GeneralizeArgs {
  Common common;
  std::string library, track;
  std::optional<std::size_t> samples;
};

int cmd_generalize(const GeneralizeArgs& a) {
  io::RunConfig cfg = resolve(a.common);
  if (a.samples) cfg.samples = *a.samples;
  announce(cfg);
  const auto lib = io::library_from(io::read_json(a.library), a.library);
  const rd::Track track = io::load_track(a.track);
  const auto gen = rd::generalize(lib, track, cfg.synthesis);
  const auto lines = rd::sample_lines(gen, track, cfg.samples, cfg.seed, cfg.synthesis.curvilinear);

  const auto& frame = gen.frame;
  {
    std::ofstream out = io::detail::open_out(cfg.out / "mean_line.csv");
    io::detail::write_meta(out, meta(cfg));
    out << "station,x,y,sigma_dy\n";
    const Eigen::MatrixXd var = gen.dy_promp.station_variance();
    const auto& p = frame.reference().points();
    for (std::size_t i = 0; i < p.size(); ++i) {
      out << frame.station(i) << ',' << p[i].x << ',' << p[i].y << ','
          << std::sqrt(std::max(0.0, var(static_cast<Eigen::Index>(i), 0))) << '\n';
    }
  }
  {
    std::ofstream out = io::detail::open_out(cfg.out / "samples.csv");
    io::detail::write_meta(out, meta(cfg));
    out << "sample,station,x,y,dy\n";
    for (std::size_t k = 0; k < lines.size(); ++k) {
      for (std::size_t i = 0; i < lines[k].points.size(); ++i) {
        out << k << ',' << frame.station(i) << ',' << lines[k].points[i].x << ',' << lines[k].points[i].y << ','
            << lines[k].dy[i] << '\n';
      }
    }
  }
  const double inside = rd::inside_fraction(lines);
  const double lap = rd::estimate_speed(gen.mean_line(), cfg.envelope).lap_time;
  io::write_json(cfg.out / "generalized.json", stamp(io::to_json(gen), cfg));
  io::write_json(cfg.out / "generalize_report.json",
                 stamp({{"track", track.name()},
                        {"samples", lines.size()},
                        {"inside_fraction", inside},
                        {"mean_line_lap_time", lap},
                        {"variance_repaired", gen.transfer.repaired}},
                       cfg));
  std::printf("%zu samples, %.1f%% of arc length inside the borders, mean line %.2f s\n", lines.size(),
              100.0 * inside, lap);
  return kOk;
}

// ---------------------------------------------------------------------------

struct TargetSource {
  std::string target, generalized;
};

void add_target_source(CLI::App* app, TargetSource& s) {
  auto* t = app->add_option("--target", s.target, "target CSV (x,y,v)")->check(CLI::ExistingFile);
  auto* g = app->add_option("--generalized", s.generalized, "generalized line JSON; target from its mean line")
                ->check(CLI::ExistingFile);
  t->excludes(g);
}

rd::TargetTrajectory load_target(const TargetSource& s, const io::RunConfig& cfg) {
  if (!s.target.empty()) return io::load_target(s.target);
  if (!s.generalized.empty()) {
    const auto gen = io::generalized_from(io::read_json(s.generalized), s.generalized);
    return rd::make_target(gen.mean_line(), cfg.envelope, rd::Provenance::Sampled);
  }
  throw UsageError("one of --target or --generalized is required");
}

struct SimulateArgs {
  Common common;
  TargetSource source;
  std::string track;
};

int cmd_simulate(const SimulateArgs& a) {
  const io::RunConfig cfg = resolve(a.common);
  announce(cfg);
  const rd::Track track = io::load_track(a.track);
  const auto target = load_target(a.source, cfg);
  const rd::PreviewController pc(cfg.policy);
  const auto log = rd::run_lap(pc, target, track, cfg.vehicle, cfg.adaptation.sim);
  io::save_laps(cfg.out / "lap.csv", {io::lap_records(log)}, meta(cfg));
  auto summary = io::summary_json(log);
  summary["target_lap_time"] = target.lap_time();
  io::write_json(cfg.out / "summary.json", stamp(summary, cfg));
  if (log.completed()) {
    std::printf("completed in %.3f s (target %.3f s), max |balance| %.3f\n", log.lap_time, target.lap_time(),
                log.max_abs_balance);
  } else {
    std::printf("%s at station %.1f m after %.1f m\n", rd::to_string(log.status), log.exit_station, log.distance);
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct AdaptArgs {
  Common common;
  TargetSource source;
  std::string track;
  std::optional<std::size_t> budget;
};

int cmd_adapt(const AdaptArgs& a) {
  io::RunConfig cfg = resolve(a.common);
  if (a.budget) cfg.adaptation.budget = *a.budget;
  announce(cfg);
  const rd::Track track = io::load_track(a.track);
  rd::AdaptationConfig ac = cfg.adaptation;
  ac.envelope = full(cfg.envelope);

  rd::AdaptationModel model;
  if (!a.source.generalized.empty()) {
    const auto gen = io::generalized_from(io::read_json(a.source.generalized), a.source.generalized);
    model = rd::make_adaptation_model(gen, cfg.envelope, ac);
  } else {
    model = rd::make_adaptation_model(load_target(a.source, cfg), track, ac);
  }
  const rd::PreviewController pc(cfg.policy);
  const auto st = rd::adaptation_loop(model, track, pc, cfg.vehicle, ac);

  io::write_json(cfg.out / "adaptation.json", stamp(io::to_json(st), cfg));
  io::write_json(cfg.out / "final_promp.json", stamp(io::to_json(st.model.promp), cfg));
  io::save_target(cfg.out / "final_target.csv", st.target, meta(cfg));
  {
    std::ofstream out = io::detail::open_out(cfg.out / "progress.csv");
    io::detail::write_meta(out, meta(cfg));
    out << "iteration,completed,distance,lap_time,best_lap_time\n";
    for (const auto& r : st.records) {
      out << r.iteration << ',' << (r.status == rd::LapStatus::Completed ? 1 : 0) << ',' << r.distance << ','
          << (std::isfinite(r.lap_time) ? r.lap_time : 0.0) << ','
          << (std::isfinite(r.best_lap_time) ? r.best_lap_time : 0.0) << '\n';
    }
  }
  for (const auto& r : st.records) {
    std::printf("%3zu  %-10s %8.1f m", r.iteration, rd::to_string(r.status), r.distance);
    if (std::isfinite(r.lap_time)) std::printf("  %7.3f s", r.lap_time);
    for (const auto& e : r.events) std::printf("  %s@%.0f", rd::to_string(e.kind), e.station);
    std::printf("\n");
  }
  std::printf("%s", rd::to_string(st.termination));
  if (std::isfinite(st.best_lap_time)) std::printf(", best lap %.3f s", st.best_lap_time);
  std::printf("\n");
  if (st.termination == rd::Termination::Unresolvable) {
    std::fprintf(stderr, "unresolvable: %s\n", st.message.c_str());
    return kRuntime;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

rd::Track synthetic_track(const std::string& name) {
  namespace sy = rd::synthetic;
  if (name == "circle") return sy::make_circle_track();
  if (name == "oval") return sy::make_oval_track();
  if (name == "six") return sy::make_layout_track(name, sy::six_corner_layout());
  if (name == "three") return sy::make_layout_track(name, sy::three_corner_layout());
  if (name == "long") return sy::make_layout_track(name, sy::long_straight_layout());
  if (name == "train_a") return sy::make_layout_track(name, sy::training_layout_a());
  if (name == "train_b") return sy::make_layout_track(name, sy::training_layout_b());
  if (name == "held_out") return sy::make_layout_track(name, sy::held_out_layout());
  throw UsageError("unknown layout '" + name + "'");
}

const std::vector<std::string> kLayouts = {"circle", "oval", "six", "three", "long", "train_a", "train_b", "held_out"};

struct ExportArgs {
  Common common;
  std::string layout, track, file;
  std::vector<std::string> lines;
  std::size_t laps = 20;
  std::optional<double> scale;
};

int export_track(const ExportArgs& a) {
  const io::RunConfig cfg = resolve(a.common);
  announce(cfg);
  const fs::path out = cfg.out / (a.layout + ".csv");
  io::save_track(out, synthetic_track(a.layout), meta(cfg));
  std::cout << out.string() << "\n";
  return kOk;
}

int export_demos(const ExportArgs& a) {
  const io::RunConfig cfg = resolve(a.common);
  announce(cfg);
  const rd::Track track = io::load_track(a.track);
  std::vector<io::Lap> laps;
  for (const auto& l : rd::synthetic::noisy_demonstrations(track, a.laps, cfg.seed, {}, cfg.synthesis.band)) {
    laps.push_back(io::lap_from_line(l));
  }
  const fs::path out = cfg.out / (track.name() + "_laps.csv");
  io::save_laps(out, laps, meta(cfg));
  std::cout << out.string() << "\n";
  return kOk;
}

int export_target(const ExportArgs& a) {
  io::RunConfig cfg = resolve(a.common);
  if (a.scale) cfg.envelope.scale = *a.scale;
  announce(cfg);
  const rd::Track track = io::load_track(a.track);
  const auto band = rd::build_mean_line(track, cfg.synthesis.band);
  const fs::path out = cfg.out / (track.name() + "_target.csv");
  io::save_target(out, rd::make_target(band.line, cfg.envelope), meta(cfg));
  std::cout << out.string() << "\n";
  return kOk;
}

int export_promp(const ExportArgs& a) {
  // final ProMP mean as a target file
  const io::RunConfig cfg = resolve(a.common);
  announce(cfg);
  const rd::Track track = io::load_track(a.track);
  const auto promp = io::promp_from(io::read_json(a.file), a.file);
  rd::AdaptationModel m{track, promp, {}};
  if (promp.variables.size() != 3 || promp.basis.n_stations != track.station_count()) {
    throw rd::Error(rd::ErrorCode::Schema, a.file + ": not an (x, y, dt) ProMP on this track's stations");
  }
  const fs::path out = cfg.out / "promp_target.csv";
  io::save_target(out, rd::target_from_model(m, cfg.adaptation), meta(cfg));
  std::cout << out.string() << "\n";
  return kOk;
}

int export_svg(const ExportArgs& a) {
  const io::RunConfig cfg = resolve(a.common);
  announce(cfg);
  const rd::Track track = io::load_track(a.track);
  std::vector<rd::Polyline> shapes = {track.left_border(), track.right_border()};
  for (const auto& f : a.lines) {
    const auto t = io::read_csv(f);
    const std::size_t cx = t.column("x"), cy = t.column("y");
    const bool grouped = std::find(t.header.begin(), t.header.end(), "sample") != t.header.end();
    const std::size_t cg = grouped ? t.column("sample") : 0;
    double group = -1.0;
    for (const auto& r : t.rows) {
      if (shapes.size() == 2 || (grouped && r[cg] != group)) shapes.emplace_back();
      if (grouped) group = r[cg];
      shapes.back().push_back({r[cx], r[cy]});
    }
  }
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (const auto& s : shapes) {
    for (const auto& p : s) {
      x0 = std::min(x0, p.x), y0 = std::min(y0, p.y), x1 = std::max(x1, p.x), y1 = std::max(y1, p.y);
    }
  }
  const double pad = 10.0;
  const fs::path out = cfg.out / (track.name() + ".svg");
  std::ofstream svg = io::detail::open_out(out);
  svg << std::setprecision(6);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << x0 - pad << ' ' << -y1 - pad << ' '
      << x1 - x0 + 2 * pad << ' ' << y1 - y0 + 2 * pad << "\">\n";
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    svg << "<polygon fill=\"none\" stroke=\"" << (k < 2 ? "black" : "steelblue") << "\" stroke-width=\""
        << (k < 2 ? 1.0 : 0.4) << "\" points=\"";
    for (const auto& p : shapes[k]) svg << p.x << ',' << -p.y << ' ';
    svg << "\"/>\n";
  }
  svg << "</svg>\n";
  std::cout << out.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"racing-line synthesis, simulation and adaptation"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "fit a demonstration library");
  add_common(c_fit, fit.common);
  c_fit->add_option("--track", fit.tracks, "track CSV, paired with --demos")->check(CLI::ExistingFile);
  c_fit->add_option("--demos", fit.demos, "lap CSV of demonstrations")->check(CLI::ExistingFile);

  GeneralizeArgs gen;
  auto* c_gen = app.add_subcommand("generalize", "racing line and variance on a new track");
  add_common(c_gen, gen.common);
  c_gen->add_option("--library", gen.library, "library JSON")->required()->check(CLI::ExistingFile);
  c_gen->add_option("--track", gen.track, "track CSV")->required()->check(CLI::ExistingFile);
  c_gen->add_option("--samples", gen.samples, "number of sampled lines");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "drive one lap");
  add_common(c_sim, sim.common);
  add_target_source(c_sim, sim.source);
  c_sim->add_option("--track", sim.track, "track CSV")->required()->check(CLI::ExistingFile);

  AdaptArgs adapt;
  auto* c_adapt = app.add_subcommand("adapt", "adapt the target lap by lap");
  add_common(c_adapt, adapt.common);
  add_target_source(c_adapt, adapt.source);
  c_adapt->add_option("--track", adapt.track, "track CSV")->required()->check(CLI::ExistingFile);
  c_adapt->add_option("--budget", adapt.budget, "adaptation steps after the first lap");

  ExportArgs ex;
  auto* c_ex = app.add_subcommand("export", "write synthetic inputs, targets and drawings");
  c_ex->require_subcommand(1);
  auto* e_track = c_ex->add_subcommand("track", "synthetic track CSV");
  add_common(e_track, ex.common);
  e_track->add_option("--layout", ex.layout, "layout name")->required()->check(CLI::IsMember(kLayouts));
  auto* e_demos = c_ex->add_subcommand("demos", "synthetic noisy demonstration laps");
  add_common(e_demos, ex.common);
  e_demos->add_option("--track", ex.track, "track CSV")->required()->check(CLI::ExistingFile);
  e_demos->add_option("--laps", ex.laps, "number of laps")->check(CLI::PositiveNumber);
  auto* e_target = c_ex->add_subcommand("target", "target CSV on the track's elastic-band line");
  add_common(e_target, ex.common);
  e_target->add_option("--track", ex.track, "track CSV")->required()->check(CLI::ExistingFile);
  e_target->add_option("--scale", ex.scale, "envelope scale")->check(CLI::Range(0.05, 1.0));
  auto* e_promp = c_ex->add_subcommand("promp", "target CSV from an adapted ProMP");
  add_common(e_promp, ex.common);
  e_promp->add_option("--promp", ex.file, "ProMP JSON")->required()->check(CLI::ExistingFile);
  e_promp->add_option("--track", ex.track, "track CSV the ProMP was adapted on")->required()->check(CLI::ExistingFile);
  auto* e_svg = c_ex->add_subcommand("svg", "draw a track and lines");
  add_common(e_svg, ex.common);
  e_svg->add_option("--track", ex.track, "track CSV")->required()->check(CLI::ExistingFile);
  e_svg->add_option("--line", ex.lines, "CSV with x,y columns (optionally grouped by sample)")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*c_fit) return cmd_fit(fit);
    if (*c_gen) return cmd_generalize(gen);
    if (*c_sim) return cmd_simulate(sim);
    if (*c_adapt) return cmd_adapt(adapt);
    if (*e_track) return export_track(ex);
    if (*e_demos) return export_demos(ex);
    if (*e_target) return export_target(ex);
    if (*e_promp) return export_promp(ex);
    if (*e_svg) return export_svg(ex);
  } catch (const UsageError& e) {
    std::cerr << "usage: " << e.what() << "\n";
    return kUsage;
  } catch (const rd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case rd::ErrorCode::Schema:
      case rd::ErrorCode::EmptyInput:
      case rd::ErrorCode::EmptyLibrary:
      case rd::ErrorCode::InsufficientDemos:
        return kData;
      default:
        return kRuntime;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
