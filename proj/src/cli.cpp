#include "rt/cli.hpp"

#include <cmath>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "rt/path_solver.hpp"
#include "rt/radio_map.hpp"
#include "rt/scene_io.hpp"

namespace rt {

namespace {

struct Options {
  std::string scene;
  long long samples = -1;
  int max_depth = 3;
  std::uint64_t seed = 42;
  double q_diffraction = 0.2;
  std::string disable;
  std::string synthetic = "on";
  int workers = 1;
  std::string outdir = ".";
  std::string format = "csv";
  long long max_paths = -1;
  // radio map only
  long long diffraction_samples = 100000;
  int rr_depth = -1;
  double rr_max_prob = 0.95;
  double gain_threshold = 0.0;
  double wedge_radius = -1.0;
  double pgm_floor = -150.0;
  double pgm_ceil = -50.0;
};

[[noreturn]] void invalid(const std::string& flag, const std::string& why) {
  throw ValidationError(flag + ": " + why);
}

InteractionMask enabled_mask(const Options& o) {
  InteractionMask m = InteractionMask::all();
  const InteractionMask off = parse_interaction_list(o.disable);
  for (int i = 0; i < 4; ++i)
    if (off.has(static_cast<Interaction>(i))) m = m.without(static_cast<Interaction>(i));
  return m;
}

void prepare_outdir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) { return (std::filesystem::path(dir) / name).string(); }

void validate_common(const Options& o) {
  if (o.samples == 0 || o.samples < -1) invalid("--samples", "must be at least 1");
  if (o.max_depth < 0) invalid("--max-depth", "must be non-negative");
  if (o.workers < 1) invalid("--workers", "must be at least 1");
  try {
    enabled_mask(o);
  } catch (const ValidationError& e) {
    invalid("--disable", e.what());
  }
}

int run_paths(const Options& o) {
  validate_common(o);
  if (!(o.q_diffraction >= 0.0 && o.q_diffraction <= 1.0)) invalid("--q-diffraction", "must lie in [0, 1]");
  if (o.synthetic != "on" && o.synthetic != "off") invalid("--synthetic", "expected on or off");
  if (o.format != "csv" && o.format != "json") invalid("--format", "expected csv or json");
  if (o.max_paths == 0 || o.max_paths < -1) invalid("--max-num-paths-per-src", "must be at least 1");

  PathConfig cfg;
  if (o.samples > 0) cfg.samples = static_cast<std::size_t>(o.samples);
  cfg.max_depth = o.max_depth;
  cfg.seed = o.seed;
  cfg.q_diffraction = o.q_diffraction;
  cfg.enabled = enabled_mask(o);
  cfg.synthetic_array = o.synthetic == "on";
  cfg.workers = o.workers;
  if (o.max_paths > 0) cfg.buffer_size = static_cast<std::size_t>(o.max_paths);

  const Scene scene = load_scene(o.scene);
  for (const auto& w : scene.warnings) std::cerr << "warning: " << w << "\n";
  prepare_outdir(o.outdir);
  std::cerr << "tracing " << cfg.samples << " samples per source, max depth " << cfg.max_depth << "\n";
  const PathSet set = compute_paths(scene, cfg);
  std::cerr << set.paths.size() << " valid path(s)\n";
  write_paths(set, join(o.outdir, "paths." + o.format), o.format == "csv" ? PathFormat::Csv : PathFormat::Json);
  write_path_diagnostics(set.diagnostics, join(o.outdir, "diagnostics.json"));
  return 0;
}

int run_radiomap(const Options& o) {
  validate_common(o);
  if (o.diffraction_samples < 0) invalid("--diffraction-samples", "must be non-negative");
  if (!(o.rr_max_prob > 0.0 && o.rr_max_prob <= 1.0)) invalid("--rr-max-prob", "must lie in (0, 1]");
  if (o.rr_depth > o.max_depth) invalid("--rr-depth", "must not exceed --max-depth");
  if (o.gain_threshold < 0.0) invalid("--gain-threshold", "must be non-negative");
  if (!(o.pgm_ceil > o.pgm_floor)) invalid("--pgm-ceil", "must exceed --pgm-floor");

  RadioMapConfig cfg;
  if (o.samples > 0) cfg.samples = static_cast<std::size_t>(o.samples);
  cfg.diffraction_samples = static_cast<std::size_t>(o.diffraction_samples);
  cfg.max_depth = o.max_depth;
  cfg.rr_depth = o.rr_depth;
  cfg.rr_max_prob = o.rr_max_prob;
  cfg.gain_threshold = o.gain_threshold;
  cfg.seed = o.seed;
  cfg.wedge_radius = o.wedge_radius;
  cfg.enabled = enabled_mask(o);
  cfg.workers = o.workers;

  const Scene scene = load_scene(o.scene);
  for (const auto& w : scene.warnings) std::cerr << "warning: " << w << "\n";
  if (!scene.grid) throw ValidationError("scene defines no measurement grid");
  prepare_outdir(o.outdir);
  std::cerr << "radio map with " << cfg.samples << " samples, max depth " << cfg.max_depth << "\n";
  const auto maps = compute_radio_map(scene, cfg);
  const PgmRange range{o.pgm_floor, o.pgm_ceil};
  for (const auto& m : maps) {
    const std::string stem = maps.size() == 1 ? "map" : "map_" + std::to_string(m.tx);
    write_radio_map(m, join(o.outdir, stem + ".csv"), MapFormat::Csv);
    write_radio_map(m, join(o.outdir, stem + ".pgm"), MapFormat::Pgm, range);
  }
  write_map_diagnostics(maps, join(o.outdir, "diagnostics.json"));
  return 0;
}

int run_scene_info(const Options& o) {
  const Scene scene = load_scene(o.scene);
  std::cout << "frequency: " << scene.frequency << " Hz\n";
  std::cout << "objects: " << scene.objects.size() << "\n";
  std::cout << "triangles: " << scene.triangle_count() << "\n";
  std::cout << "wedges: " << scene.wedges().size() << "\n";
  std::cout << "materials:\n";
  for (const auto& m : scene.materials)
    std::cout << "  " << m.name << ": eps_r=" << m.eps_r << " sigma=" << m.sigma << " thickness=" << m.thickness
              << " S=" << m.scattering << "\n";
  std::set<std::string> checked;
  auto list = [&](const char* title, const std::vector<RadioDevice>& devs) {
    std::cout << title << ":\n";
    for (const auto& d : devs) {
      std::cout << "  " << d.name << " at (" << d.position.x() << ", " << d.position.y() << ", " << d.position.z()
                << ") pattern=" << d.pattern << " polarization=" << d.polarization << " elements=" << d.elements()
                << "\n";
      const std::string key = d.pattern + "/" + d.polarization;
      if (!checked.insert(key).second) continue;
      for (const auto& p : d.patterns()) {
        const double integral = pattern_normalization(p);
        const double target = 4.0 * kPi * p.efficiency;
        const double rel = std::abs(integral - target) / target;
        std::cout << "    pattern normalization: " << integral / (4.0 * kPi) << " x 4pi\n";
        if (rel > 0.05) std::cout << "    warning: pattern '" << d.pattern << "' deviates " << rel * 100.0 << "% from 4pi\n";
      }
    }
  };
  list("transmitters", scene.transmitters);
  list("receivers", scene.receivers);
  if (scene.grid)
    std::cout << "grid: " << scene.grid->nx << " x " << scene.grid->ny << " cells of " << scene.grid->cell_w << " x "
              << scene.grid->cell_h << " m\n";
  for (const auto& w : scene.warnings) std::cout << "warning: " << w << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Ray tracing for radio propagation: paths and radio maps"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("scene", o.scene, "Scene description (JSON)")->required();
    sub->add_option("--samples", o.samples, "Rays launched per source");
    sub->add_option("--max-depth", o.max_depth, "Maximum number of interactions");
    sub->add_option("--seed", o.seed, "Random seed");
    sub->add_option("--disable", o.disable, "Comma list of refl, scat, trans, diffr");
    sub->add_option("--workers", o.workers, "Worker threads");
    sub->add_option("--output,--outdir", o.outdir, "Output directory");
  };

  CLI::App* paths = app.add_subcommand("paths", "Compute propagation paths");
  add_common(paths);
  paths->add_option("--q-diffraction", o.q_diffraction, "Probability of sampling a diffraction");
  paths->add_option("--synthetic", o.synthetic, "Synthetic arrays: on or off");
  paths->add_option("--format", o.format, "csv or json");
  paths->add_option("--max-num-paths-per-src", o.max_paths, "Candidate buffer size per source");

  CLI::App* radiomap = app.add_subcommand("radiomap", "Compute radio maps");
  add_common(radiomap);
  radiomap->add_option("--diffraction-samples", o.diffraction_samples, "Samples per wedge");
  radiomap->add_option("--rr-depth", o.rr_depth, "Depth from which Russian roulette applies (-1 disables)");
  radiomap->add_option("--rr-max-prob", o.rr_max_prob, "Maximum survival probability");
  radiomap->add_option("--gain-threshold", o.gain_threshold, "Gain below which rays are dropped");
  radiomap->add_option("--wedge-radius", o.wedge_radius, "Wedge search radius (m); negative = scene diameter");
  radiomap->add_option("--pgm-floor", o.pgm_floor, "dB mapped to black");
  radiomap->add_option("--pgm-ceil", o.pgm_ceil, "dB mapped to white");

  CLI::App* info = app.add_subcommand("scene-info", "Summarize a scene");
  info->add_option("scene", o.scene, "Scene description (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*paths) return run_paths(o);
    if (*radiomap) return run_radiomap(o);
    return run_scene_info(o);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace rt
