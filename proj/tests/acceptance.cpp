// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rt/geometry.hpp"
#include "rt/materials.hpp"
#include "rt/path_solver.hpp"
#include "rt/radio_map.hpp"
#include "rt/scene.hpp"

using namespace rt;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

RadioDevice device(const std::string& name, const Vec3& pos, const std::string& pol = "V") {
  RadioDevice d;
  d.name = name;
  d.position = pos;
  d.polarization = pol;
  return d;
}

// ---------------------------------------------------------------------------

Outcome friis() {
  double worst = 0.0;
  for (double r : {1.0, 10.0, 100.0}) {
    Scene s;
    s.frequency = 2.4e9;
    s.transmitters.push_back(device("tx", Vec3(0.3, -0.2, 1.0)));
    s.receivers.push_back(device("rx", Vec3(0.3, -0.2, 1.0) + r * Vec3(2.0, 1.0, -0.5).normalized()));
    s.finalize();
    PathConfig cfg;
    cfg.samples = 1000;
    const PathSet set = compute_paths(s, cfg);
    const double expected = std::pow(s.wavelength() / (4.0 * kPi * r), 2);
    worst = std::max(worst, std::abs(channel_gain(set, 0, 0) - expected) / expected);
    if (set.paths.size() != 1) return {false, fmt("r=%g gave %zu paths", r, set.paths.size())};
  }
  return {worst < 1e-9, fmt("max relative error %.3e (tol 1e-9)", worst)};
}

const Vec3 kBoxLo(0.0, 0.0, 0.0), kBoxHi(5.0, 4.0, 3.0);
const Vec3 kBoxTx(1.3, 0.9, 1.1), kBoxRx(3.7, 2.6, 1.9);

std::vector<int> face_sequence(const ValidPath& p) {
  std::vector<int> f;
  for (const auto& st : p.steps) f.push_back(oracle::box_face(kBoxLo, kBoxHi, st.vertex));
  return f;
}

Outcome mirror_oracle() {
  const RadioMaterial mat = material_preset("concrete");
  Scene s = oracle::box_scene(kBoxLo, kBoxHi, mat);
  s.transmitters.push_back(device("tx", kBoxTx));
  s.receivers.push_back(device("rx", kBoxRx));
  s.finalize();
  PathConfig cfg;
  cfg.samples = 1000000;
  cfg.max_depth = 3;
  cfg.enabled = InteractionMask::none().with(Interaction::Reflection);
  const PathSet set = compute_paths(s, cfg);
  const auto ref = oracle::box_image_paths(kBoxLo, kBoxHi, kBoxTx, kBoxRx, 3, mat, s.frequency);

  std::map<std::vector<int>, const PathRecord*> found;
  for (const auto& p : set.paths) found[face_sequence(p.geometry)] = &p;
  int missing = 0;
  double tau_err = 0.0, a_err = 0.0;
  for (const auto& r : ref) {
    auto it = found.find(r.faces);
    if (it == found.end()) {
      ++missing;
      continue;
    }
    tau_err = std::max(tau_err, std::abs(it->second->tau - r.length / kSpeedOfLight));
    const double am = std::abs(it->second->a(0, 0)), rm = std::abs(r.a);
    a_err = std::max(a_err, std::abs(am - rm) / rm);
  }
  const bool ok = set.paths.size() == ref.size() && found.size() == ref.size() && missing == 0 && tau_err < 1e-9 &&
                  a_err < 1e-6;
  return {ok, fmt("paths %zu vs oracle %zu, missing %d, max |dtau| %.2e s, max rel |a| err %.2e", set.paths.size(),
                  ref.size(), missing, tau_err, a_err)};
}

Outcome dedup() {
  Scene s = oracle::box_scene(kBoxLo, kBoxHi, material_preset("concrete"));
  s.transmitters.push_back(device("tx", kBoxTx));
  s.receivers.push_back(device("rx", kBoxRx));
  s.finalize();
  std::vector<double> counts;
  int duplicates = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    PathConfig cfg;
    cfg.samples = 200000;
    cfg.max_depth = 3;
    cfg.seed = seed;
    cfg.enabled = InteractionMask::none().with(Interaction::Reflection).with(Interaction::Transmission);
    const PathSet set = compute_paths(s, cfg);
    counts.push_back(static_cast<double>(set.diagnostics.candidates));
    std::set<std::pair<std::string, std::vector<int>>> seen;
    for (const auto& p : set.paths)
      if (!seen.insert({p.geometry.interaction_string(), face_sequence(p.geometry)}).second) ++duplicates;
  }
  const auto [mn, mx] = std::minmax_element(counts.begin(), counts.end());
  double mean = 0.0;
  for (double c : counts) mean += c / counts.size();
  const double spread = (*mx - *mn) / mean;
  return {duplicates == 0 && spread < 0.05,
          fmt("duplicates %d, candidates %.0f..%.0f (spread %.2f%%)", duplicates, *mn, *mx, 100.0 * spread)};
}

double hemisphere_integral(const ScatteringPattern& p, double theta_i) {
  const Vec3 n = Vec3::UnitZ();
  const Vec3 k_i(std::sin(theta_i), 0.0, -std::cos(theta_i));
  // Gauss-Legendre in cos(theta_s), trapezoid in phi.
  constexpr int kMu = 96, kPhi = 384;
  std::vector<double> x(kMu), w(kMu);
  for (int i = 0; i < kMu; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (kMu + 0.5)), dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= kMu; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = kMu * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = 0.5 * (z + 1.0);
    w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
  double sum = 0.0;
  for (int i = 0; i < kMu; ++i) {
    const double mu = x[i], st = std::sqrt(1.0 - mu * mu);
    for (int j = 0; j < kPhi; ++j) {
      const double ph = 2.0 * kPi * j / kPhi;
      const Vec3 k_s(st * std::cos(ph), st * std::sin(ph), mu);
      sum += w[i] * (2.0 * kPi / kPhi) * scattering_pattern_eval(p, k_i, k_s, n);
    }
  }
  return sum;
}

Outcome energy() {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double theta = 0.5 * kPi * u(gen) * 0.9999;
    const double eta = 1.0 + 20.0 * u(gen);
    const double d = 0.5 * u(gen);
    for (Polarization pol : {Polarization::Perp, Polarization::Par}) {
      const auto [r, t] = slab_coefficients(std::cos(theta), cd(eta, 0.0), d, 0.1, pol);
      worst = std::max(worst, std::abs(std::norm(r) + std::norm(t) - 1.0));
    }
  }
  double pattern_worst = 0.0;
  std::vector<ScatteringPattern> patterns{{ScatteringModel::Lambertian, 1, 1, 0.5}};
  for (int ar : {1, 4, 10})
    for (int ai : {1, 4, 10})
      for (double lam : {0.25, 0.75}) {
        patterns.push_back({ScatteringModel::Directive, ar, ai, lam});
        patterns.push_back({ScatteringModel::Backscattering, ar, ai, lam});
      }
  for (const auto& p : patterns)
    for (double th : {0.0, 0.3, 0.8, 1.2, 1.5})
      pattern_worst = std::max(pattern_worst, std::abs(hemisphere_integral(p, th) - 1.0));
  return {worst < 1e-9 && pattern_worst < 1e-2,
          fmt("slab max | |r|^2+|t|^2-1 | %.2e (tol 1e-9), pattern max |int-1| %.2e (tol 1e-2)", worst,
              pattern_worst)};
}

Outcome utd_continuity() {
  // Screen in the x-z plane with its diffracting edge on the z axis.
  Mesh m;
  m.vertices = {{0, 0, -20}, {20, 0, -20}, {20, 0, 20}, {0, 0, 20}};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  const std::vector<Wedge> wedges = extract_wedges({m});
  const Wedge* w = nullptr;
  for (const auto& c : wedges)
    if (std::abs(c.origin.x()) < 1e-12 && std::abs(c.end().x()) < 1e-12) w = &c;
  if (!w) return {false, "no edge wedge found"};
  const std::vector<oracle::Tri> screen{{m.vertices[0], m.vertices[1], m.vertices[2]},
                                        {m.vertices[0], m.vertices[2], m.vertices[3]}};
  const RadioMaterial mat = material_preset("concrete");
  const double f = 3.5e9, lambda = kSpeedOfLight / f, k = 2.0 * kPi / lambda;
  const cd eta = complex_permittivity(mat.eps_r, mat.sigma, f);

  auto total_field = [&](const Vec3& src, const Vec3& rx, const AntennaPattern& pat) {
    Vec3c e = Vec3c::Zero();
    const Vec3 d = rx - src;
    if (!oracle::segment_blocked(screen, src, rx, 0.0))
      e += pattern_to_gcs(pat, d.normalized()).vector() * std::polar(1.0 / d.norm(), -k * d.norm());
    const double x = solve_first_order_diffraction_point(src, rx, w->origin, w->edge);
    const Vec3 q = w->point(x);
    const double sp = (q - src).norm(), s = (rx - q).norm();
    const Vec3 k_in = (q - src) / sp, k_out = (rx - q) / s;
    JonesField inc = pattern_to_gcs(pat, k_in);
    inc.c *= std::polar(1.0 / sp, -k * sp);
    const JonesField dif = utd_transfer(*w, k_in, k_out, sp, s, lambda, eta, eta).apply(inc);
    e += dif.vector() * (std::sqrt(sp / (s * (sp + s))) * std::polar(1.0, -k * s));
    return e;
  };

  double worst = 0.0;
  int configs = 0, straddling = 0;
  const Vec3 t0(1, 0, 0), n0(0, 1, 0);
  for (double phi_src : {0.4, 1.0, 1.9})
    for (double rho_src : {1.0, 4.0})
      for (double rho : {2.0, 7.0})
        for (double dz : {0.0, 1.3})
          for (double slant : {0.0, 0.5 * kPi}) {
            const AntennaPattern pat = isotropic_pattern(slant);
            const Vec3 src = rho_src * (std::cos(phi_src) * t0 + std::sin(phi_src) * n0);
            const double phi_b = kPi + phi_src;  // incident shadow boundary
            auto at = [&](double phi) -> Vec3 {
              return Vec3(rho * std::cos(phi), rho * std::sin(phi), 0.0) + Vec3(0, 0, dz);
            };
            const double delta = 1e-7;
            const Vec3 p1 = at(phi_b - delta), p2 = at(phi_b + delta);
            if (oracle::segment_blocked(screen, src, p1, 0.0) != oracle::segment_blocked(screen, src, p2, 0.0))
              ++straddling;
            ++configs;
            const Vec3c lit = total_field(src, p1, pat);
            const Vec3c dark = total_field(src, p2, pat);
            worst = std::max(worst, (lit - dark).norm() / std::max(lit.norm(), dark.norm()));
          }
  return {worst < 0.01 && straddling == configs,
          fmt("max relative jump across the shadow boundary %.3e (tol 1e-2), %d/%d pairs straddle it", worst,
              straddling, configs)};
}

Outcome closed_form() {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  double worst = 0.0;
  int done = 0;
  while (done < 1000) {
    const Vec3 s(u(gen), u(gen), u(gen)), t(u(gen), u(gen), u(gen)), o(u(gen), u(gen), u(gen));
    const Vec3 e = Vec3(u(gen), u(gen), u(gen)).normalized();
    const double zs = (s - o).dot(e), zt = (t - o).dot(e);
    if ((s - o - zs * e).norm() < 1e-3 || (t - o - zt * e).norm() < 1e-3) continue;
    const double x = solve_first_order_diffraction_point(s, t, o, e);
    const double xg = oracle::edge_path_minimizer(s, t, o, e);
    worst = std::max(worst, std::abs(x - xg));
    ++done;
  }
  return {worst < 1e-8, fmt("max |x - x_golden| %.2e over %d configurations (tol 1e-8)", worst, done)};
}

Outcome map_vs_paths() {
  const Vec3 lo(-1, -1, 0), hi(1, 1, 2);
  const RadioMaterial mat = material_preset("concrete");
  Scene s = oracle::box_scene(lo, hi, mat);
  s.transmitters.push_back(device("tx", Vec3(0.37, -0.21, 1.45)));
  const MeasurementGrid grid =
      MeasurementGrid::make(Vec3(0, 0, 1.0), Vec3::UnitZ(), Vec3::UnitX(), 0.1, 0.1, 20, 20);
  s.grid = grid;
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) s.receivers.push_back(device("c", grid.cell_center(i, j), "VH"));
  s.finalize();
  const InteractionMask refl = InteractionMask::none().with(Interaction::Reflection);

  RadioMapConfig mc;
  mc.samples = 10000000;
  mc.max_depth = 3;
  mc.enabled = refl;
  const auto maps = compute_radio_map(s, mc);

  PathConfig pc;
  pc.samples = 100000;
  pc.max_depth = 3;
  pc.enabled = refl;
  const PathSet set = compute_paths(s, pc);
  std::vector<double> sum(grid.cells(), 0.0);
  for (const auto& p : set.paths) sum[p.rx] += p.a.squaredNorm();

  int within = 0;
  double worst = 0.0;
  for (int c = 0; c < grid.cells(); ++c) {
    const double db = 10.0 * std::log10(maps[0].values[c] / sum[c]);
    worst = std::max(worst, std::abs(db));
    if (std::abs(db) <= 1.0) ++within;
  }
  const double frac = static_cast<double>(within) / grid.cells();
  return {frac >= 0.95, fmt("%.1f%% of cells within 1 dB (need 95%%), worst %.2f dB", 100.0 * frac, worst)};
}

Outcome importance_sampling() {
  // Two metal rooms separated by a glass wall.
  const Vec3 lo(0, 0, 0), hi(8, 4, 3);
  Scene s = oracle::box_scene(lo, hi, material_preset("metal"));
  s.materials.push_back(material_preset("glass"));
  Mesh wall;
  wall.vertices = {{4, 0, 0}, {4, 4, 0}, {4, 4, 3}, {4, 0, 3}};
  wall.triangles = {{0, 1, 2}, {0, 2, 3}};
  s.objects.push_back({"screen", wall, 1, Vec3::Zero()});
  s.transmitters.push_back(device("tx", Vec3(1.5, 1.2, 1.5)));
  s.receivers.push_back(device("rx", Vec3(6.3, 2.7, 1.2)));
  s.finalize();

  auto gain = [&](std::size_t samples, std::uint64_t seed, bool uniform) {
    PathConfig cfg;
    cfg.samples = samples;
    cfg.max_depth = 5;
    cfg.seed = seed;
    cfg.uniform_sampling = uniform;
    cfg.enabled = InteractionMask::all().without(Interaction::Diffraction);
    return channel_gain(compute_paths(s, cfg), 0, 0);
  };
  const double converged = gain(2000000, 99, false);
  const std::vector<std::size_t> ladder{100, 200, 500, 1000, 2000, 5000, 10000, 20000, 50000, 100000, 200000, 500000};
  auto reach = [&](std::uint64_t seed, bool uniform) {
    for (std::size_t n : ladder)
      if (gain(n, seed, uniform) >= 0.9 * converged) return static_cast<double>(n);
    return 2.0 * ladder.back();
  };
  std::vector<double> ratios;
  std::string per;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const double ni = reach(seed, false), nu = reach(seed, true);
    ratios.push_back(nu / ni);
    per += fmt(" %g/%g", nu, ni);
  }
  std::sort(ratios.begin(), ratios.end());
  const double median = ratios[2];
  return {median >= 5.0, fmt("median sample ratio uniform/importance %.1f (need >= 5); per seed:%s", median,
                             per.c_str())};
}

Outcome doppler() {
  Scene box = oracle::box_scene(kBoxLo, kBoxHi, material_preset("concrete"));
  box.transmitters.push_back(device("tx", kBoxTx));
  box.receivers.push_back(device("rx", kBoxRx));
  box.finalize();
  PathConfig cfg;
  cfg.samples = 20000;
  const PathSet st = compute_paths(box, cfg);
  int nonzero = 0;
  for (const auto& p : st.paths)
    if (p.doppler != 0.0) ++nonzero;

  Scene free;
  free.frequency = 28e9;
  const Vec3 a(0, 0, 1), b(30, 40, 1);
  free.transmitters.push_back(device("tx", a));
  free.transmitters.back().velocity = 12.5 * (b - a).normalized();
  free.receivers.push_back(device("rx", b));
  free.finalize();
  const PathSet mv = compute_paths(free, cfg);
  const double expected = 12.5 / free.wavelength();
  const double err = mv.paths.size() == 1 ? std::abs(mv.paths[0].doppler - expected) / expected : 1.0;
  return {nonzero == 0 && !st.paths.empty() && err < 1e-12,
          fmt("static scene: %d of %zu paths with nonzero shift; moving source rel err %.2e (tol 1e-12)", nonzero,
              st.paths.size(), err)};
}

Outcome determinism() {
  Scene s = oracle::box_scene(Vec3(-3, -3, 0), Vec3(3, 3, 3), material_preset("concrete"));
  RadioMaterial rough = material_preset("concrete");
  rough.name = "rough";
  rough.scattering = 0.5;
  s.materials.push_back(rough);
  Mesh pillar = oracle::box_mesh(Vec3(0.5, -0.5, 0), Vec3(1.0, 0.5, 2.0));
  s.objects.push_back({"pillar", pillar, 1, Vec3(0.2, 0, 0)});
  s.transmitters.push_back(device("tx", Vec3(-1.5, 0.3, 1.5), "VH"));
  s.receivers.push_back(device("rx", Vec3(2.2, -0.4, 1.2), "VH"));
  s.grid = MeasurementGrid::make(Vec3(0, 0, 1.0), Vec3::UnitZ(), Vec3::UnitX(), 0.5, 0.5, 12, 12);
  s.finalize();

  std::vector<std::vector<double>> path_dumps, map_dumps;
  for (int workers : {1, 4, 8}) {
    PathConfig pc;
    pc.samples = 50000;
    pc.max_depth = 3;
    pc.workers = workers;
    const PathSet set = compute_paths(s, pc);
    std::vector<double> dump;
    for (const auto& p : set.paths) {
      dump.push_back(p.tau);
      dump.push_back(p.doppler);
      for (int i = 0; i < p.a.size(); ++i) {
        dump.push_back(p.a(i).real());
        dump.push_back(p.a(i).imag());
      }
      for (const auto& st : p.geometry.steps)
        for (int c = 0; c < 3; ++c) dump.push_back(st.vertex[c]);
    }
    path_dumps.push_back(dump);

    RadioMapConfig mc;
    mc.samples = 100000;
    mc.diffraction_samples = 2000;
    mc.rr_depth = 1;
    mc.workers = workers;
    map_dumps.push_back(compute_radio_map(s, mc)[0].values);
  }
  auto same = [](const std::vector<double>& x, const std::vector<double>& y) {
    return x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0;
  };
  const bool paths_ok = same(path_dumps[0], path_dumps[1]) && same(path_dumps[0], path_dumps[2]);
  const bool maps_ok = same(map_dumps[0], map_dumps[1]) && same(map_dumps[0], map_dumps[2]);
  return {paths_ok && maps_ok, fmt("paths %s (%zu values), radio map %s", paths_ok ? "identical" : "DIFFER",
                                   path_dumps[0].size(), maps_ok ? "identical" : "DIFFER")};
}

Outcome roulette() {
  const Vec3 lo(-1, -1, 0), hi(1, 1, 2);
  RadioMaterial rough = material_preset("concrete");
  rough.scattering = 0.5;
  Scene s = oracle::box_scene(lo, hi, rough);
  s.transmitters.push_back(device("tx", Vec3(0.37, -0.21, 1.45)));
  s.grid = MeasurementGrid::make(Vec3(0, 0, 1.0), Vec3::UnitZ(), Vec3::UnitX(), 0.1, 0.1, 20, 20);
  s.finalize();
  const MeasurementGrid& grid = *s.grid;
  const int runs = 32;
  std::vector<std::vector<double>> diff(grid.cells());
  for (int r = 0; r < runs; ++r) {
    RadioMapConfig mc;
    mc.samples = 100000;
    mc.max_depth = 3;
    mc.seed = 1000 + r;
    mc.enabled = InteractionMask::all().without(Interaction::Diffraction);
    const auto plain = compute_radio_map_sbr(s, s.transmitters[0], grid, mc);
    mc.rr_depth = 2;
    mc.rr_max_prob = 0.95;
    const auto rr = compute_radio_map_sbr(s, s.transmitters[0], grid, mc);
    for (int c = 0; c < grid.cells(); ++c) diff[c].push_back(rr[c] - plain[c]);
  }
  int ok = 0;
  for (const auto& d : diff) {
    double mean = 0.0, var = 0.0;
    for (double x : d) mean += x / runs;
    for (double x : d) var += (x - mean) * (x - mean) / (runs - 1);
    const double se = std::sqrt(var / runs);
    if (std::abs(mean) <= 3.0 * se || (se == 0.0 && mean == 0.0)) ++ok;
  }
  const double frac = static_cast<double>(ok) / grid.cells();
  return {frac >= 0.99, fmt("%.2f%% of cells within 3 sigma (need 99%%), %d paired runs", 100.0 * frac, runs)};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all{
      {1, "Friis recovery", friis},
      {2, "mirror-enumeration oracle", mirror_oracle},
      {3, "dedup soundness", dedup},
      {4, "energy conservation", energy},
      {5, "UTD shadow-boundary continuity", utd_continuity},
      {6, "closed-form diffraction point", closed_form},
      {7, "radio map vs non-coherent path sum", map_vs_paths},
      {8, "importance sampling benefit", importance_sampling},
      {9, "Doppler", doppler},
      {10, "determinism across worker counts", determinism},
      {11, "Russian-roulette unbiasedness", roulette},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
