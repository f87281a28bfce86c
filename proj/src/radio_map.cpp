#include "rt/radio_map.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "rt/materials.hpp"
#include "rt/path_solver.hpp"

namespace rt {

void RadioMapConfig::validate() const {
  if (samples < 1) throw ValidationError("samples must be at least 1");
  if (max_depth < 0) throw ValidationError("max depth must be non-negative");
  if (!(rr_max_prob > 0.0 && rr_max_prob <= 1.0)) throw ValidationError("rr max probability must lie in (0, 1]");
  if (rr_depth > max_depth) throw ValidationError("rr depth must not exceed the max depth");
  if (gain_threshold < 0.0) throw ValidationError("gain threshold must be non-negative");
}

double russian_roulette_probability(double r, const JonesField& e, double p_max) {
  return std::min(r * r * e.power(), p_max);
}

cd precoding_scalar(const std::vector<Vec3>& global_offsets, const Eigen::VectorXcd& precoder, const Vec3& dir,
                    double wavelength) {
  const Eigen::VectorXcd u = array_response(global_offsets, dir, wavelength, false);
  if (precoder.size() == 0) return u.sum();
  if (precoder.size() != u.size()) throw ValidationError("precoder length does not match the element count");
  return (u.transpose() * precoder)(0);
}

std::vector<int> collect_wedges_near_source(const Scene& scene, const Vec3& source, double radius) {
  std::vector<int> out;
  if (!(radius >= 0.0)) return out;
  const auto& wedges = scene.wedges();
  for (int i = 0; i < static_cast<int>(wedges.size()); ++i) {
    const Wedge& w = wedges[i];
    if (point_segment_distance(source, w.origin, w.end()) > radius) continue;
    for (int k = 0; k < 8; ++k) {
      if (!scene.occluded(source, w.point(w.length * (k + 0.5) / 8.0))) {
        out.push_back(i);
        break;
      }
    }
  }
  return out;
}

namespace {

struct EdgeSample {
  Vec3 v;
  Vec3 k_in;  // unit, source to v
  double s_prime;
  Vec3 k_out;
  double gamma;  // distance to the plane along k_out
};

std::optional<EdgeSample> edge_sample(const Wedge& w, const Vec3& source, double x, double phi,
                                      const Vec3& plane_point, const Vec3& plane_normal) {
  EdgeSample s;
  s.v = w.point(x);
  const Vec3 d = s.v - source;
  s.s_prime = d.norm();
  if (s.s_prime < 1e-12) return std::nullopt;
  s.k_in = d / s.s_prime;
  const double cos_b = std::clamp(s.k_in.dot(w.edge), -1.0, 1.0);
  s.k_out = keller_direction(std::acos(cos_b), phi, w.t0, w.n0, w.edge);
  const double denom = plane_normal.dot(s.k_out);
  if (std::abs(denom) < 1e-12) throw NoIntersectionError();
  s.gamma = plane_normal.dot(plane_point - s.v) / denom;
  return s;
}

Vec3 edge_target(const Wedge& w, const Vec3& source, double x, double phi, const Vec3& p, const Vec3& n) {
  const auto s = edge_sample(w, source, x, phi, p, n);
  if (!s) throw NoIntersectionError();
  return s->v + s->gamma * s->k_out;
}

std::optional<double> plane_hit(const Vec3& o, const Vec3& d, const MeasurementGrid& g) {
  const double denom = d.dot(g.n);
  if (std::abs(denom) < 1e-15) return std::nullopt;
  const double t = (g.center - o).dot(g.n) / denom;
  if (!(t > kRayEpsilon)) return std::nullopt;
  return t;
}

struct Deposit {
  int cell;
  double value;
};

constexpr std::size_t kChunk = 4096;
constexpr std::size_t kBatch = 64;

// Runs chunks in batches and adds their deposits to `out` in chunk order, so
// the floating-point sum never depends on the worker count.
template <typename Fn>
void run_deposits(std::size_t total, int workers, std::vector<double>& out, Fn&& chunk_fn) {
  const std::size_t chunks = (total + kChunk - 1) / kChunk;
  for (std::size_t b0 = 0; b0 < chunks; b0 += kBatch) {
    const std::size_t nb = std::min(kBatch, chunks - b0);
    std::vector<std::vector<Deposit>> lists(nb);
    parallel_chunks(nb, workers, [&](std::size_t i) {
      const std::size_t c = b0 + i;
      chunk_fn(c * kChunk, std::min(total, (c + 1) * kChunk), lists[i]);
    });
    for (const auto& l : lists)
      for (const Deposit& d : l) out[d.cell] += d.value;
  }
}

double field_power(const std::vector<JonesField>& fields) {
  double p = 0.0;
  for (const auto& f : fields) p += f.power();
  return p;
}

}  // namespace

double diffraction_weighting_factor(const Wedge& w, const Vec3& source, double x, double phi,
                                    const Vec3& plane_point, const Vec3& plane_normal) {
  const double hx = 1e-4 * std::max(1.0, w.length);
  const double hp = 1e-4;
  const Vec3 dx = (edge_target(w, source, x + hx, phi, plane_point, plane_normal) -
                   edge_target(w, source, x - hx, phi, plane_point, plane_normal)) /
                  (2.0 * hx);
  const Vec3 dp = (edge_target(w, source, x, phi + hp, plane_point, plane_normal) -
                   edge_target(w, source, x, phi - hp, plane_point, plane_normal)) /
                  (2.0 * hp);
  return dx.cross(dp).norm();
}

std::vector<double> compute_radio_map_los(const Scene& scene, const RadioDevice& tx, const MeasurementGrid& grid) {
  const double lambda = scene.wavelength();
  const auto patterns = tx.patterns();
  const auto offsets = tx.global_offsets();
  std::vector<double> out(grid.cells(), 0.0);
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const Vec3 c = grid.cell_center(i, j);
      const Vec3 d = c - tx.position;
      const double r = d.norm();
      if (r < 1e-12 || scene.occluded(tx.position, c)) continue;
      const Vec3 k = d / r;
      const double alpha2 = std::norm(precoding_scalar(offsets, tx.precoder, k, lambda));
      double g = 0.0;
      for (const auto& p : patterns) g += pattern_to_gcs(p, k).power();
      const double a = lambda / (4.0 * kPi * r);
      out[grid.index(i, j)] = a * a * alpha2 * g;
    }
  return out;
}

std::vector<double> compute_radio_map_sbr(const Scene& scene, const RadioDevice& tx, const MeasurementGrid& grid,
                                          const RadioMapConfig& cfg, RadioMapDiagnostics* diag) {
  cfg.validate();
  std::vector<double> out = compute_radio_map_los(scene, tx, grid);
  RadioMapDiagnostics local;
  local.samples = cfg.samples;
  if (cfg.max_depth < 1 || scene.empty()) {
    if (diag) *diag = local;
    return out;
  }

  const double lambda = scene.wavelength();
  const double freq = scene.frequency;
  const double scale = (lambda / (4.0 * kPi)) * (lambda / (4.0 * kPi)) / grid.cell_area();
  const auto patterns = tx.patterns();
  const auto offsets = tx.global_offsets();
  const InteractionMask mask = cfg.enabled.without(Interaction::Diffraction);
  const Vec3 source = tx.position;

  std::vector<RadioMapDiagnostics> per_chunk((cfg.samples + kChunk - 1) / kChunk);

  run_deposits(cfg.samples, cfg.workers, out, [&](std::size_t begin, std::size_t end, std::vector<Deposit>& dep) {
    RadioMapDiagnostics& dg = per_chunk[begin / kChunk];
    for (std::size_t n = begin; n < end; ++n) {
      Vec3 origin = source;
      Vec3 dir = fibonacci_direction(n, cfg.samples);
      const cd alpha = precoding_scalar(offsets, tx.precoder, dir, lambda);
      std::vector<JonesField> fields;
      for (const auto& p : patterns) {
        JonesField f = pattern_to_gcs(p, dir);
        f.c *= alpha;
        fields.push_back(f);
      }
      double pr = 1.0;
      double tube = 4.0 * kPi / static_cast<double>(cfg.samples);
      double r = 0.0;

      for (int depth = 0; depth <= cfg.max_depth; ++depth) {
        const auto hit = scene.intersect(Ray{origin, dir, kInf});
        const double seg_end = hit ? hit->t : kInf;
        if (depth >= 1) {
          if (const auto t = plane_hit(origin, dir, grid); t && *t < seg_end) {
            if (const auto cell = grid.cell_lookup(origin + *t * dir)) {
              const double cos_g = std::abs(dir.dot(grid.n));
              const double e = field_power(fields) * tube / (cos_g * pr);
              dep.push_back({grid.index(cell->first, cell->second), scale * e});
              ++dg.deposits;
            }
          }
        }
        if (depth == cfg.max_depth || !hit) break;

        const RadioMaterial& mat = scene.material_of(hit->object);
        const Vec3& nrm = hit->normal;
        InteractionDistribution dist;
        try {
          const FresnelSet f = slab_fresnel(std::clamp(-dir.dot(nrm), 0.0, 1.0), mat, freq);
          dist = interaction_probabilities(std::norm(f.r_perp) + std::norm(f.r_par),
                                           std::norm(f.t_perp) + std::norm(f.t_par), mat.scattering, 0.0, mask);
        } catch (const AllZeroError&) {
          ++dg.all_zero_terminations;
          break;
        }
        RngStream choice(cfg.seed, n, depth + 1, RngPurpose::Interaction);
        const Interaction type = sample_discrete(choice, dist);
        pr *= dist[type];
        r += hit->t;

        Vec3 next = dir;
        switch (type) {
          case Interaction::Reflection: {
            const JonesTransform tr = specular_transform(dir, nrm, mat, freq);
            for (auto& f : fields) f = tr.apply(f);
            next = tr.k_out;
            break;
          }
          case Interaction::Transmission: {
            const JonesTransform tr = refraction_transform(dir, nrm, mat, freq);
            for (auto& f : fields) f = tr.apply(f);
            break;
          }
          case Interaction::Scattering: {
            RngStream hemi(cfg.seed, n, depth + 1, RngPurpose::Hemisphere);
            next = sample_hemisphere(hemi, nrm);
            std::pair<double, double> chi{0.0, 0.0};
            if (mat.random_phases) {
              RngStream ph(cfg.seed, n, depth + 1, RngPurpose::Phase);
              chi = {2.0 * kPi * ph.uniform(), 2.0 * kPi * ph.uniform()};
            }
            const double cos_i = std::max(1e-12, -dir.dot(nrm));
            for (auto& f : fields) {
              const double g = reflected_amplitude_ratio(f, nrm, mat, freq);
              f = diffuse_transform(f, next, nrm, mat, g, tube / cos_i, chi);
            }
            tube = 2.0 * kPi;
            r = 0.0;
            break;
          }
          case Interaction::Diffraction:
            break;
        }
        origin = hit->point;
        dir = next;

        if (cfg.rr_depth >= 0 && depth + 1 >= cfg.rr_depth) {
          const double power = field_power(fields);
          if (cfg.gain_threshold > 0.0 && r > 0.0 &&
              (lambda / (4.0 * kPi * r)) * (lambda / (4.0 * kPi * r)) * power < cfg.gain_threshold) {
            ++dg.threshold_terminations;
            break;
          }
          // Ray power relative to its launch share, over the sampling
          // probability so far. After a diffuse bounce the field carries the
          // footprint weight, so |E|^2 alone would be of order 1/N_S.
          JonesField total;
          total.c = Vec2c(std::sqrt(power), 0.0);
          const double launch = 4.0 * kPi / static_cast<double>(cfg.samples);
          const double p = russian_roulette_probability(std::sqrt(tube / (launch * pr)), total, cfg.rr_max_prob);
          RngStream rr(cfg.seed, n, depth + 1, RngPurpose::Roulette);
          if (!(rr.uniform() < p)) {
            ++dg.roulette_terminations;
            break;
          }
          pr *= p;
        }
      }
    }
  });

  for (const auto& d : per_chunk) {
    local.deposits += d.deposits;
    local.roulette_terminations += d.roulette_terminations;
    local.threshold_terminations += d.threshold_terminations;
    local.all_zero_terminations += d.all_zero_terminations;
  }
  if (diag) *diag = local;
  return out;
}

std::vector<double> compute_radio_map_diffraction(const Scene& scene, const RadioDevice& tx,
                                                  const MeasurementGrid& grid, const std::vector<int>& wedges,
                                                  const RadioMapConfig& cfg, RadioMapDiagnostics* diag) {
  std::vector<double> out(grid.cells(), 0.0);
  if (wedges.empty() || cfg.diffraction_samples == 0) return out;
  const double lambda = scene.wavelength();
  const double freq = scene.frequency;
  const auto patterns = tx.patterns();
  const auto offsets = tx.global_offsets();
  const Vec3 source = tx.position;
  const double n_samples = static_cast<double>(cfg.diffraction_samples);
  const double lam4 = lambda / (4.0 * kPi);
  std::uint64_t deposits = 0;

  for (int wi : wedges) {
    const Wedge& w = scene.wedges()[wi];
    const RadioMaterial& m0 = scene.material_of(w.faces[0].object);
    const RadioMaterial& mn = w.screen ? m0 : scene.material_of(w.faces[1].object);
    const cd eta0 = complex_permittivity(m0.eps_r, m0.sigma, freq);
    const cd etan = complex_permittivity(mn.eps_r, mn.sigma, freq);
    const double measure = w.length * w.n * kPi / n_samples / grid.cell_area();
    std::vector<std::uint64_t> counts((cfg.diffraction_samples + kChunk - 1) / kChunk, 0);

    run_deposits(cfg.diffraction_samples, cfg.workers, out,
                 [&](std::size_t begin, std::size_t end, std::vector<Deposit>& dep) {
                   for (std::size_t k = begin; k < end; ++k) {
                     RngStream rng(cfg.seed, k, static_cast<std::uint32_t>(wi), RngPurpose::Edge);
                     const double x = w.length * rng.uniform();
                     const double phi = w.n * kPi * rng.uniform();
                     std::optional<EdgeSample> s;
                     try {
                       s = edge_sample(w, source, x, phi, grid.center, grid.n);
                     } catch (const NoIntersectionError&) {
                       continue;
                     }
                     if (!s || !(s->gamma > kRayEpsilon)) continue;
                     const Vec3 t = s->v + s->gamma * s->k_out;
                     const auto cell = grid.cell_lookup(t);
                     if (!cell) continue;
                     const auto [phi_in, phi_out] = wedge_angles(w, s->k_in, s->k_out);
                     (void)phi_out;
                     if (phi_in < 0.0 || phi_in > w.n * kPi) continue;
                     if (scene.occluded(source, s->v) || scene.occluded(s->v, t)) continue;

                     double weight;
                     JonesTransform tr;
                     try {
                       weight = diffraction_weighting_factor(w, source, x, phi, grid.center, grid.n);
                       tr = utd_transfer(w, s->k_in, s->k_out, s->s_prime, s->gamma, lambda, eta0, etan);
                     } catch (const Error&) {
                       continue;
                     }
                     const cd alpha = precoding_scalar(offsets, tx.precoder, s->k_in, lambda);
                     double power = 0.0;
                     for (const auto& p : patterns) {
                       JonesField f = pattern_to_gcs(p, s->k_in);
                       f.c *= alpha;
                       power += tr.apply(f).power();
                     }
                     const double e =
                         lam4 * lam4 * power / (s->s_prime * s->gamma * (s->s_prime + s->gamma));
                     dep.push_back({grid.index(cell->first, cell->second), measure * e * weight});
                     ++counts[begin / kChunk];
                   }
                 });
    for (auto c : counts) deposits += c;
  }
  if (diag) {
    diag->wedges += wedges.size();
    diag->diffraction_deposits += deposits;
  }
  return out;
}

std::vector<RadioMap> compute_radio_map(const Scene& scene, const RadioMapConfig& cfg) {
  if (!scene.grid) throw ValidationError("scene defines no measurement grid");
  if (scene.transmitters.empty()) throw ValidationError("radio map needs at least one transmitter");
  cfg.validate();
  const MeasurementGrid& grid = *scene.grid;
  std::vector<RadioMap> maps;
  for (int t = 0; t < static_cast<int>(scene.transmitters.size()); ++t) {
    const RadioDevice& tx = scene.transmitters[t];
    RadioMap m;
    m.tx = t;
    m.grid = grid;
    m.values = compute_radio_map_sbr(scene, tx, grid, cfg, &m.diagnostics);
    if (cfg.enabled.has(Interaction::Diffraction) && cfg.max_depth >= 1) {
      const double radius = cfg.wedge_radius < 0.0 ? scene.diameter() : cfg.wedge_radius;
      const auto wedges = collect_wedges_near_source(scene, tx.position, radius);
      const auto d = compute_radio_map_diffraction(scene, tx, grid, wedges, cfg, &m.diagnostics);
      for (std::size_t i = 0; i < d.size(); ++i) m.values[i] += d[i];
    }
    for (double& v : m.values) v *= tx.power;
    maps.push_back(std::move(m));
  }
  return maps;
}

}  // namespace rt
