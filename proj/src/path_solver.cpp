#include "rt/path_solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>
#include <tuple>
#include <unordered_set>

#include "rt/materials.hpp"

namespace rt {

// ---------------------------------------------------------------------------
// Hashing

std::uint64_t fnv1a(std::uint64_t value, std::uint64_t h) {
  for (int i = 0; i < 8; ++i) {
    h ^= (value >> (8 * i)) & 0xFFu;
    h *= kFnvPrime;
  }
  return h;
}

namespace {

std::int64_t quantize(double x, int mode) {
  const double s = x / kHashResolution;
  return static_cast<std::int64_t>(mode == 0 ? std::round(s) : std::floor(s));
}

std::uint64_t fnv_q(double x, int mode, std::uint64_t h) {
  return fnv1a(static_cast<std::uint64_t>(quantize(x, mode)), h);
}

}  // namespace

HashPair hash_plane(const Triangle& tri) {
  Vec3 n = tri.normal;
  // Opposite windings of one plane must collide.
  for (int i = 0; i < 3; ++i) {
    if (std::abs(n[i]) < 0.5 * kHashResolution) continue;
    if (n[i] < 0.0) n = -n;
    break;
  }
  const double d = n.dot(tri.v0);
  HashPair out{};
  for (int mode = 0; mode < 2; ++mode) {
    std::uint64_t h = fnv_q(n.x(), mode, kFnvOffset);
    h = fnv_q(n.y(), mode, h);
    h = fnv_q(n.z(), mode, h);
    out[mode] = fnv_q(d, mode, h);
  }
  return out;
}

HashPair hash_edge(const Wedge& w) {
  HashPair out{};
  for (int mode = 0; mode < 2; ++mode) {
    std::array<std::int64_t, 3> a{}, b{};
    const Vec3 p = w.origin, q = w.end();
    for (int i = 0; i < 3; ++i) {
      a[i] = quantize(p[i], mode);
      b[i] = quantize(q[i], mode);
    }
    if (b < a) std::swap(a, b);
    std::uint64_t h = kFnvOffset;
    for (std::int64_t v : a) h = fnv1a(static_cast<std::uint64_t>(v), h);
    for (std::int64_t v : b) h = fnv1a(static_cast<std::uint64_t>(v), h);
    out[mode] = h;
  }
  return out;
}

std::uint64_t hash_update(std::uint64_t current, std::uint64_t step) { return 1373ULL * current + step; }

HashPair hash_update(const HashPair& current, const HashPair& step) {
  return {hash_update(current[0], step[0]), hash_update(current[1], step[1])};
}

bool HashArray::register_candidate(const HashPair& h, std::uint64_t target) {
  const std::size_t i0 = fnv1a(target, h[0]) % slots_.size();
  const std::size_t i1 = fnv1a(target, h[1]) % slots_.size();
  if (slots_[i0] != 0 || slots_[i1] != 0) return false;
  used_ += 1 + (i1 != i0 ? 1 : 0);
  ++slots_[i0];
  ++slots_[i1];
  return true;
}

double HashArray::load_factor() const { return static_cast<double>(used_) / static_cast<double>(slots_.size()); }

// ---------------------------------------------------------------------------
// Records

bool ValidPath::diffracted() const {
  return std::any_of(steps.begin(), steps.end(), [](const auto& s) { return s.type == Interaction::Diffraction; });
}

std::string ValidPath::interaction_string() const {
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) out += ',';
    out += interaction_letter(steps[i].type);
  }
  return out;
}

Vec3 ValidPath::vertex(int i) const {
  if (i == 0) return source_point;
  if (i == depth() + 1) return target_point;
  return steps[i - 1].vertex;
}

Vec3 ValidPath::direction(int i) const { return (vertex(i + 1) - vertex(i)).normalized(); }

double ValidPath::length() const {
  double r = 0.0;
  for (int i = 0; i <= depth(); ++i) r += (vertex(i + 1) - vertex(i)).norm();
  return r;
}

const char* reject_reason_name(RejectReason r) {
  switch (r) {
    case RejectReason::CoplanarMiss:
      return "coplanar-miss";
    case RejectReason::Occluded:
      return "occluded";
    case RejectReason::OffEdge:
      return "off-edge";
    case RejectReason::Degenerate:
      return "degenerate";
    case RejectReason::MaxDepth:
      return "max-depth";
  }
  return "unknown";
}

void PathDiagnostics::merge(const PathDiagnostics& o) {
  samples += o.samples;
  samples_escaped += o.samples_escaped;
  candidates += o.candidates;
  diffuse_paths += o.diffuse_paths;
  duplicates += o.duplicates;
  heuristic_rejected += o.heuristic_rejected;
  buffer_overflows += o.buffer_overflows;
  all_zero_terminations += o.all_zero_terminations;
  for (const auto& [k, v] : o.rejected) rejected[k] += v;
  valid_paths += o.valid_paths;
  hash_load_factor = std::max(hash_load_factor, o.hash_load_factor);
}

void parallel_chunks(std::size_t chunks, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t n = std::min<std::size_t>(std::max(1, workers), std::max<std::size_t>(chunks, 1));
  if (n <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (std::size_t w = 0; w < n; ++w)
    pool.emplace_back([&] {
      try {
        for (std::size_t c = next++; c < chunks; c = next++) fn(c);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = chunks;
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Candidate generation

namespace {

constexpr std::size_t kSampleChunk = 4096;

struct Event {
  std::uint32_t snapshot;
  int target;
  bool dedup;
  bool diffuse;
};

struct Snapshot {
  std::vector<InteractionStep> steps;
  int ell_d = 0;
  HashPair hash{0, 0};
};

struct ChunkResult {
  std::vector<std::vector<Event>> by_depth;
  std::vector<Snapshot> snapshots;
  PathDiagnostics diag;
};

struct KeyHasher {
  std::size_t operator()(const std::tuple<std::uint64_t, std::uint64_t, int>& k) const {
    return std::get<0>(k) ^ (std::get<1>(k) * 0x9e3779b97f4a7c15ULL) ^ static_cast<std::size_t>(std::get<2>(k));
  }
};

Vec3 reflect(const Vec3& k, const Vec3& n) { return (k - 2.0 * k.dot(n) * n).normalized(); }

void trace_chunk(const Scene& scene, const Vec3& source, const std::vector<Vec3>& targets, const PathConfig& cfg,
                 std::size_t begin, std::size_t end, ChunkResult& out) {
  out.by_depth.assign(cfg.max_depth + 1, {});
  std::unordered_set<std::tuple<std::uint64_t, std::uint64_t, int>, KeyHasher> seen;
  const double freq = scene.frequency;

  for (std::size_t n = begin; n < end; ++n) {
    ++out.diag.samples;
    Vec3 origin = source;
    Vec3 dir = fibonacci_direction(n, cfg.samples);
    HashPair hash{0, 0};
    std::vector<InteractionStep> steps;
    int ell_d = 0;
    bool has_s = false, has_d = false;

    for (int depth = 1; depth <= cfg.max_depth; ++depth) {
      const auto hit = scene.intersect(Ray{origin, dir, kInf});
      if (!hit) {
        ++out.diag.samples_escaped;
        break;
      }
      const RadioMaterial& mat = scene.material_of(hit->object);
      const Vec3& nrm = hit->normal;

      InteractionMask mask = cfg.enabled;
      if (has_s || has_d) mask = mask.without(Interaction::Diffraction);
      if (has_d) mask = mask.without(Interaction::Scattering);
      if (scene.primitive_wedges(hit->object, hit->primitive).empty())
        mask = mask.without(Interaction::Diffraction);

      InteractionDistribution dist;
      try {
        if (cfg.uniform_sampling) {
          dist = uniform_interaction_probabilities(cfg.q_diffraction, mask);
        } else {
          const FresnelSet f = slab_fresnel(std::clamp(-dir.dot(nrm), 0.0, 1.0), mat, freq);
          const double refl = std::norm(f.r_perp) + std::norm(f.r_par);
          const double trans = std::norm(f.t_perp) + std::norm(f.t_par);
          dist = interaction_probabilities(refl, trans, mat.scattering, cfg.q_diffraction, mask);
        }
      } catch (const AllZeroError&) {
        ++out.diag.all_zero_terminations;
        break;
      }
      RngStream choice(cfg.seed, n, depth, RngPurpose::Interaction);
      const Interaction type = sample_discrete(choice, dist);

      InteractionStep step;
      step.type = type;
      step.object = hit->object;
      step.primitive = hit->primitive;
      step.vertex = hit->point;
      step.normal = nrm;
      step.probability = dist[type];

      Vec3 next_dir = dir;
      if (type == Interaction::Scattering) {
        if (mat.random_phases) {
          RngStream ph(cfg.seed, n, depth, RngPurpose::Phase);
          step.chi = {2.0 * kPi * ph.uniform(), 2.0 * kPi * ph.uniform()};
        }
        steps.push_back(step);
        has_s = true;
        ell_d = static_cast<int>(steps.size());
        hash = {0, 0};
        const auto snap = static_cast<std::uint32_t>(out.snapshots.size());
        bool any = false;
        for (int k = 0; k < static_cast<int>(targets.size()); ++k) {
          if (scene.occluded(step.vertex, targets[k])) continue;
          out.by_depth[depth].push_back({snap, k, false, true});
          any = true;
        }
        if (any) out.snapshots.push_back({steps, ell_d, hash});
        RngStream hemi(cfg.seed, n, depth, RngPurpose::Hemisphere);
        next_dir = sample_hemisphere(hemi, nrm);
        origin = step.vertex;
        dir = next_dir;
        continue;
      }

      if (type == Interaction::Reflection) {
        hash = hash_update(hash, hash_plane(scene.triangle(hit->object, hit->primitive)));
        next_dir = reflect(dir, nrm);
      } else if (type == Interaction::Diffraction) {
        const EdgeProjection ep =
            project_to_edge(hit->point, scene.wedges(), scene.primitive_wedges(hit->object, hit->primitive));
        const Wedge& w = scene.wedges()[ep.wedge];
        step.wedge = ep.wedge;
        step.vertex = w.point(ep.x);
        step.normal = w.n0;
        const Vec3 k_in = (step.vertex - origin).normalized();
        const double cos_b = std::clamp(k_in.dot(w.edge), -1.0, 1.0);
        if (1.0 - std::abs(cos_b) < 1e-12) break;
        hash = hash_update(hash, hash_edge(w));
        RngStream keller(cfg.seed, n, depth, RngPurpose::Keller);
        const double phi = w.n * kPi * keller.uniform();
        next_dir = keller_direction(std::acos(cos_b), phi, w.t0, w.n0, w.edge).normalized();
        has_d = true;
      }
      steps.push_back(step);

      const bool dedup = ell_d == 0;
      std::uint32_t snap = 0;
      bool stored = false;
      for (int k = 0; k < static_cast<int>(targets.size()); ++k) {
        const auto key = std::make_tuple(hash[0], hash[1], k);
        if (dedup && seen.count(key)) {
          ++out.diag.duplicates;
          continue;
        }
        if (scene.occluded(step.vertex, targets[k])) {
          ++out.diag.heuristic_rejected;
          continue;
        }
        if (dedup) seen.insert(key);
        if (!stored) {
          snap = static_cast<std::uint32_t>(out.snapshots.size());
          out.snapshots.push_back({steps, ell_d, hash});
          stored = true;
        }
        out.by_depth[depth].push_back({snap, k, dedup, false});
      }
      origin = step.vertex;
      dir = next_dir;
    }
  }
}

}  // namespace

CandidateSet generate_candidates(const Scene& scene, const Vec3& source, const std::vector<Vec3>& targets,
                                 const PathConfig& cfg, int source_id) {
  if (cfg.samples < 1) throw ValidationError("samples must be at least 1");
  if (cfg.max_depth < 0) throw ValidationError("max depth must be non-negative");
  if (cfg.q_diffraction < 0.0 || cfg.q_diffraction > 1.0) throw ValidationError("q-diffraction must lie in [0, 1]");

  const std::size_t capacity = cfg.buffer_size ? cfg.buffer_size : cfg.samples;
  HashArray hashes(std::max<std::size_t>(capacity, 1000000));
  CandidateSet out;
  PathDiagnostics& diag = out.diagnostics;

  auto store = [&](CandidateRecord&& rec) {
    if (out.records.size() >= capacity) {
      ++diag.buffer_overflows;
      return;
    }
    if (rec.diffuse_terminated)
      ++diag.diffuse_paths;
    else
      ++diag.candidates;
    out.records.push_back(std::move(rec));
  };

  // Depth 0: the line-of-sight candidate, once per visible target.
  for (int k = 0; k < static_cast<int>(targets.size()); ++k) {
    if (scene.occluded(source, targets[k])) continue;
    if (!hashes.register_candidate({0, 0}, static_cast<std::uint64_t>(k))) continue;
    CandidateRecord rec;
    rec.source = source_id;
    rec.target = k;
    store(std::move(rec));
  }

  if (cfg.max_depth > 0 && !scene.empty()) {
    const std::size_t chunks = (cfg.samples + kSampleChunk - 1) / kSampleChunk;
    std::vector<ChunkResult> results(chunks);
    parallel_chunks(chunks, cfg.workers, [&](std::size_t c) {
      const std::size_t b = c * kSampleChunk;
      trace_chunk(scene, source, targets, cfg, b, std::min(cfg.samples, b + kSampleChunk), results[c]);
    });
    for (const auto& r : results) diag.merge(r.diag);

    // Sequential merge in (depth, sample, target) order: registration and
    // buffer admission never depend on scheduling.
    for (int depth = 1; depth <= cfg.max_depth; ++depth) {
      for (const auto& r : results) {
        for (const Event& e : r.by_depth[depth]) {
          const Snapshot& s = r.snapshots[e.snapshot];
          if (e.dedup && !hashes.register_candidate(s.hash, static_cast<std::uint64_t>(e.target))) {
            ++diag.duplicates;
            continue;
          }
          CandidateRecord rec;
          rec.source = source_id;
          rec.target = e.target;
          rec.steps = s.steps;
          rec.ell_d = s.ell_d;
          rec.hash = s.hash;
          rec.diffuse_terminated = e.diffuse;
          store(std::move(rec));
        }
      }
    }
  } else {
    diag.samples = cfg.samples;
    diag.samples_escaped = cfg.max_depth > 0 ? cfg.samples : 0;
  }
  diag.hash_load_factor = hashes.load_factor();
  return out;
}

// ---------------------------------------------------------------------------
// Field replay

PathField compute_path_fields(const ValidPath& path, const Scene& scene, const AntennaPattern& tx,
                              const AntennaPattern& rx) {
  const int depth = path.depth();
  const double lambda = scene.wavelength();
  const double freq = scene.frequency;

  std::vector<double> seg(depth + 1);
  for (int i = 0; i <= depth; ++i) seg[i] = (path.vertex(i + 1) - path.vertex(i)).norm();

  JonesField e = pattern_to_gcs(tx, path.direction(0));
  double gamma = 1.0, r = 0.0, s = 0.0, tau = 0.0;
  double tube = path.launch_solid_angle;
  bool diffracted = false;

  for (int l = 1; l <= depth; ++l) {
    const InteractionStep& st = path.steps[l - 1];
    const Vec3 k_in = path.direction(l - 1);
    const Vec3 k_out = path.direction(l);
    const RadioMaterial& mat = scene.material_of(st.object);
    switch (st.type) {
      case Interaction::Reflection:
        e = specular_transform(k_in, st.normal, mat, freq).apply(e);
        break;
      case Interaction::Transmission:
        e = refraction_transform(k_in, st.normal, mat, freq).apply(e);
        break;
      case Interaction::Scattering: {
        const double gam = reflected_amplitude_ratio(e, st.normal, mat, freq);
        const double cos_i = std::max(1e-12, -k_in.dot(st.normal));
        e = diffuse_transform(e, k_out, st.normal, mat, gam, tube / cos_i, st.chi);
        break;
      }
      case Interaction::Diffraction: {
        const Wedge& w = scene.wedges()[st.wedge];
        double after = 0.0;
        for (int i = l; i <= depth; ++i) after += seg[i];
        const RadioMaterial& m0 = scene.material_of(w.faces[0].object);
        const RadioMaterial& mn = w.screen ? m0 : scene.material_of(w.faces[1].object);
        const cd eta0 = complex_permittivity(m0.eps_r, m0.sigma, freq);
        const cd etan = complex_permittivity(mn.eps_r, mn.sigma, freq);
        e = utd_transfer(w, k_in, k_out, r + seg[l - 1], after, lambda, eta0, etan).apply(e);
        break;
      }
    }
    gamma *= st.probability;
    r += seg[l - 1];
    if (st.type == Interaction::Scattering) {
      e.c /= std::sqrt(gamma);
      gamma = 1.0;
      r = 0.0;
      tube = 2.0 * kPi;
    } else if (st.type == Interaction::Diffraction) {
      s = r;
      r = 0.0;
      diffracted = true;
    }
    tau += seg[l - 1] / kSpeedOfLight;
  }
  r += seg[depth];
  tau += seg[depth] / kSpeedOfLight;

  const JonesField c_rx = pattern_to_gcs(rx, -path.direction(depth));
  cd a = lambda / (4.0 * kPi) * (e.vector().transpose() * c_rx.vector())(0);
  if (diffracted)
    a /= std::sqrt(s * r * (s + r));
  else
    a /= r;
  return {a, tau};
}

double accumulate_doppler(const ValidPath& path, const Scene& scene, const Vec3& v_source, const Vec3& v_target) {
  const double lambda = scene.wavelength();
  double nu = 0.0;
  for (int l = 1; l <= path.depth(); ++l) {
    const Vec3& v = scene.objects[path.steps[l - 1].object].velocity;
    nu += v.dot(path.direction(l) - path.direction(l - 1)) / lambda;
  }
  nu += v_source.dot(path.direction(0)) / lambda;
  nu -= v_target.dot(path.direction(path.depth())) / lambda;
  return nu;
}

// ---------------------------------------------------------------------------
// Top level

namespace {

struct Endpoint {
  int device;
  int element;  // -1 for the array center
  Vec3 point;
};

std::vector<Endpoint> endpoints(const std::vector<RadioDevice>& devices, bool synthetic) {
  std::vector<Endpoint> out;
  for (int d = 0; d < static_cast<int>(devices.size()); ++d) {
    if (synthetic) {
      out.push_back({d, -1, devices[d].position});
      continue;
    }
    const auto offs = devices[d].global_offsets();
    for (int e = 0; e < static_cast<int>(offs.size()); ++e) out.push_back({d, e, devices[d].position + offs[e]});
  }
  return out;
}

bool canonical_less(const PathRecord& a, const PathRecord& b) {
  const auto ka = std::make_tuple(a.tx, a.tx_element, a.rx, a.rx_element, a.geometry.depth());
  const auto kb = std::make_tuple(b.tx, b.tx_element, b.rx, b.rx_element, b.geometry.depth());
  if (ka != kb) return ka < kb;
  const std::string sa = a.geometry.interaction_string(), sb = b.geometry.interaction_string();
  if (sa != sb) return sa < sb;
  if (a.tau != b.tau) return a.tau < b.tau;
  for (int i = 1; i <= a.geometry.depth(); ++i)
    for (int c = 0; c < 3; ++c) {
      const double x = a.geometry.vertex(i)[c], y = b.geometry.vertex(i)[c];
      if (x != y) return x < y;
    }
  return false;
}

}  // namespace

PathSet compute_paths(const Scene& scene, const PathConfig& cfg) {
  if (scene.transmitters.empty() || scene.receivers.empty())
    throw ValidationError("path computation needs at least one transmitter and one receiver");
  const double lambda = scene.wavelength();
  PathSet out;

  const auto sources = endpoints(scene.transmitters, cfg.synthetic_array);
  const auto targets = endpoints(scene.receivers, cfg.synthetic_array);
  std::vector<Vec3> target_points;
  for (const auto& t : targets) target_points.push_back(t.point);

  for (int si = 0; si < static_cast<int>(sources.size()); ++si) {
    const Endpoint& src = sources[si];
    const RadioDevice& txd = scene.transmitters[src.device];
    const auto tx_patterns = txd.patterns();
    const auto tx_offsets = txd.global_offsets();

    CandidateSet cs = generate_candidates(scene, src.point, target_points, cfg, si);
    out.diagnostics.merge(cs.diagnostics);

    std::vector<RefineResult> refined(cs.records.size());
    constexpr std::size_t kRefineChunk = 256;
    const std::size_t chunks = (cs.records.size() + kRefineChunk - 1) / kRefineChunk;
    parallel_chunks(chunks, cfg.workers, [&](std::size_t c) {
      const std::size_t end = std::min(cs.records.size(), (c + 1) * kRefineChunk);
      for (std::size_t i = c * kRefineChunk; i < end; ++i) {
        const CandidateRecord& rec = cs.records[i];
        const Vec3& tp = target_points[rec.target];
        if (rec.diffuse_terminated) {
          ValidPath p;
          p.source = si;
          p.target = rec.target;
          p.source_point = src.point;
          p.target_point = tp;
          p.steps = rec.steps;
          refined[i].path = std::move(p);
        } else {
          refined[i] = refine_candidate(rec, scene, src.point, tp, cfg.enabled, cfg.max_depth);
        }
      }
    });

    for (std::size_t i = 0; i < refined.size(); ++i) {
      if (!refined[i].path) {
        ++out.diagnostics.rejected[reject_reason_name(refined[i].reason)];
        continue;
      }
      ValidPath& geo = *refined[i].path;
      geo.source = si;
      geo.hash = cs.records[i].hash;
      geo.launch_solid_angle = 4.0 * kPi / static_cast<double>(cfg.samples);
      const Endpoint& dst = targets[geo.target];
      const RadioDevice& rxd = scene.receivers[dst.device];
      const auto rx_patterns = rxd.patterns();

      PathRecord rec;
      rec.tx = src.device;
      rec.rx = dst.device;
      rec.tx_element = src.element;
      rec.rx_element = dst.element;
      const int ntp = static_cast<int>(tx_patterns.size());
      const int nrp = static_cast<int>(rx_patterns.size());
      Eigen::MatrixXcd a_pol(nrp, ntp);
      double tau = 0.0;
      for (int pr = 0; pr < nrp; ++pr)
        for (int pt = 0; pt < ntp; ++pt) {
          const PathField f = compute_path_fields(geo, scene, tx_patterns[pt], rx_patterns[pr]);
          a_pol(pr, pt) = f.a;
          tau = f.tau;
        }
      if (cfg.synthetic_array) {
        const Eigen::VectorXcd u_tx = array_response(tx_offsets, geo.direction(0), lambda, false);
        const Eigen::VectorXcd u_rx = array_response(rxd.global_offsets(), geo.direction(geo.depth()), lambda, true);
        rec.a.resize(u_rx.size() * nrp, u_tx.size() * ntp);
        for (int er = 0; er < u_rx.size(); ++er)
          for (int et = 0; et < u_tx.size(); ++et)
            rec.a.block(er * nrp, et * ntp, nrp, ntp) = u_rx[er] * u_tx[et] * a_pol;
      } else {
        rec.a = a_pol;
        rec.rx_port_offset = dst.element * nrp;
        rec.tx_port_offset = src.element * ntp;
      }
      rec.tau = tau;
      rec.doppler = accumulate_doppler(geo, scene, txd.velocity, rxd.velocity);
      rec.geometry = std::move(geo);
      out.paths.push_back(std::move(rec));
    }
  }
  out.diagnostics.valid_paths = out.paths.size();
  std::sort(out.paths.begin(), out.paths.end(), canonical_less);
  return out;
}

std::vector<Eigen::MatrixXcd> frequency_response(const PathSet& set, const Scene& scene, int tx, int rx,
                                                 const std::vector<double>& frequencies) {
  if (frequencies.empty()) throw ValidationError("frequency list is empty");
  const int ntx = scene.transmitters.at(tx).ports();
  const int nrx = scene.receivers.at(rx).ports();
  std::vector<Eigen::MatrixXcd> h(frequencies.size(), Eigen::MatrixXcd::Zero(nrx, ntx));
  for (const PathRecord& p : set.paths) {
    if (p.tx != tx || p.rx != rx) continue;
    for (std::size_t i = 0; i < frequencies.size(); ++i) {
      const cd phase = std::polar(1.0, -2.0 * kPi * frequencies[i] * p.tau);
      h[i].block(p.rx_port_offset, p.tx_port_offset, p.a.rows(), p.a.cols()) += phase * p.a;
    }
  }
  return h;
}

double channel_gain(const PathSet& set, int tx, int rx) {
  double g = 0.0;
  for (const PathRecord& p : set.paths)
    if (p.tx == tx && p.rx == rx) g += p.a.squaredNorm();
  return g;
}

}  // namespace rt
