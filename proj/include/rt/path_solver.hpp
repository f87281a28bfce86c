#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rt/common.hpp"
#include "rt/geometry.hpp"
#include "rt/sampling.hpp"
#include "rt/scene.hpp"

namespace rt {

// ---------------------------------------------------------------------------
// Chain hashing

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;
inline constexpr double kHashResolution = 1e-4;

/// FNV-1a over the eight little-endian bytes of `value`.
std::uint64_t fnv1a(std::uint64_t value, std::uint64_t h = kFnvOffset);

/// One hash per quantizer: index 0 rounds, index 1 floors.
using HashPair = std::array<std::uint64_t, 2>;

HashPair hash_plane(const Triangle& tri);
HashPair hash_edge(const Wedge& w);
std::uint64_t hash_update(std::uint64_t current, std::uint64_t step);
HashPair hash_update(const HashPair& current, const HashPair& step);

class HashArray {
 public:
  explicit HashArray(std::size_t size) : slots_(size, 0) {}

  /// True when both target-paired slots were empty; both are then marked.
  bool register_candidate(const HashPair& h, std::uint64_t target);
  std::size_t size() const { return slots_.size(); }
  double load_factor() const;

 private:
  std::vector<std::uint32_t> slots_;
  std::size_t used_ = 0;
};

// ---------------------------------------------------------------------------
// Records

struct InteractionStep {
  Interaction type = Interaction::Reflection;
  int object = -1;
  int primitive = -1;
  int wedge = -1;  // diffraction only
  Vec3 vertex = Vec3::Zero();
  /// Surface normal facing the incident side; the 0-face normal for diffraction.
  Vec3 normal = Vec3::UnitZ();
  /// Probability with which the type was sampled (1 for steps added by refinement).
  double probability = 1.0;
  /// Random phase offsets of a diffuse reflection.
  std::pair<double, double> chi{0.0, 0.0};
};

struct CandidateRecord {
  int source = 0;
  int target = 0;
  std::vector<InteractionStep> steps;
  /// Number of leading steps up to and including the last diffuse reflection.
  int ell_d = 0;
  HashPair hash{0, 0};
  /// Ends in a diffuse reflection connected to the target: already valid.
  bool diffuse_terminated = false;

  int depth() const { return static_cast<int>(steps.size()); }
};

struct ValidPath {
  int source = 0;
  int target = 0;
  Vec3 source_point = Vec3::Zero();
  Vec3 target_point = Vec3::Zero();
  std::vector<InteractionStep> steps;
  HashPair hash{0, 0};
  /// Solid angle of the launch tube, 4 pi / N_S.
  double launch_solid_angle = 0.0;

  int depth() const { return static_cast<int>(steps.size()); }
  bool diffracted() const;
  std::string interaction_string() const;
  /// Unit propagation direction of segment i (0 = departure, depth = arrival).
  Vec3 direction(int i) const;
  Vec3 vertex(int i) const;
  double length() const;
};

enum class RejectReason { CoplanarMiss, Occluded, OffEdge, Degenerate, MaxDepth };
const char* reject_reason_name(RejectReason r);

struct RefineResult {
  std::optional<ValidPath> path;
  RejectReason reason = RejectReason::Degenerate;
};

struct PathDiagnostics {
  std::uint64_t samples = 0;
  std::uint64_t samples_escaped = 0;
  std::uint64_t candidates = 0;
  std::uint64_t diffuse_paths = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t heuristic_rejected = 0;
  std::uint64_t buffer_overflows = 0;
  std::uint64_t all_zero_terminations = 0;
  std::map<std::string, std::uint64_t> rejected;
  std::uint64_t valid_paths = 0;
  double hash_load_factor = 0.0;

  void merge(const PathDiagnostics& o);
};

struct PathConfig {
  std::size_t samples = 1000000;
  int max_depth = 3;
  double q_diffraction = 0.2;
  InteractionMask enabled = InteractionMask::all();
  std::uint64_t seed = 42;
  /// Buffer capacity N_B; 0 means N_S.
  std::size_t buffer_size = 0;
  bool synthetic_array = true;
  int workers = 1;
  /// Equal probabilities for R, S, T instead of material-driven ones.
  bool uniform_sampling = false;
};

struct CandidateSet {
  std::vector<CandidateRecord> records;
  PathDiagnostics diagnostics;
};

/// SBR candidate generation for one source and any number of targets.
CandidateSet generate_candidates(const Scene& scene, const Vec3& source, const std::vector<Vec3>& targets,
                                 const PathConfig& cfg, int source_id = 0);

/// Edge parameter x minimizing |s - v| + |v - t| with v = o + x e.
/// Throws ValidationError when s or t lies on the edge line.
double solve_first_order_diffraction_point(const Vec3& s, const Vec3& t, const Vec3& o, const Vec3& e);

/// Image-method refinement of a specular suffix. `enabled` decides whether
/// surfaces crossed by refined segments become refractions or occlusions.
RefineResult refine_candidate(const CandidateRecord& c, const Scene& scene, const Vec3& source,
                              const Vec3& target, InteractionMask enabled, int max_depth);

struct PathField {
  cd a = 0.0;
  double tau = 0.0;
};

/// Field replay along a valid path for one transmit and one receive pattern.
PathField compute_path_fields(const ValidPath& path, const Scene& scene, const AntennaPattern& tx,
                              const AntennaPattern& rx);

double accumulate_doppler(const ValidPath& path, const Scene& scene, const Vec3& v_source, const Vec3& v_target);

struct PathRecord {
  int tx = 0;
  int rx = 0;
  /// -1 when the path runs between array centers (synthetic arrays).
  int tx_element = -1;
  int rx_element = -1;
  ValidPath geometry;
  /// Rows: receive ports, columns: transmit ports covered by this record.
  Eigen::MatrixXcd a;
  int rx_port_offset = 0;
  int tx_port_offset = 0;
  double tau = 0.0;
  double doppler = 0.0;
};

struct PathSet {
  std::vector<PathRecord> paths;
  PathDiagnostics diagnostics;
};

PathSet compute_paths(const Scene& scene, const PathConfig& cfg);

/// H(f) per frequency for one (tx, rx) device pair, sized rx ports x tx ports.
std::vector<Eigen::MatrixXcd> frequency_response(const PathSet& set, const Scene& scene, int tx, int rx,
                                                 const std::vector<double>& frequencies);

/// Sum of |a|^2 over every path and port pair between two devices.
double channel_gain(const PathSet& set, int tx, int rx);

/// Runs `fn(chunk)` for chunk in [0, chunks) on `workers` threads.
void parallel_chunks(std::size_t chunks, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace rt
