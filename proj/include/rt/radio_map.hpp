#pragma once

#include <cstdint>
#include <vector>

#include "rt/common.hpp"
#include "rt/em.hpp"
#include "rt/sampling.hpp"
#include "rt/scene.hpp"

namespace rt {

struct RadioMapConfig {
  std::size_t samples = 10000000;
  /// Samples per wedge for the diffraction estimator.
  std::size_t diffraction_samples = 100000;
  int max_depth = 3;
  /// Russian roulette starts once this many interactions happened; < 0 disables it.
  int rr_depth = -1;
  double rr_max_prob = 0.95;
  /// Segments whose gain falls below this are dropped (after rr_depth); 0 disables.
  double gain_threshold = 0.0;
  std::uint64_t seed = 42;
  /// Wedge search radius around the source; negative means the scene diameter.
  double wedge_radius = -1.0;
  InteractionMask enabled = InteractionMask::all();
  int workers = 1;

  void validate() const;
};

struct RadioMapDiagnostics {
  std::uint64_t samples = 0;
  std::uint64_t deposits = 0;
  std::uint64_t roulette_terminations = 0;
  std::uint64_t threshold_terminations = 0;
  std::uint64_t all_zero_terminations = 0;
  std::uint64_t wedges = 0;
  std::uint64_t diffraction_deposits = 0;
};

/// Linear channel gain per cell, indexed by MeasurementGrid::index.
struct RadioMap {
  int tx = 0;
  MeasurementGrid grid;
  std::vector<double> values;
  RadioMapDiagnostics diagnostics;

  double at(int i, int j) const { return values[grid.index(i, j)]; }
};

class NoIntersectionError : public Error {
 public:
  NoIntersectionError() : Error("diffracted ray is parallel to the measurement plane") {}
};

/// min(r^2 |E|^2, p_max).
double russian_roulette_probability(double r, const JonesField& e, double p_max);

/// alpha = u_A^T u_P for departure direction `dir`; an empty precoder means all ones.
cd precoding_scalar(const std::vector<Vec3>& global_offsets, const Eigen::VectorXcd& precoder, const Vec3& dir,
                    double wavelength);

/// Wedges within `radius` of the source with at least one of eight edge
/// probes visible from it.
std::vector<int> collect_wedges_near_source(const Scene& scene, const Vec3& source, double radius);

/// |dt/dx x dt/dphi| of the edge-to-plane map t(x, phi), by central differences.
double diffraction_weighting_factor(const Wedge& w, const Vec3& source, double x, double phi,
                                    const Vec3& plane_point, const Vec3& plane_normal);

/// Line-of-sight gain at every cell center.
std::vector<double> compute_radio_map_los(const Scene& scene, const RadioDevice& tx, const MeasurementGrid& grid);

/// Analytic line of sight plus the SBR estimator for depths 1..L without diffraction.
std::vector<double> compute_radio_map_sbr(const Scene& scene, const RadioDevice& tx, const MeasurementGrid& grid,
                                          const RadioMapConfig& cfg, RadioMapDiagnostics* diag = nullptr);

std::vector<double> compute_radio_map_diffraction(const Scene& scene, const RadioDevice& tx,
                                                  const MeasurementGrid& grid, const std::vector<int>& wedges,
                                                  const RadioMapConfig& cfg, RadioMapDiagnostics* diag = nullptr);

/// One map per transmitter, scaled by its power.
std::vector<RadioMap> compute_radio_map(const Scene& scene, const RadioMapConfig& cfg);

}  // namespace rt
