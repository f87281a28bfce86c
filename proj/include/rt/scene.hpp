#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rt/common.hpp"
#include "rt/em.hpp"
#include "rt/geometry.hpp"
#include "rt/materials.hpp"

namespace rt {

struct SceneObject {
  std::string name;
  Mesh mesh;
  int material = 0;
  Vec3 velocity = Vec3::Zero();
};

/// A transmitter or receiver. Ports are enumerated element-major:
/// port = element * polarizations + polarization.
struct RadioDevice {
  std::string name;
  Vec3 position = Vec3::Zero();
  /// yaw, pitch, roll in radians.
  Vec3 orientation = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  std::string pattern = "iso";
  std::string polarization = "V";
  /// Element offsets in the device frame; a single element at the origin by default.
  std::vector<Vec3> offsets{Vec3::Zero()};
  double power = 1.0;
  /// Radio-map precoder over transmit elements; empty means uniform 1.
  Eigen::VectorXcd precoder;

  int polarizations() const { return static_cast<int>(polarization_slants(polarization).size()); }
  int elements() const { return static_cast<int>(offsets.size()); }
  int ports() const { return elements() * polarizations(); }
  /// Element patterns, one per polarization slot, already oriented.
  std::vector<AntennaPattern> patterns() const;
  /// Element offsets rotated into the global frame.
  std::vector<Vec3> global_offsets() const;
};

/// Planar grid of measurement cells. Cell (i, j) spans
/// center + (i - nx/2 .. i + 1 - nx/2) * cell_w * u + (j - ny/2 ..) * cell_h * v.
struct MeasurementGrid {
  Vec3 center = Vec3::Zero();
  Vec3 u = Vec3::UnitX();
  Vec3 v = Vec3::UnitY();
  Vec3 n = Vec3::UnitZ();
  double cell_w = 1.0;
  double cell_h = 1.0;
  int nx = 1;
  int ny = 1;

  double cell_area() const { return cell_w * cell_h; }
  int cells() const { return nx * ny; }
  int index(int i, int j) const { return j * nx + i; }
  Vec3 cell_center(int i, int j) const;
  /// Cell containing a point of the grid plane (floor rule, upper edges
  /// clamped into the last cell); nullopt outside the rectangle or off-plane.
  std::optional<std::pair<int, int>> cell_lookup(const Vec3& p) const;
  /// Grid from a center, an in-plane u axis hint and a normal.
  static MeasurementGrid make(const Vec3& center, const Vec3& normal, const Vec3& u_hint, double cell_w,
                              double cell_h, int nx, int ny);
};

class Scene {
 public:
  double frequency = 3.5e9;
  std::vector<RadioMaterial> materials;
  std::vector<SceneObject> objects;
  std::vector<RadioDevice> transmitters;
  std::vector<RadioDevice> receivers;
  std::optional<MeasurementGrid> grid;
  double dihedral_threshold_deg = 1.0;
  std::vector<std::string> warnings;

  double wavelength() const { return kSpeedOfLight / frequency; }

  /// Builds the acceleration structure and wedge tables. Must be called
  /// after geometry changes and before any query.
  void finalize();

  bool empty() const { return !accel_; }
  std::optional<Hit> intersect(const Ray& ray) const;
  bool occluded(const Vec3& a, const Vec3& b) const;
  const Triangle& triangle(int object, int primitive) const { return accel_->triangle(object, primitive); }
  std::size_t triangle_count() const { return accel_ ? accel_->primitive_count() : 0; }
  const RadioMaterial& material_of(int object) const { return materials[objects[object].material]; }

  const std::vector<Wedge>& wedges() const { return wedges_; }
  /// Wedges bordering primitive (object, primitive).
  const std::vector<int>& primitive_wedges(int object, int primitive) const;
  /// Bounding-box diagonal, 0 for an empty scene.
  double diameter() const;

 private:
  std::optional<Accel> accel_;
  std::vector<Wedge> wedges_;
  std::vector<std::size_t> prim_offset_;
  std::vector<std::vector<int>> prim_wedges_;
};

}  // namespace rt
