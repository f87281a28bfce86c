#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "rt/common.hpp"

namespace rt {

struct SphericalBasis {
  Vec3 r, theta, phi;
};

SphericalBasis spherical_basis(double theta, double phi);

/// (theta, phi) of a unit vector; theta = acos(z) with z clamped, phi via atan2.
std::pair<double, double> direction_angles(const Vec3& d);

/// R = Rz(yaw) Ry(pitch) Rx(roll).
Mat3 rotation_ypr(double yaw, double pitch, double roll);
inline Mat3 rotation_ypr(const Vec3& ypr) { return rotation_ypr(ypr.x(), ypr.y(), ypr.z()); }

/// Rotation taking unit vector a onto unit vector b.
Mat3 rodrigues_rotation(const Vec3& a, const Vec3& b);

/// W(a, b, q, r) = [[a.q, a.r], [b.q, b.r]]: re-expresses components given
/// in the (q, r) basis in the (a, b) basis.
Mat2 field_basis_change(const Vec3& a, const Vec3& b, const Vec3& q, const Vec3& r);

/// Transverse field given by two complex components on an explicit
/// orthonormal frame; k = e1 x e2 is the propagation direction.
struct JonesField {
  Vec2c c = Vec2c::Zero();
  Vec3 e1 = Vec3::UnitX();
  Vec3 e2 = Vec3::UnitY();
  Vec3 k = Vec3::UnitZ();

  cd c_theta() const { return c[0]; }
  cd c_phi() const { return c[1]; }
  Vec3c vector() const { return c[0] * e1.cast<cd>() + c[1] * e2.cast<cd>(); }
  double power() const { return c.squaredNorm(); }

  /// Components of this field on another frame (q, r) orthogonal to k.
  Vec2c in_basis(const Vec3& q, const Vec3& r) const { return field_basis_change(q, r, e1, e2).cast<cd>() * c; }
};

/// Field on the spherical (theta-hat, phi-hat) frame of direction d.
JonesField make_spherical_field(const Vec3& d, const Vec2c& c);

using PatternFunction = std::function<Vec2c(double theta, double phi)>;

struct AntennaPattern {
  std::string name = "iso";
  PatternFunction evaluate;
  /// yaw, pitch, roll in radians.
  Vec3 orientation = Vec3::Zero();
  double efficiency = 1.0;
};

/// Built-in element patterns. `slant` rotates the polarization from the
/// theta slot (0 = vertical) toward the phi slot (pi/2 = horizontal).
AntennaPattern isotropic_pattern(double slant = 0.0);
AntennaPattern dipole_pattern(double slant = 0.0);
AntennaPattern half_wave_dipole_pattern(double slant = 0.0);
AntennaPattern tr38901_pattern(double slant = 0.0);

/// Looks up a built-in pattern by name: iso, dipole, hw_dipole, tr38901.
AntennaPattern make_pattern(const std::string& name, double slant = 0.0);

/// Polarization slant angles for a polarization keyword: V, H, VH, cross.
std::vector<double> polarization_slants(const std::string& polarization);

/// Pattern value in the global frame for a departure/arrival direction d.
JonesField pattern_to_gcs(const AntennaPattern& pattern, const Vec3& d);

/// Integral of |C|^2 over the sphere (Gauss-Legendre 128 x trapezoid 256);
/// equals 4*pi*efficiency for a properly normalized pattern.
double pattern_normalization(const AntennaPattern& pattern);

struct ArrayGeometry {
  /// Element offsets relative to the array center in the device frame (m).
  std::vector<Vec3> offsets{Vec3::Zero()};
  std::size_t size() const { return offsets.size(); }
};

/// Uniform rectangular array in the device y-z plane, spacing in meters.
ArrayGeometry planar_array(int rows, int cols, double spacing_v, double spacing_h);

/// exp(j 2pi/lambda (+-k)^T d_i) for each element; `incoming` selects the
/// arrival sign. Offsets must already be in the global frame.
Eigen::VectorXcd array_response(const std::vector<Vec3>& offsets, const Vec3& direction, double wavelength,
                                bool incoming);

}  // namespace rt
