#include "rt/em.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss.hpp>

namespace rt {

SphericalBasis spherical_basis(double theta, double phi) {
  const double st = std::sin(theta), ct = std::cos(theta);
  const double sp = std::sin(phi), cp = std::cos(phi);
  return {Vec3(st * cp, st * sp, ct), Vec3(ct * cp, ct * sp, -st), Vec3(-sp, cp, 0.0)};
}

std::pair<double, double> direction_angles(const Vec3& d) {
  const double theta = std::acos(std::clamp(d.z(), -1.0, 1.0));
  const double phi = std::atan2(d.y(), d.x());
  return {theta, phi};
}

Mat3 rotation_ypr(double yaw, double pitch, double roll) {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

Mat3 rodrigues_rotation(const Vec3& a, const Vec3& b) {
  const Vec3 axis = a.cross(b);
  const double s = axis.norm();
  const double c = std::clamp(a.dot(b), -1.0, 1.0);
  if (s < 1e-15) {
    if (c > 0.0) return Mat3::Identity();
    // Anti-parallel: half turn about any axis perpendicular to a.
    Vec3 p = a.cross(Vec3::UnitX());
    if (p.norm() < 1e-6) p = a.cross(Vec3::UnitY());
    p.normalize();
    return 2.0 * p * p.transpose() - Mat3::Identity();
  }
  const Vec3 k = axis / s;
  Mat3 K;
  K << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Mat3::Identity() + s * K + (1.0 - c) * K * K;
}

Mat2 field_basis_change(const Vec3& a, const Vec3& b, const Vec3& q, const Vec3& r) {
  Mat2 w;
  w << a.dot(q), a.dot(r), b.dot(q), b.dot(r);
  return w;
}

JonesField make_spherical_field(const Vec3& d, const Vec2c& c) {
  auto [theta, phi] = direction_angles(d);
  const SphericalBasis b = spherical_basis(theta, phi);
  return {c, b.theta, b.phi, d};
}

namespace {

Vec2c polarize(double amplitude, double slant) {
  return Vec2c(amplitude * std::cos(slant), amplitude * std::sin(slant));
}

}  // namespace

AntennaPattern isotropic_pattern(double slant) {
  return {"iso", [slant](double, double) { return polarize(1.0, slant); }, Vec3::Zero(), 1.0};
}

AntennaPattern dipole_pattern(double slant) {
  return {"dipole", [slant](double theta, double) { return polarize(std::sqrt(1.5) * std::sin(theta), slant); },
          Vec3::Zero(), 1.0};
}

AntennaPattern half_wave_dipole_pattern(double slant) {
  // Directivity 1.643 of the resonant dipole.
  return {"hw_dipole",
          [slant](double theta, double) {
            const double s = std::sin(theta);
            const double f = std::abs(s) < 1e-12 ? 0.0 : std::cos(0.5 * kPi * std::cos(theta)) / s;
            return polarize(std::sqrt(1.643) * f, slant);
          },
          Vec3::Zero(), 1.0};
}

AntennaPattern tr38901_pattern(double slant) {
  return {"tr38901",
          [slant](double theta, double phi) {
            const double td = theta * 180.0 / kPi;
            const double pd = std::remainder(phi, 2.0 * kPi) * 180.0 / kPi;
            const double av = -std::min(12.0 * std::pow((td - 90.0) / 65.0, 2), 30.0);
            const double ah = -std::min(12.0 * std::pow(pd / 65.0, 2), 30.0);
            const double a = -std::min(-(av + ah), 30.0);
            return polarize(std::sqrt(std::pow(10.0, (a + 8.0) / 10.0)), slant);
          },
          Vec3::Zero(), 1.0};
}

AntennaPattern make_pattern(const std::string& name, double slant) {
  if (name == "iso" || name == "isotropic") return isotropic_pattern(slant);
  if (name == "dipole") return dipole_pattern(slant);
  if (name == "hw_dipole") return half_wave_dipole_pattern(slant);
  if (name == "tr38901") return tr38901_pattern(slant);
  throw ValidationError("unknown antenna pattern '" + name + "'");
}

std::vector<double> polarization_slants(const std::string& polarization) {
  if (polarization == "V") return {0.0};
  if (polarization == "H") return {0.5 * kPi};
  if (polarization == "VH") return {0.0, 0.5 * kPi};
  if (polarization == "cross") return {-0.25 * kPi, 0.25 * kPi};
  throw ValidationError("unknown polarization '" + polarization + "'");
}

JonesField pattern_to_gcs(const AntennaPattern& pattern, const Vec3& d) {
  auto [theta, phi] = direction_angles(d);
  const SphericalBasis g = spherical_basis(theta, phi);
  if (pattern.orientation.isZero(0.0)) return {pattern.evaluate(theta, phi), g.theta, g.phi, d};
  const Mat3 R = rotation_ypr(pattern.orientation);
  const Vec3 local = R.transpose() * d;
  const double theta_l = std::acos(std::clamp(local.z(), -1.0, 1.0));
  const double phi_l = std::atan2(local.y(), local.x());
  const SphericalBasis l = spherical_basis(theta_l, phi_l);
  const Vec2c c_local = pattern.evaluate(theta_l, phi_l);
  const Mat2 m = field_basis_change(g.theta, g.phi, R * l.theta, R * l.phi);
  return {m.cast<cd>() * c_local, g.theta, g.phi, d};
}

double pattern_normalization(const AntennaPattern& pattern) {
  using Gauss = boost::math::quadrature::gauss<double, 128>;
  constexpr int kPhi = 256;
  return Gauss::integrate(
      [&](double theta) {
        double sum = 0.0;
        for (int j = 0; j < kPhi; ++j) {
          const double phi = 2.0 * kPi * j / kPhi;
          const Vec3 d = spherical_basis(theta, phi).r;
          sum += pattern_to_gcs(pattern, d).power();
        }
        return sum * (2.0 * kPi / kPhi) * std::sin(theta);
      },
      0.0, kPi);
}

ArrayGeometry planar_array(int rows, int cols, double spacing_v, double spacing_h) {
  ArrayGeometry g;
  g.offsets.clear();
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      g.offsets.emplace_back(0.0, (c - 0.5 * (cols - 1)) * spacing_h, (0.5 * (rows - 1) - r) * spacing_v);
  return g;
}

Eigen::VectorXcd array_response(const std::vector<Vec3>& offsets, const Vec3& direction, double wavelength,
                                bool incoming) {
  const double sign = incoming ? -1.0 : 1.0;
  Eigen::VectorXcd u(offsets.size());
  for (std::size_t i = 0; i < offsets.size(); ++i)
    u[i] = std::polar(1.0, 2.0 * kPi / wavelength * sign * direction.dot(offsets[i]));
  return u;
}

}  // namespace rt
