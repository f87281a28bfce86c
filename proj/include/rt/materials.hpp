#pragma once

#include <string>
#include <utility>

#include "rt/common.hpp"
#include "rt/em.hpp"
#include "rt/geometry.hpp"

namespace rt {

enum class ScatteringModel { Lambertian, Directive, Backscattering };

struct ScatteringPattern {
  ScatteringModel model = ScatteringModel::Lambertian;
  int alpha_r = 4;
  int alpha_i = 4;
  double lambda = 0.75;
};

struct RadioMaterial {
  std::string name = "vacuum";
  double eps_r = 1.0;
  double sigma = 0.0;
  double thickness = 0.0;
  /// Scattering coefficient S; the specular share is R = sqrt(1 - S^2).
  double scattering = 0.0;
  double xpd_kx = 0.0;
  ScatteringPattern pattern;
  bool random_phases = false;

  double reflection_reduction() const { return std::sqrt(1.0 - scattering * scattering); }
};

/// Built-in materials: vacuum, concrete, glass, metal. Throws ValidationError
/// for unknown names.
RadioMaterial material_preset(const std::string& name);
bool is_material_preset(const std::string& name);

struct FresnelSet {
  cd r_perp, r_par, t_perp, t_par;
};

enum class Polarization { Perp, Par };

cd complex_permittivity(double eps_r, double sigma, double frequency);

/// Complex square root on the branch with non-positive imaginary part.
cd decaying_sqrt(cd z);

/// Reflection/transmission for a wave incident from vacuum on a half space.
FresnelSet fresnel_vacuum(double cos_theta, cd eta);

/// Single-layer slab coefficients (r, t) for one polarization.
std::pair<cd, cd> slab_coefficients(double cos_theta, cd eta, double thickness, double wavelength,
                                    Polarization pol);

/// Both polarizations of the slab model for a material.
FresnelSet slab_fresnel(double cos_theta, const RadioMaterial& m, double frequency);

/// Perpendicular/parallel unit vectors of the plane of incidence for
/// propagation direction k on a surface with normal n. At normal incidence
/// e_perp is the unit vector orthogonal to k with the largest |x|.
struct IncidenceFrame {
  Vec3 e_perp, e_par;
};
IncidenceFrame incidence_frame(const Vec3& k, const Vec3& n);

/// Linear map between two transverse frames.
struct JonesTransform {
  Mat2c m = Mat2c::Identity();
  Vec3 in1, in2;
  Vec3 out1, out2;
  Vec3 k_out;

  JonesField apply(const JonesField& e) const;
};

/// Specular reflection off a surface with normal n (n . k_i < 0).
JonesTransform specular_transform(const Vec3& k_i, const Vec3& n, const RadioMaterial& m, double frequency);

/// Transmission through a slab; the direction is unchanged.
JonesTransform refraction_transform(const Vec3& k_i, const Vec3& n, const RadioMaterial& m, double frequency);

/// Normalized scattering density for incident k_i, outgoing k_s.
double scattering_pattern_eval(const ScatteringPattern& p, const Vec3& k_i, const Vec3& k_s, const Vec3& n);

/// Share of incident amplitude that is reflected (specular + diffuse).
double reflected_amplitude_ratio(const JonesField& e_in, const Vec3& n, const RadioMaterial& m, double frequency);

/// Diffusely scattered field toward k_s. `weight` is the surface-area
/// equivalent of the incident tube with the incident spreading folded out;
/// 1/distance is left to the caller. chi holds the two phase offsets.
JonesField diffuse_transform(const JonesField& e_in, const Vec3& k_s, const Vec3& n, const RadioMaterial& m,
                             double gamma, double weight, std::pair<double, double> chi = {0.0, 0.0});

/// Fresnel integrals (S(x), C(x)) with kernel sin/cos(pi t^2 / 2).
std::pair<double, double> fresnel_integrals(double x);

/// UTD transition function F(x) = 2j sqrt(x) e^{jx} int_{sqrt x}^inf e^{-jt^2} dt.
cd transition_function(double x);

/// Edge-fixed angles (phi', phi) of the incident and diffracted rays.
std::pair<double, double> wedge_angles(const Wedge& w, const Vec3& s_in, const Vec3& s_out);

/// Diffraction matrix mapping (phi', beta0') components of the incident
/// field to (phi, beta0) components of the diffracted field. Spreading and
/// propagation phase are not included.
JonesTransform utd_transfer(const Wedge& w, const Vec3& s_in, const Vec3& s_out, double s_prime, double s,
                            double wavelength, cd eta0, cd eta_n);

}  // namespace rt
