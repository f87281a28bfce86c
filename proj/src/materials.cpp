#include "rt/materials.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/binomial.hpp>

namespace rt {

namespace {

constexpr cd kJ(0.0, 1.0);

}  // namespace

RadioMaterial material_preset(const std::string& name) {
  RadioMaterial m;
  m.name = name;
  if (name == "vacuum") return m;
  if (name == "concrete") {
    m.eps_r = 5.24;
    m.sigma = 0.123;
    m.thickness = 0.2;
    return m;
  }
  if (name == "glass") {
    m.eps_r = 6.31;
    m.sigma = 0.0193;
    m.thickness = 0.01;
    return m;
  }
  if (name == "metal") {
    m.eps_r = 1.0;
    m.sigma = 1e7;
    m.thickness = 0.1;
    return m;
  }
  throw ValidationError("unknown material preset '" + name + "'");
}

bool is_material_preset(const std::string& name) {
  return name == "vacuum" || name == "concrete" || name == "glass" || name == "metal";
}

cd complex_permittivity(double eps_r, double sigma, double frequency) {
  return {eps_r, -sigma / (kVacuumPermittivity * 2.0 * kPi * frequency)};
}

cd decaying_sqrt(cd z) {
  cd r = std::sqrt(z);
  if (r.imag() > 0.0) r = -r;
  return r;
}

FresnelSet fresnel_vacuum(double cos_theta, cd eta) {
  cos_theta = std::clamp(cos_theta, 0.0, 1.0);
  const double sin2 = 1.0 - cos_theta * cos_theta;
  if (eta.imag() == 0.0 && sin2 >= eta.real()) return {1.0, 1.0, 0.0, 0.0};
  const cd root = decaying_sqrt(eta - sin2);
  const cd r_perp = (cos_theta - root) / (cos_theta + root);
  const cd r_par = (eta * cos_theta - root) / (eta * cos_theta + root);
  const cd t_perp = 2.0 * cos_theta / (cos_theta + root);
  const cd t_par = 2.0 * decaying_sqrt(eta) * cos_theta / (eta * cos_theta + root);
  return {r_perp, r_par, t_perp, t_par};
}

std::pair<cd, cd> slab_coefficients(double cos_theta, cd eta, double thickness, double wavelength,
                                    Polarization pol) {
  if (thickness <= 0.0) return {0.0, 1.0};
  cos_theta = std::clamp(cos_theta, 0.0, 1.0);
  const FresnelSet f = fresnel_vacuum(cos_theta, eta);
  const cd rp = pol == Polarization::Perp ? f.r_perp : f.r_par;
  const double sin2 = 1.0 - cos_theta * cos_theta;
  const cd q = 2.0 * kPi * thickness / wavelength * decaying_sqrt(eta - sin2);
  const cd e1 = std::exp(-kJ * q);
  const cd e2 = e1 * e1;
  const cd den = 1.0 - rp * rp * e2;
  if (std::abs(den) < 1e-300) return {rp, 0.0};
  return {rp * (1.0 - e2) / den, (1.0 - rp * rp) * e1 / den};
}

FresnelSet slab_fresnel(double cos_theta, const RadioMaterial& m, double frequency) {
  const cd eta = complex_permittivity(m.eps_r, m.sigma, frequency);
  const double lambda = kSpeedOfLight / frequency;
  auto [r_s, t_s] = slab_coefficients(cos_theta, eta, m.thickness, lambda, Polarization::Perp);
  auto [r_p, t_p] = slab_coefficients(cos_theta, eta, m.thickness, lambda, Polarization::Par);
  return {r_s, r_p, t_s, t_p};
}

IncidenceFrame incidence_frame(const Vec3& k, const Vec3& n) {
  Vec3 perp = k.cross(n);
  if (perp.norm() < 1e-12) {
    perp = Vec3::UnitX() - k.x() * k;
    if (perp.norm() < 1e-6) perp = Vec3::UnitY() - k.y() * k;
  }
  perp.normalize();
  return {perp, perp.cross(k)};
}

JonesField JonesTransform::apply(const JonesField& e) const {
  const Vec2c local = e.in_basis(in1, in2);
  return {m * local, out1, out2, k_out};
}

JonesTransform specular_transform(const Vec3& k_i, const Vec3& n, const RadioMaterial& m, double frequency) {
  const double cos_theta = -k_i.dot(n);
  const Vec3 k_r = (k_i - 2.0 * k_i.dot(n) * n).normalized();
  const IncidenceFrame in = incidence_frame(k_i, n);
  const Vec3 out_par = in.e_perp.cross(k_r).normalized();
  const FresnelSet f = slab_fresnel(cos_theta, m, frequency);
  const double red = m.reflection_reduction();
  JonesTransform t;
  t.m << red * f.r_perp, 0.0, 0.0, red * f.r_par;
  t.in1 = in.e_perp;
  t.in2 = in.e_par;
  t.out1 = in.e_perp;
  t.out2 = out_par;
  t.k_out = k_r;
  return t;
}

JonesTransform refraction_transform(const Vec3& k_i, const Vec3& n, const RadioMaterial& m, double frequency) {
  const double cos_theta = -k_i.dot(n);
  const IncidenceFrame in = incidence_frame(k_i, n);
  const FresnelSet f = slab_fresnel(cos_theta, m, frequency);
  JonesTransform t;
  t.m << f.t_perp, 0.0, 0.0, f.t_par;
  t.in1 = t.out1 = in.e_perp;
  t.in2 = t.out2 = in.e_par;
  t.k_out = k_i;
  return t;
}

namespace {

// Hemispherical integral of ((1 + cos(angle to a lobe axis at polar angle
// theta_i)) / 2)^alpha.
double lobe_normalization(int alpha, double cos_theta_i) {
  const double sin_theta_i = std::sqrt(std::max(0.0, 1.0 - cos_theta_i * cos_theta_i));
  double total = 0.0;
  for (int k = 0; k <= alpha; ++k) {
    double ik = 2.0 * kPi / (k + 1);
    if (k % 2 == 1) {
      double sum = 0.0;
      for (int w = 0; w <= (k - 1) / 2; ++w)
        sum += boost::math::binomial_coefficient<double>(2 * w, w) * std::pow(sin_theta_i, 2 * w) /
               std::pow(2.0, 2 * w);
      ik *= cos_theta_i * sum;
    }
    total += boost::math::binomial_coefficient<double>(alpha, k) * ik;
  }
  return total / std::pow(2.0, alpha);
}

}  // namespace

double scattering_pattern_eval(const ScatteringPattern& p, const Vec3& k_i, const Vec3& k_s, const Vec3& n) {
  const double cos_s = k_s.dot(n);
  if (cos_s <= 0.0) return 0.0;
  const double cos_i = -k_i.dot(n);
  const Vec3 k_r = k_i - 2.0 * k_i.dot(n) * n;
  switch (p.model) {
    case ScatteringModel::Lambertian:
      return cos_s / kPi;
    case ScatteringModel::Directive:
      return std::pow(0.5 * (1.0 + k_r.dot(k_s)), p.alpha_r) / lobe_normalization(p.alpha_r, cos_i);
    case ScatteringModel::Backscattering: {
      const double num = p.lambda * std::pow(0.5 * (1.0 + k_r.dot(k_s)), p.alpha_r) +
                         (1.0 - p.lambda) * std::pow(0.5 * (1.0 - k_i.dot(k_s)), p.alpha_i);
      const double den =
          p.lambda * lobe_normalization(p.alpha_r, cos_i) + (1.0 - p.lambda) * lobe_normalization(p.alpha_i, cos_i);
      return num / den;
    }
  }
  return 0.0;
}

double reflected_amplitude_ratio(const JonesField& e_in, const Vec3& n, const RadioMaterial& m, double frequency) {
  const double norm = std::sqrt(e_in.power());
  if (norm == 0.0) return 0.0;
  const IncidenceFrame f = incidence_frame(e_in.k, n);
  const Vec2c c = e_in.in_basis(f.e_perp, f.e_par);
  const FresnelSet r = slab_fresnel(-e_in.k.dot(n), m, frequency);
  return std::sqrt(std::norm(r.r_perp * c[0]) + std::norm(r.r_par * c[1])) / norm;
}

JonesField diffuse_transform(const JonesField& e_in, const Vec3& k_s, const Vec3& n, const RadioMaterial& m,
                             double gamma, double weight, std::pair<double, double> chi) {
  const Vec3& k_i = e_in.k;
  const double cos_i = std::max(0.0, -k_i.dot(n));
  const double fs = scattering_pattern_eval(m.pattern, k_i, k_s, n);
  const double scale = m.scattering * gamma * std::sqrt(fs * cos_i * weight);
  const double kx = m.xpd_kx;
  const cd p1 = std::polar(1.0, chi.first), p2 = std::polar(1.0, chi.second);
  Mat2c x;
  x << std::sqrt(1.0 - kx) * p1, -std::sqrt(kx) * p1, std::sqrt(kx) * p2, std::sqrt(1.0 - kx) * p2;
  auto [theta_i, phi_i] = direction_angles(k_i);
  const SphericalBasis bi = spherical_basis(theta_i, phi_i);
  const Vec2c c_in = e_in.in_basis(bi.theta, bi.phi);
  JonesField out = make_spherical_field(k_s, Vec2c::Zero());
  out.c = scale * (x * c_in);
  return out;
}

std::pair<double, double> fresnel_integrals(double x) {
  const double ax = std::abs(x);
  double s = 0.0, c = 0.0;
  if (ax < 1.5) {
    const double a = 0.5 * kPi * ax * ax;
    double p = ax;  // a^k / k! * x
    for (int k = 0; k < 200; ++k) {
      const double term = p / (2 * k + 1);
      const double sign = ((k / 2) % 2 == 0) ? 1.0 : -1.0;
      if (k % 2 == 0)
        c += sign * term;
      else
        s += sign * term;
      if (k > 2 && term < 1e-18) break;
      p *= a / (k + 1);
    }
  } else {
    // Modified Lentz evaluation of the continued fraction for erfc.
    const double pix2 = kPi * ax * ax;
    cd b(1.0, -pix2);
    cd cc = 1e300;
    cd d = 1.0 / b;
    cd h = d;
    int n = -1;
    for (int k = 2; k < 1000; ++k) {
      n += 2;
      const double a = -static_cast<double>(n) * (n + 1);
      b += 4.0;
      d = 1.0 / (a * d + b);
      cc = b + a / cc;
      const cd del = cc * d;
      h *= del;
      if (std::abs(del.real() - 1.0) + std::abs(del.imag()) < 1e-16) break;
    }
    h *= cd(ax, -ax);
    const cd cs = cd(0.5, 0.5) * (1.0 - std::polar(1.0, 0.5 * pix2) * h);
    c = cs.real();
    s = cs.imag();
  }
  if (x < 0.0) {
    s = -s;
    c = -c;
  }
  return {s, c};
}

cd transition_function(double x) {
  if (x <= 0.0) return 0.0;
  const auto [s, c] = fresnel_integrals(std::sqrt(2.0 * x / kPi));
  return std::sqrt(kPi * x / 2.0) * std::exp(kJ * x) * (cd(1.0, 1.0) - 2.0 * cd(s, c));
}

std::pair<double, double> wedge_angles(const Wedge& w, const Vec3& s_in, const Vec3& s_out) {
  const Vec3& e = w.edge;
  const Vec3 st_in = (s_in - s_in.dot(e) * e).normalized();
  const Vec3 st_out = (s_out - s_out.dot(e) * e).normalized();
  auto sgn = [](double v) { return v >= 0.0 ? 1.0 : -1.0; };
  const double phi_in =
      kPi - (kPi - std::acos(std::clamp(-st_in.dot(w.t0), -1.0, 1.0))) * sgn(-st_in.dot(w.n0));
  const double phi_out = kPi - (kPi - std::acos(std::clamp(st_out.dot(w.t0), -1.0, 1.0))) * sgn(st_out.dot(w.n0));
  return {phi_in, phi_out};
}

namespace {

// cot((pi + sign*beta) / 2n) * F(kL a^{sign}(beta)), with the small-argument
// limit near the poles of the cotangent.
cd cot_f(double beta, int sign, double n, double kl) {
  const double N = std::round((beta + sign * kPi) / (2.0 * n * kPi));
  const double eps = sign > 0 ? kPi + beta - 2.0 * n * kPi * N : kPi - beta + 2.0 * n * kPi * N;
  const cd e4 = std::polar(1.0, 0.25 * kPi);
  if (std::abs(eps) < 1e-6) {
    const double sg = eps >= 0.0 ? 1.0 : -1.0;
    return n * (std::sqrt(2.0 * kPi * kl) * sg - 2.0 * kl * eps * e4) * e4;
  }
  const double arg = (kPi + sign * beta) / (2.0 * n);
  const double a = 2.0 * std::pow(std::cos((2.0 * n * kPi * N - beta) / 2.0), 2);
  return std::cos(arg) / std::sin(arg) * transition_function(kl * a);
}

Mat2c face_reflection(const Vec3& s_in, const Vec3& s_out, const Vec3& face_normal, double cos_r, cd eta,
                      const Vec3& phi_in_hat, const Vec3& beta_in_hat, const Vec3& phi_out_hat,
                      const Vec3& beta_out_hat) {
  const IncidenceFrame f = incidence_frame(s_in, face_normal);
  Vec3 r_par = f.e_perp.cross(s_out);
  r_par = r_par.norm() > 1e-12 ? Vec3(r_par.normalized()) : f.e_par;
  const FresnelSet fr = fresnel_vacuum(cos_r, eta);
  Mat2c r;
  r << fr.r_perp, 0.0, 0.0, fr.r_par;
  const Mat2 w_out = field_basis_change(phi_out_hat, beta_out_hat, f.e_perp, r_par);
  const Mat2 w_in = field_basis_change(f.e_perp, f.e_par, phi_in_hat, beta_in_hat);
  return w_out.cast<cd>() * r * w_in.cast<cd>();
}

}  // namespace

JonesTransform utd_transfer(const Wedge& w, const Vec3& s_in, const Vec3& s_out, double s_prime, double s,
                            double wavelength, cd eta0, cd eta_n) {
  const Vec3& e = w.edge;
  const double sin_beta = s_out.cross(e).norm();
  if (sin_beta < 1e-9 || s_in.cross(e).norm() < 1e-9) throw ValidationError("degenerate diffraction geometry");
  const double n = w.n;
  const double k = 2.0 * kPi / wavelength;

  const Vec3 phi_in_hat = s_in.cross(e).normalized();
  const Vec3 beta_in_hat = phi_in_hat.cross(s_in);
  const Vec3 phi_out_hat = (-s_out.cross(e)).normalized();
  const Vec3 beta_out_hat = phi_out_hat.cross(s_out);

  const auto [phi_i, phi_d] = wedge_angles(w, s_in, s_out);
  const double L = s * s_prime / (s + s_prime) * sin_beta * sin_beta;
  const double kl = k * L;
  const cd pref = -std::polar(1.0, -0.25 * kPi) / (2.0 * n * std::sqrt(2.0 * kPi * k) * sin_beta);
  const cd d1 = pref * cot_f(phi_d - phi_i, +1, n, kl);
  const cd d2 = pref * cot_f(phi_d - phi_i, -1, n, kl);
  const cd d3 = pref * cot_f(phi_d + phi_i, +1, n, kl);
  const cd d4 = pref * cot_f(phi_d + phi_i, -1, n, kl);

  const Mat2c r0 = face_reflection(s_in, s_out, w.n0, std::abs(std::sin(phi_i)), eta0, phi_in_hat, beta_in_hat,
                                   phi_out_hat, beta_out_hat);
  const Mat2c rn = face_reflection(s_in, s_out, w.nn, std::abs(std::sin(n * kPi - phi_d)), eta_n, phi_in_hat,
                                   beta_in_hat, phi_out_hat, beta_out_hat);

  JonesTransform t;
  t.m = -((d1 + d2) * Mat2c::Identity() - d3 * rn - d4 * r0);
  t.in1 = phi_in_hat;
  t.in2 = beta_in_hat;
  t.out1 = phi_out_hat;
  t.out2 = beta_out_hat;
  t.k_out = s_out;
  return t;
}

}  // namespace rt
