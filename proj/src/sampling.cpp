#include "rt/sampling.hpp"

#include <cmath>
#include <sstream>

namespace rt {

char interaction_letter(Interaction t) {
  switch (t) {
    case Interaction::Reflection:
      return 'R';
    case Interaction::Scattering:
      return 'S';
    case Interaction::Transmission:
      return 'T';
    case Interaction::Diffraction:
      return 'D';
  }
  return '?';
}

InteractionMask parse_interaction_list(const std::string& list) {
  InteractionMask m = InteractionMask::none();
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item == "refl")
      m = m.with(Interaction::Reflection);
    else if (item == "scat")
      m = m.with(Interaction::Scattering);
    else if (item == "trans")
      m = m.with(Interaction::Transmission);
    else if (item == "diffr")
      m = m.with(Interaction::Diffraction);
    else
      throw ValidationError("unknown interaction type '" + item + "'");
  }
  return m;
}

namespace {

// SplitMix64 finalizer.
std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t sample, std::uint32_t depth, RngPurpose purpose) {
  std::uint64_t k = mix(seed);
  k = mix(k ^ sample);
  k = mix(k ^ (static_cast<std::uint64_t>(depth) << 32 | static_cast<std::uint32_t>(purpose)));
  key_ = k;
}

std::uint64_t RngStream::next_u64() { return mix(key_ ^ mix(counter_++)); }

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

Vec3 fibonacci_direction(std::size_t n, std::size_t count) {
  const double golden = 0.5 * (1.0 + std::sqrt(5.0));
  const long long i = static_cast<long long>(n) - static_cast<long long>(count / 2);
  const double theta = std::acos(std::clamp(2.0 * static_cast<double>(i) / static_cast<double>(count), -1.0, 1.0));
  const double phi = 2.0 * kPi * static_cast<double>(i) / golden;
  const double st = std::sin(theta);
  return {st * std::cos(phi), st * std::sin(phi), std::cos(theta)};
}

std::vector<Vec3> fibonacci_directions(std::size_t count) {
  std::vector<Vec3> out(count);
  for (std::size_t n = 0; n < count; ++n) out[n] = fibonacci_direction(n, count);
  return out;
}

namespace {

InteractionDistribution finish(std::array<double, 4> q, InteractionMask enabled) {
  for (int i = 0; i < 4; ++i)
    if (!enabled.has(static_cast<Interaction>(i))) q[i] = 0.0;
  const double sum = q[0] + q[1] + q[2] + q[3];
  if (!(sum > 0.0)) throw AllZeroError();
  for (double& v : q) v /= sum;
  return {q};
}

}  // namespace

InteractionDistribution interaction_probabilities(double reflected, double transmitted, double scattering,
                                                  double q_diffraction, InteractionMask enabled) {
  const double total = reflected + transmitted;
  const double rest = 1.0 - q_diffraction;
  std::array<double, 4> q{};
  if (total > 0.0) {
    const double s2 = scattering * scattering;
    q[0] = rest * (1.0 - s2) * reflected / total;
    q[1] = rest * s2 * reflected / total;
    q[2] = rest * transmitted / total;
  }
  q[3] = q_diffraction;
  return finish(q, enabled);
}

InteractionDistribution uniform_interaction_probabilities(double q_diffraction, InteractionMask enabled) {
  int k = 0;
  for (int i = 0; i < 3; ++i) k += enabled.has(static_cast<Interaction>(i)) ? 1 : 0;
  std::array<double, 4> q{};
  for (int i = 0; i < 3; ++i) q[i] = k > 0 ? (1.0 - q_diffraction) / k : 0.0;
  q[3] = q_diffraction;
  return finish(q, enabled);
}

Interaction sample_discrete(RngStream& rng, const InteractionDistribution& dist) {
  const double u = rng.uniform();
  double acc = 0.0;
  int last = -1;
  for (int i = 0; i < 4; ++i) {
    if (dist.q[i] <= 0.0) continue;
    last = i;
    acc += dist.q[i];
    if (u < acc) return static_cast<Interaction>(i);
  }
  return static_cast<Interaction>(last < 0 ? 0 : last);
}

void orthonormal_basis(const Vec3& n, Vec3& u, Vec3& v) {
  // Duff et al., "Building an orthonormal basis, revisited".
  const double sign = std::copysign(1.0, n.z());
  const double a = -1.0 / (sign + n.z());
  const double b = n.x() * n.y() * a;
  u = Vec3(1.0 + sign * n.x() * n.x() * a, sign * b, -sign * n.x());
  v = Vec3(b, sign + n.y() * n.y() * a, -n.y());
}

Vec3 sample_hemisphere(RngStream& rng, const Vec3& n) {
  // z uniform on (0, 1] lifted from a uniform azimuth is area-uniform on the
  // hemisphere.
  const double z = 1.0 - rng.uniform();
  const double phi = 2.0 * kPi * rng.uniform();
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  Vec3 u, v;
  orthonormal_basis(n, u, v);
  return (r * std::cos(phi) * u + r * std::sin(phi) * v + z * n).normalized();
}

Vec3 keller_direction(double beta0, double phi, const Vec3& t, const Vec3& n, const Vec3& e) {
  const double sb = std::sin(beta0);
  return sb * std::cos(phi) * t + sb * std::sin(phi) * n + std::cos(beta0) * e;
}

}  // namespace rt
