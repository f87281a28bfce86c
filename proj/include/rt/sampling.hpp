#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rt/common.hpp"

namespace rt {

enum class Interaction : std::uint8_t { Reflection = 0, Scattering = 1, Transmission = 2, Diffraction = 3 };

char interaction_letter(Interaction t);

/// Bit set over the four interaction types.
struct InteractionMask {
  std::uint8_t bits = 0xF;

  static InteractionMask all() { return {0xF}; }
  static InteractionMask none() { return {0}; }
  bool has(Interaction t) const { return bits & (1u << static_cast<int>(t)); }
  InteractionMask with(Interaction t) const { return {static_cast<std::uint8_t>(bits | (1u << static_cast<int>(t)))}; }
  InteractionMask without(Interaction t) const {
    return {static_cast<std::uint8_t>(bits & ~(1u << static_cast<int>(t)))};
  }
};

/// Parses a comma list of refl, scat, trans, diffr.
InteractionMask parse_interaction_list(const std::string& list);

enum class RngPurpose : std::uint32_t { Interaction = 1, Hemisphere = 2, Keller = 3, Phase = 4, Roulette = 5, Edge = 6 };

/// Counter-based stream: the draws depend only on (seed, sample, depth,
/// purpose) and the position within the stream, never on scheduling.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t sample, std::uint32_t depth, RngPurpose purpose);

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Direction n of a spherical Fibonacci lattice with N points, n in [0, N).
Vec3 fibonacci_direction(std::size_t n, std::size_t count);
std::vector<Vec3> fibonacci_directions(std::size_t count);

struct InteractionDistribution {
  std::array<double, 4> q{};  // indexed by Interaction

  double operator[](Interaction t) const { return q[static_cast<int>(t)]; }
};

class AllZeroError : public Error {
 public:
  AllZeroError() : Error("all interaction probabilities vanish") {}
};

/// Distribution over (R, S, T, D) from reflected and transmitted power
/// magnitudes (|r_perp|^2 + |r_par|^2 and |t_perp|^2 + |t_par|^2).
InteractionDistribution interaction_probabilities(double reflected, double transmitted, double scattering,
                                                  double q_diffraction, InteractionMask enabled);

/// Equal share for every enabled type except diffraction, which keeps q_D.
InteractionDistribution uniform_interaction_probabilities(double q_diffraction, InteractionMask enabled);

Interaction sample_discrete(RngStream& rng, const InteractionDistribution& dist);

/// Uniform direction on the hemisphere around n (density 1 / 2pi).
Vec3 sample_hemisphere(RngStream& rng, const Vec3& n);

/// sin(b) cos(phi) t + sin(b) sin(phi) n + cos(b) e.
Vec3 keller_direction(double beta0, double phi, const Vec3& t, const Vec3& n, const Vec3& e);

/// Orthonormal (u, v) completing n to a right-handed frame.
void orthonormal_basis(const Vec3& n, Vec3& u, Vec3& v);

}  // namespace rt
