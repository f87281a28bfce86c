#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rt/common.hpp"

namespace rt {

/// Self-intersection offset applied to ray origins and segment ends (meters).
inline constexpr double kRayEpsilon = 1e-4;
inline constexpr double kMinTriangleArea = 1e-12;

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  int object_id = 0;
  std::string material;
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  double max_t = kInf;
};

struct Hit {
  double t = kInf;
  Vec3 point = Vec3::Zero();
  /// Geometric normal flipped toward the side the ray came from.
  Vec3 normal = Vec3::UnitZ();
  int object = -1;
  int primitive = -1;
  double u = 0.0;
  double v = 0.0;
};

class EmptySceneError : public Error {
 public:
  EmptySceneError() : Error("scene contains no triangles") {}
};

class NoWedgeError : public Error {
 public:
  NoWedgeError() : Error("primitive owns no wedge") {}
};

struct FaceRef {
  int object = -1;
  int primitive = -1;
  int local_edge = -1;
};

/// A diffracting edge. Angles are measured from the 0-face (n0) toward the
/// n-face (nn) through the exterior region of opening angle n*pi.
struct Wedge {
  Vec3 origin = Vec3::Zero();
  Vec3 edge = Vec3::UnitX();
  double length = 0.0;
  Vec3 n0 = Vec3::UnitZ();
  Vec3 nn = -Vec3::UnitZ();
  Vec3 t0 = Vec3::UnitY();
  double n = 2.0;
  /// Face 0 and (unless this is a screen) face n.
  std::array<FaceRef, 2> faces{};
  bool screen = true;
  /// Every primitive bordering the merged edge.
  std::vector<FaceRef> owners;

  Vec3 end() const { return origin + length * edge; }
  Vec3 point(double x) const { return origin + x * edge; }
};

struct Aabb {
  Vec3 lo = Vec3::Constant(kInf);
  Vec3 hi = Vec3::Constant(-kInf);

  void grow(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void grow(const Aabb& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  bool empty() const { return lo.x() > hi.x(); }
  double area() const {
    if (empty()) return 0.0;
    Vec3 d = hi - lo;
    return 2.0 * (d.x() * d.y() + d.y() * d.z() + d.z() * d.x());
  }
};

struct Triangle {
  Vec3 v0, v1, v2;
  Vec3 normal;  // unit, from the right-handed winding
  int object;
  int primitive;
};

/// Bounding volume hierarchy over all triangles of a scene. Immutable after
/// construction and safe to query from many threads.
class Accel {
 public:
  Accel() = default;
  explicit Accel(const std::vector<Mesh>& meshes);

  std::optional<Hit> intersect_closest(const Ray& ray) const;
  bool is_occluded(const Vec3& a, const Vec3& b) const;

  std::size_t primitive_count() const { return tris_.size(); }
  const Aabb& bounds() const { return bounds_; }
  const Triangle& triangle(int object, int primitive) const;
  const std::vector<Triangle>& triangles() const { return tris_; }

 private:
  struct Node {
    Aabb box;
    int first = 0;  // first primitive (leaf) or right child (inner)
    int count = 0;  // > 0 for leaves
  };

  int build(int begin, int end, std::vector<Vec3>& centroids);
  bool any_hit(const Vec3& o, const Vec3& d, double t_min, double t_max) const;

  std::vector<Triangle> tris_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  std::vector<int> object_offset_;  // object id -> first triangle index
  Aabb bounds_;
};

/// Throws EmptySceneError if no triangle is present.
Accel build_scene_accel(const std::vector<Mesh>& meshes);

/// Möller–Trumbore intersection; returns t (and barycentrics) when the ray
/// meets the triangle with t in (t_min, t_max).
bool intersect_triangle(const Triangle& tri, const Vec3& o, const Vec3& d, double t_min,
                        double t_max, double& t, double& u, double& v);

std::vector<Wedge> extract_wedges(const std::vector<Mesh>& meshes,
                                  double dihedral_threshold_deg = 1.0);

struct EdgeProjection {
  int wedge = -1;
  double x = 0.0;
  double distance = 0.0;
};

/// Picks, among `candidates` (indices into `wedges`), the edge nearest to
/// `point` and returns the clamped edge parameter.
EdgeProjection project_to_edge(const Vec3& point, const std::vector<Wedge>& wedges,
                               const std::vector<int>& candidates);

/// Closest point parameter of p on the segment of wedge w, clamped to [0, L].
double edge_parameter(const Wedge& w, const Vec3& p);

/// Distance from p to the segment [a, b].
double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b);

}  // namespace rt
