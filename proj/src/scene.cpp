#include "rt/scene.hpp"

#include <cmath>

namespace rt {

std::vector<AntennaPattern> RadioDevice::patterns() const {
  std::vector<AntennaPattern> out;
  for (double slant : polarization_slants(polarization)) {
    AntennaPattern p = make_pattern(pattern, slant);
    p.orientation = orientation;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Vec3> RadioDevice::global_offsets() const {
  const Mat3 r = rotation_ypr(orientation);
  std::vector<Vec3> out;
  out.reserve(offsets.size());
  for (const Vec3& d : offsets) out.push_back(r * d);
  return out;
}

Vec3 MeasurementGrid::cell_center(int i, int j) const {
  return center + ((i + 0.5) - 0.5 * nx) * cell_w * u + ((j + 0.5) - 0.5 * ny) * cell_h * v;
}

std::optional<std::pair<int, int>> MeasurementGrid::cell_lookup(const Vec3& p) const {
  const Vec3 d = p - center;
  if (std::abs(d.dot(n)) > 1e-6) return std::nullopt;
  const double a = d.dot(u) / cell_w + 0.5 * nx;
  const double b = d.dot(v) / cell_h + 0.5 * ny;
  if (a < 0.0 || b < 0.0 || a > nx || b > ny) return std::nullopt;
  const int i = std::min(static_cast<int>(std::floor(a)), nx - 1);
  const int j = std::min(static_cast<int>(std::floor(b)), ny - 1);
  return std::make_pair(i, j);
}

MeasurementGrid MeasurementGrid::make(const Vec3& center, const Vec3& normal, const Vec3& u_hint, double cell_w,
                                      double cell_h, int nx, int ny) {
  if (!(cell_w > 0.0) || !(cell_h > 0.0) || nx < 1 || ny < 1)
    throw ValidationError("measurement grid needs positive cell size and counts");
  MeasurementGrid g;
  g.center = center;
  g.n = normal.normalized();
  Vec3 u = u_hint - u_hint.dot(g.n) * g.n;
  if (u.norm() < 1e-9) throw ValidationError("grid u axis is parallel to the grid normal");
  g.u = u.normalized();
  g.v = g.n.cross(g.u);
  g.cell_w = cell_w;
  g.cell_h = cell_h;
  g.nx = nx;
  g.ny = ny;
  return g;
}

void Scene::finalize() {
  std::vector<Mesh> meshes;
  std::size_t count = 0;
  prim_offset_.assign(objects.size() + 1, 0);
  for (std::size_t o = 0; o < objects.size(); ++o) {
    objects[o].mesh.object_id = static_cast<int>(o);
    meshes.push_back(objects[o].mesh);
    prim_offset_[o] = count;
    count += objects[o].mesh.triangles.size();
  }
  prim_offset_[objects.size()] = count;
  accel_.reset();
  wedges_.clear();
  prim_wedges_.assign(count, {});
  if (count == 0) return;
  accel_.emplace(meshes);
  wedges_ = extract_wedges(meshes, dihedral_threshold_deg);
  for (std::size_t w = 0; w < wedges_.size(); ++w)
    for (const FaceRef& f : wedges_[w].owners) {
      auto& list = prim_wedges_[prim_offset_[f.object] + f.primitive];
      if (list.empty() || list.back() != static_cast<int>(w)) list.push_back(static_cast<int>(w));
    }
}

std::optional<Hit> Scene::intersect(const Ray& ray) const {
  if (!accel_) return std::nullopt;
  return accel_->intersect_closest(ray);
}

bool Scene::occluded(const Vec3& a, const Vec3& b) const { return accel_ && accel_->is_occluded(a, b); }

const std::vector<int>& Scene::primitive_wedges(int object, int primitive) const {
  return prim_wedges_[prim_offset_[object] + primitive];
}

double Scene::diameter() const {
  if (!accel_) return 0.0;
  return (accel_->bounds().hi - accel_->bounds().lo).norm();
}

}  // namespace rt
