#include "rt/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace rt {

namespace {

constexpr int kLeafSize = 4;
constexpr int kBins = 16;

struct RayBox {
  Vec3 inv;
  // Returns the entry distance or +inf if the slab test fails.
  double enter(const Aabb& b, const Vec3& o, double t_max) const {
    double t0 = 0.0, t1 = t_max;
    for (int a = 0; a < 3; ++a) {
      double lo = (b.lo[a] - o[a]) * inv[a];
      double hi = (b.hi[a] - o[a]) * inv[a];
      if (lo > hi) std::swap(lo, hi);
      // fmax/fmin drop the NaN produced by 0 * inf on an axis-parallel ray.
      t0 = std::fmax(t0, lo);
      t1 = std::fmin(t1, hi);
    }
    return t0 <= t1 ? t0 : kInf;
  }
};

bool less_id(int o1, int m1, int o2, int m2) { return o1 < o2 || (o1 == o2 && m1 < m2); }

}  // namespace

bool intersect_triangle(const Triangle& tri, const Vec3& o, const Vec3& d, double t_min,
                        double t_max, double& t, double& u, double& v) {
  const Vec3 e1 = tri.v1 - tri.v0;
  const Vec3 e2 = tri.v2 - tri.v0;
  const Vec3 p = d.cross(e2);
  const double det = e1.dot(p);
  if (det == 0.0) return false;
  const double inv = 1.0 / det;
  const Vec3 s = o - tri.v0;
  u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 q = s.cross(e1);
  v = d.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return false;
  t = e2.dot(q) * inv;
  return t > t_min && t < t_max;
}

Accel::Accel(const std::vector<Mesh>& meshes) {
  int max_id = -1;
  for (const auto& m : meshes) max_id = std::max(max_id, m.object_id);
  object_offset_.assign(max_id + 1, -1);
  for (const auto& mesh : meshes) {
    object_offset_[mesh.object_id] = static_cast<int>(tris_.size());
    for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
      const auto& f = mesh.triangles[i];
      Triangle t;
      t.v0 = mesh.vertices.at(f[0]);
      t.v1 = mesh.vertices.at(f[1]);
      t.v2 = mesh.vertices.at(f[2]);
      Vec3 n = (t.v1 - t.v0).cross(t.v2 - t.v0);
      double len = n.norm();
      t.normal = len > 0 ? Vec3(n / len) : Vec3::UnitZ();
      t.object = mesh.object_id;
      t.primitive = static_cast<int>(i);
      tris_.push_back(t);
    }
  }
  if (tris_.empty()) return;
  order_.resize(tris_.size());
  std::iota(order_.begin(), order_.end(), 0);
  std::vector<Vec3> centroids(tris_.size());
  for (std::size_t i = 0; i < tris_.size(); ++i)
    centroids[i] = (tris_[i].v0 + tris_[i].v1 + tris_[i].v2) / 3.0;
  nodes_.reserve(2 * tris_.size());
  build(0, static_cast<int>(tris_.size()), centroids);
  bounds_ = nodes_[0].box;
}

int Accel::build(int begin, int end, std::vector<Vec3>& centroids) {
  const int index = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Aabb box, cbox;
  for (int i = begin; i < end; ++i) {
    const Triangle& t = tris_[order_[i]];
    box.grow(t.v0);
    box.grow(t.v1);
    box.grow(t.v2);
    cbox.grow(centroids[order_[i]]);
  }
  // Pad so that hits exactly on a (possibly flat) box face are never culled.
  const Vec3 pad = 1e-9 * (Vec3::Ones() + box.lo.cwiseAbs().cwiseMax(box.hi.cwiseAbs()));
  box.lo -= pad;
  box.hi += pad;
  nodes_[index].box = box;

  const int count = end - begin;
  if (count <= kLeafSize) {
    nodes_[index].first = begin;
    nodes_[index].count = count;
    return index;
  }

  int best_axis = -1, best_split = -1;
  double best_cost = kInf;
  const Vec3 extent = cbox.hi - cbox.lo;
  for (int axis = 0; axis < 3; ++axis) {
    if (extent[axis] <= 0.0) continue;
    Aabb bin_box[kBins];
    int bin_count[kBins] = {};
    const double scale = kBins / extent[axis];
    for (int i = begin; i < end; ++i) {
      int b = std::min(kBins - 1, static_cast<int>((centroids[order_[i]][axis] - cbox.lo[axis]) * scale));
      const Triangle& t = tris_[order_[i]];
      bin_box[b].grow(t.v0);
      bin_box[b].grow(t.v1);
      bin_box[b].grow(t.v2);
      ++bin_count[b];
    }
    double right_area[kBins];
    int right_count[kBins];
    Aabb acc;
    int n = 0;
    for (int b = kBins - 1; b > 0; --b) {
      acc.grow(bin_box[b]);
      n += bin_count[b];
      right_area[b] = acc.area();
      right_count[b] = n;
    }
    acc = Aabb{};
    n = 0;
    for (int b = 0; b < kBins - 1; ++b) {
      acc.grow(bin_box[b]);
      n += bin_count[b];
      if (n == 0 || right_count[b + 1] == 0) continue;
      double cost = acc.area() * n + right_area[b + 1] * right_count[b + 1];
      if (cost < best_cost) {
        best_cost = cost;
        best_axis = axis;
        best_split = b;
      }
    }
  }

  int mid;
  if (best_axis < 0) {
    mid = begin + count / 2;  // all centroids coincide
  } else {
    const double scale = kBins / extent[best_axis];
    auto it = std::partition(order_.begin() + begin, order_.begin() + end, [&](int i) {
      int b = std::min(kBins - 1, static_cast<int>((centroids[i][best_axis] - cbox.lo[best_axis]) * scale));
      return b <= best_split;
    });
    mid = static_cast<int>(it - order_.begin());
    if (mid == begin || mid == end) mid = begin + count / 2;
  }
  build(begin, mid, centroids);
  const int right = build(mid, end, centroids);
  nodes_[index].first = right;
  nodes_[index].count = 0;
  return index;
}

std::optional<Hit> Accel::intersect_closest(const Ray& ray) const {
  if (nodes_.empty()) return std::nullopt;
  const Vec3& o = ray.origin;
  const Vec3& d = ray.direction;
  RayBox rb{d.cwiseInverse()};
  double best_t = ray.max_t;
  int best = -1;
  double best_u = 0, best_v = 0;
  int stack[128];
  int sp = 0;
  stack[sp++] = 0;
  while (sp > 0) {
    const Node& node = nodes_[stack[--sp]];
    if (rb.enter(node.box, o, best_t) == kInf) continue;
    if (node.count > 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const int ti = order_[i];
        const Triangle& tri = tris_[ti];
        double t, u, v;
        // Inclusive bound once a hit exists so equal distances reach the tie rule.
        const double limit = best < 0 ? ray.max_t : std::nextafter(best_t, kInf);
        if (!intersect_triangle(tri, o, d, kRayEpsilon, limit, t, u, v)) continue;
        if (best < 0 || t < best_t ||
            less_id(tri.object, tri.primitive, tris_[best].object, tris_[best].primitive)) {
          best_t = t;
          best = ti;
          best_u = u;
          best_v = v;
        }
      }
    } else {
      const int left = static_cast<int>(&node - nodes_.data()) + 1;
      const int right = node.first;
      const double tl = rb.enter(nodes_[left].box, o, best_t);
      const double tr = rb.enter(nodes_[right].box, o, best_t);
      if (tl <= tr) {
        if (tr != kInf) stack[sp++] = right;
        if (tl != kInf) stack[sp++] = left;
      } else {
        if (tl != kInf) stack[sp++] = left;
        if (tr != kInf) stack[sp++] = right;
      }
    }
  }
  if (best < 0) return std::nullopt;
  const Triangle& tri = tris_[best];
  Hit h;
  h.t = best_t;
  h.point = o + best_t * d;
  h.normal = tri.normal.dot(d) > 0.0 ? Vec3(-tri.normal) : tri.normal;
  h.object = tri.object;
  h.primitive = tri.primitive;
  h.u = best_u;
  h.v = best_v;
  return h;
}

bool Accel::any_hit(const Vec3& o, const Vec3& d, double t_min, double t_max) const {
  if (nodes_.empty() || t_max <= t_min) return false;
  RayBox rb{d.cwiseInverse()};
  int stack[128];
  int sp = 0;
  stack[sp++] = 0;
  while (sp > 0) {
    const Node& node = nodes_[stack[--sp]];
    if (rb.enter(node.box, o, t_max) == kInf) continue;
    if (node.count > 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        double t, u, v;
        if (intersect_triangle(tris_[order_[i]], o, d, t_min, t_max, t, u, v)) return true;
      }
    } else {
      stack[sp++] = node.first;
      stack[sp++] = static_cast<int>(&node - nodes_.data()) + 1;
    }
  }
  return false;
}

bool Accel::is_occluded(const Vec3& a, const Vec3& b) const {
  Vec3 d = b - a;
  const double len = d.norm();
  if (len <= 2.0 * kRayEpsilon) return false;
  d /= len;
  return any_hit(a, d, kRayEpsilon, len - kRayEpsilon);
}

const Triangle& Accel::triangle(int object, int primitive) const {
  return tris_.at(object_offset_.at(object) + primitive);
}

Accel build_scene_accel(const std::vector<Mesh>& meshes) {
  std::size_t n = 0;
  for (const auto& m : meshes) n += m.triangles.size();
  if (n == 0) throw EmptySceneError();
  return Accel(meshes);
}

// ---------------------------------------------------------------------------
// Wedges

namespace {

using VKey = std::array<long long, 3>;

VKey vkey(const Vec3& p) {
  return {std::llround(p.x() * 1e7), std::llround(p.y() * 1e7), std::llround(p.z() * 1e7)};
}

struct EdgeUse {
  int object;
  int primitive;
  int local_edge;
  Vec3 a, b;      // endpoints in the face's winding order
  Vec3 opposite;  // third vertex of the face
  Vec3 normal;
};

// Frames of two raw segments are mergeable if they describe the same line
// with the same face planes.
bool same_frame(const Wedge& a, const Wedge& b) {
  if (std::abs(a.n - b.n) > 1e-9) return false;
  if (a.edge.dot(b.edge) < 1.0 - 1e-9) return false;
  if (a.n0.dot(b.n0) < 1.0 - 1e-6 || a.nn.dot(b.nn) < 1.0 - 1e-6) return false;
  const Vec3 d = b.origin - a.origin;
  return (d - d.dot(a.edge) * a.edge).norm() < 1e-6;
}

}  // namespace

std::vector<Wedge> extract_wedges(const std::vector<Mesh>& meshes, double dihedral_threshold_deg) {
  const double threshold = dihedral_threshold_deg * kPi / 180.0;
  std::map<std::pair<VKey, VKey>, std::vector<EdgeUse>> edges;
  for (const auto& mesh : meshes) {
    for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
      const auto& f = mesh.triangles[i];
      const Vec3 p[3] = {mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]};
      Vec3 n = (p[1] - p[0]).cross(p[2] - p[0]);
      if (n.norm() < 2.0 * kMinTriangleArea) continue;
      n.normalize();
      for (int e = 0; e < 3; ++e) {
        const Vec3& a = p[e];
        const Vec3& b = p[(e + 1) % 3];
        VKey ka = vkey(a), kb = vkey(b);
        auto key = ka < kb ? std::make_pair(ka, kb) : std::make_pair(kb, ka);
        edges[key].push_back({mesh.object_id, static_cast<int>(i), e, a, b, p[(e + 2) % 3], n});
      }
    }
  }

  std::vector<Wedge> raw;
  for (const auto& [key, uses] : edges) {
    Wedge w;
    if (uses.size() == 1) {
      const EdgeUse& f = uses[0];
      w.n0 = f.normal;
      w.nn = -f.normal;
      w.n = 2.0;
      w.screen = true;
      Vec3 e = (f.b - f.a).normalized();
      if (f.normal.cross(e).dot(f.opposite - f.a) < 0.0) e = -e;
      w.edge = e;
      w.faces = {FaceRef{f.object, f.primitive, f.local_edge}, FaceRef{}};
    } else if (uses.size() == 2) {
      const EdgeUse& fa = uses[0];
      const EdgeUse& fb = uses[1];
      // A consistently wound manifold traverses the shared edge in opposite
      // directions; anything else has no well-defined exterior.
      if ((fa.b - fa.a).dot(fb.b - fb.a) > 0.0) continue;
      const double c = std::clamp(fa.normal.dot(fb.normal), -1.0, 1.0);
      const double delta = std::acos(c);
      if (delta < threshold) continue;
      const bool convex = (fb.opposite - fa.a).dot(fa.normal) < 0.0;
      if (!convex) continue;
      w.n = 1.0 + delta / kPi;
      if (w.n > 2.0 - 1e-12) continue;  // folded back onto itself
      w.screen = false;
      w.n0 = fa.normal;
      w.nn = fb.normal;
      w.edge = fa.normal.cross(fb.normal).normalized();
      w.faces = {FaceRef{fa.object, fa.primitive, fa.local_edge}, FaceRef{fb.object, fb.primitive, fb.local_edge}};
    } else {
      continue;  // non-manifold edge
    }
    const EdgeUse& f = uses[0];
    w.t0 = w.n0.cross(w.edge);
    const bool forward = (f.b - f.a).dot(w.edge) > 0.0;
    w.origin = forward ? f.a : f.b;
    w.length = (f.b - f.a).norm();
    for (const auto& u : uses) w.owners.push_back({u.object, u.primitive, u.local_edge});
    raw.push_back(std::move(w));
  }

  // Merge collinear segments of one logical edge via union-find over shared
  // endpoints.
  std::vector<int> parent(raw.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  std::map<VKey, std::vector<int>> by_endpoint;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    by_endpoint[vkey(raw[i].origin)].push_back(static_cast<int>(i));
    by_endpoint[vkey(raw[i].end())].push_back(static_cast<int>(i));
  }
  for (const auto& [k, ids] : by_endpoint) {
    for (std::size_t a = 0; a < ids.size(); ++a)
      for (std::size_t b = a + 1; b < ids.size(); ++b)
        if (same_frame(raw[ids[a]], raw[ids[b]])) parent[find(ids[a])] = find(ids[b]);
  }
  std::map<int, std::vector<int>> groups;
  for (std::size_t i = 0; i < raw.size(); ++i) groups[find(static_cast<int>(i))].push_back(static_cast<int>(i));

  std::vector<Wedge> out;
  for (const auto& [root, ids] : groups) {
    Wedge w = raw[ids[0]];
    const Vec3 base = w.origin;
    double lo = 0.0, hi = w.length;
    std::vector<FaceRef> owners = w.owners;
    for (std::size_t j = 1; j < ids.size(); ++j) {
      const Wedge& r = raw[ids[j]];
      const double s0 = (r.origin - base).dot(w.edge);
      lo = std::min(lo, s0);
      hi = std::max(hi, s0 + r.length);
      owners.insert(owners.end(), r.owners.begin(), r.owners.end());
    }
    w.origin = base + lo * w.edge;
    w.length = hi - lo;
    w.owners = std::move(owners);
    out.push_back(std::move(w));
  }
  return out;
}

double edge_parameter(const Wedge& w, const Vec3& p) {
  return std::clamp((p - w.origin).dot(w.edge), 0.0, w.length);
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  double s = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + s * ab)).norm();
}

EdgeProjection project_to_edge(const Vec3& point, const std::vector<Wedge>& wedges,
                               const std::vector<int>& candidates) {
  if (candidates.empty()) throw NoWedgeError();
  EdgeProjection best;
  best.distance = kInf;
  for (int id : candidates) {
    const Wedge& w = wedges[id];
    const double x = edge_parameter(w, point);
    const double dist = (point - w.point(x)).norm();
    if (dist < best.distance) {
      best = {id, x, dist};
    }
  }
  return best;
}

}  // namespace rt
