#include <cmath>

#include "rt/materials.hpp"
#include "rt/path_solver.hpp"

namespace rt {

double solve_first_order_diffraction_point(const Vec3& s_in, const Vec3& t_in, const Vec3& o, const Vec3& e_in) {
  const Vec3 e = e_in.normalized();
  const Vec3 s = s_in - o;
  const Vec3 t = t_in - o;
  const Vec3 s_perp = s - e.dot(s) * e;
  const Vec3 t_perp = t - e.dot(t) * e;
  const double rho_s = s_perp.norm();
  const double rho_t = t_perp.norm();
  if (rho_s < 1e-12 || rho_t < 1e-12) throw ValidationError("source or target lies on the edge line");
  const Vec3 u1 = s_perp / rho_s;
  // Rotating t about the edge onto the far side of the source half-plane
  // leaves the path length unchanged.
  const Vec3 t_rot = e.dot(t) * e - rho_t * u1;
  const Vec3 st = t_rot - s;
  const Vec3 a = e.cross(st);
  const Vec3 b = s.cross(st);
  const double an = a.norm();
  if (an < 1e-15) throw ValidationError("degenerate diffraction geometry");
  const double sign = a.dot(b) >= 0.0 ? 1.0 : -1.0;
  return sign * b.norm() / an;
}

namespace {

Vec3 mirror_point(const Vec3& p, const Triangle& plane) {
  return p - 2.0 * (p - plane.v0).dot(plane.normal) * plane.normal;
}

Vec3 mirror_vector(const Vec3& d, const Triangle& plane) { return d - 2.0 * d.dot(plane.normal) * plane.normal; }

bool coplanar(const Triangle& a, const Triangle& b) {
  const double c = a.normal.dot(b.normal);
  if (std::abs(c) < 1.0 - 1e-6) return false;
  return std::abs(a.normal.dot(b.v0) - a.normal.dot(a.v0)) < 1e-6;
}

struct Walker {
  const Scene& scene;
  bool allow_transmission;
  /// Crossings in path order (source to target) collected per segment.
  std::vector<InteractionStep> crossings;

  /// Collects every surface crossed strictly between `from` and `from + dist * d`.
  bool open_segment(const Vec3& from, const Vec3& d, double dist) {
    double travelled = 0.0;
    Vec3 origin = from;
    while (true) {
      const double remaining = dist - travelled - kRayEpsilon;
      if (remaining <= kRayEpsilon) return true;
      const auto hit = scene.intersect(Ray{origin, d, remaining});
      if (!hit) return true;
      if (!add_crossing(*hit, d)) return false;
      travelled += hit->t;
      origin = hit->point;
    }
  }

  /// Walks from `from` along d to the plane of `target` at distance t_plane.
  /// Returns false on a miss or a forbidden crossing; `miss` tells which.
  bool to_plane(const Vec3& from, const Vec3& d, double t_plane, const Triangle& target, bool& miss) {
    const double tol = 1e-7 + 1e-9 * t_plane;
    double travelled = 0.0;
    Vec3 origin = from;
    miss = false;
    while (true) {
      const auto hit = scene.intersect(Ray{origin, d, t_plane - travelled + tol});
      if (!hit) {
        miss = true;
        return false;
      }
      const double t_abs = travelled + hit->t;
      if (t_abs >= t_plane - tol) {
        if (coplanar(scene.triangle(hit->object, hit->primitive), target)) return true;
      } else if (!add_crossing(*hit, d)) {
        return false;
      }
      travelled = t_abs;
      origin = hit->point;
    }
  }

  bool add_crossing(const Hit& h, const Vec3& d) {
    if (!allow_transmission) return false;
    InteractionStep st;
    st.type = Interaction::Transmission;
    st.object = h.object;
    st.primitive = h.primitive;
    st.vertex = h.point;
    // Backtracking runs against propagation: the incident side is along +d.
    st.normal = h.normal.dot(d) > 0.0 ? Vec3(h.normal) : Vec3(-h.normal);
    crossings.push_back(st);
    return true;
  }
};

RefineResult reject(RejectReason r) { return {std::nullopt, r}; }

}  // namespace

RefineResult refine_candidate(const CandidateRecord& c, const Scene& scene, const Vec3& source, const Vec3& target,
                              InteractionMask enabled, int max_depth) {
  const Vec3 anchor = c.ell_d > 0 ? c.steps[c.ell_d - 1].vertex : source;

  std::vector<InteractionStep> suffix;
  for (int i = c.ell_d; i < c.depth(); ++i)
    if (c.steps[i].type == Interaction::Reflection || c.steps[i].type == Interaction::Diffraction)
      suffix.push_back(c.steps[i]);
  const int m = static_cast<int>(suffix.size());

  int i_d = -1;
  for (int i = 0; i < m; ++i)
    if (suffix[i].type == Interaction::Diffraction) i_d = i;

  std::vector<Triangle> planes(m);
  for (int i = 0; i < m; ++i)
    if (suffix[i].type == Interaction::Reflection) planes[i] = scene.triangle(suffix[i].object, suffix[i].primitive);

  // images[i]: anchor mirrored through suffix planes 0..i.
  std::vector<Vec3> images(m);
  Vec3 img = anchor;
  for (int i = 0; i < m; ++i) {
    if (suffix[i].type == Interaction::Reflection) img = mirror_point(img, planes[i]);
    images[i] = img;
  }

  // Diffraction point and its intermediate images.
  std::vector<Vec3> aims = images;
  double x_edge = 0.0;
  if (i_d >= 0) {
    const Wedge& w = scene.wedges()[suffix[i_d].wedge];
    Vec3 o = w.origin, e = w.edge;
    std::vector<std::pair<Vec3, Vec3>> edge_images(m);
    edge_images[i_d] = {o, e};
    for (int i = i_d + 1; i < m; ++i) {
      if (suffix[i].type == Interaction::Reflection) {
        o = mirror_point(o, planes[i]);
        e = mirror_vector(e, planes[i]);
      }
      edge_images[i] = {o, e};
    }
    try {
      x_edge = solve_first_order_diffraction_point(img, target, o, e);
    } catch (const ValidationError&) {
      return reject(RejectReason::Degenerate);
    }
    if (!std::isfinite(x_edge) || x_edge < 0.0 || x_edge > w.length) return reject(RejectReason::OffEdge);
    for (int i = i_d; i < m; ++i) aims[i] = edge_images[i].first + x_edge * edge_images[i].second;
  }

  // Backtracking from the target; every segment is built in reverse order.
  Walker walker{scene, enabled.has(Interaction::Transmission), {}};
  std::vector<InteractionStep> reversed;  // target to anchor order
  Vec3 cur = target;
  for (int i = m - 1; i >= 0; --i) {
    InteractionStep st = suffix[i];
    if (st.type == Interaction::Diffraction) {
      const Wedge& w = scene.wedges()[st.wedge];
      st.vertex = w.point(x_edge);
      st.normal = w.n0;
      const Vec3 seg = st.vertex - cur;
      const double dist = seg.norm();
      if (dist < 1e-9) return reject(RejectReason::Degenerate);
      if (!walker.open_segment(cur, seg / dist, dist)) return reject(RejectReason::Occluded);
    } else {
      Vec3 d = aims[i] - cur;
      if (d.norm() < 1e-12) return reject(RejectReason::Degenerate);
      d.normalize();
      const Triangle& pl = planes[i];
      const double denom = d.dot(pl.normal);
      if (std::abs(denom) < 1e-12) return reject(RejectReason::CoplanarMiss);
      const double t_plane = (pl.v0 - cur).dot(pl.normal) / denom;
      if (!(t_plane > kRayEpsilon)) return reject(RejectReason::CoplanarMiss);
      bool miss = false;
      if (!walker.to_plane(cur, d, t_plane, pl, miss))
        return reject(miss ? RejectReason::CoplanarMiss : RejectReason::Occluded);
      st.vertex = cur + t_plane * d;
      st.normal = pl.normal;
    }
    for (auto& x : walker.crossings) reversed.push_back(x);
    walker.crossings.clear();
    st.probability = suffix[i].probability;
    reversed.push_back(st);
    cur = st.vertex;
  }
  {
    const Vec3 seg = anchor - cur;
    const double dist = seg.norm();
    if (dist < 1e-9) return reject(RejectReason::Degenerate);
    if (!walker.open_segment(cur, seg / dist, dist)) return reject(RejectReason::Occluded);
    for (auto& x : walker.crossings) reversed.push_back(x);
  }

  ValidPath p;
  p.source = c.source;
  p.target = c.target;
  p.source_point = source;
  p.target_point = target;
  p.hash = c.hash;
  p.steps.assign(c.steps.begin(), c.steps.begin() + c.ell_d);
  p.steps.insert(p.steps.end(), reversed.rbegin(), reversed.rend());
  if (p.depth() > max_depth) return reject(RejectReason::MaxDepth);

  // Reflections need both neighbours on one side; normals face the incident side.
  for (int l = c.ell_d + 1; l <= p.depth(); ++l) {
    InteractionStep& st = p.steps[l - 1];
    const Vec3 prev = p.vertex(l - 1);
    const Vec3 next = p.vertex(l + 1);
    if (st.type == Interaction::Reflection) {
      const double a = (prev - st.vertex).dot(st.normal);
      const double b = (next - st.vertex).dot(st.normal);
      if (a * b <= 0.0) return reject(RejectReason::Occluded);
      if (a < 0.0) st.normal = -st.normal;
    } else if (st.type == Interaction::Diffraction) {
      const Wedge& w = scene.wedges()[st.wedge];
      const Vec3 s_in = (st.vertex - prev).normalized();
      const Vec3 s_out = (next - st.vertex).normalized();
      const auto [phi_in, phi_out] = wedge_angles(w, s_in, s_out);
      const double lim = w.n * kPi + 1e-9;
      if (phi_in > lim || phi_out > lim) return reject(RejectReason::Occluded);
    }
  }
  return {std::move(p), RejectReason::Degenerate};
}

}  // namespace rt
