#include "rt/scene_io.hpp"

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "rt/geometry.hpp"
#include "rt/materials.hpp"

namespace rt {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_angle(const std::string& text) {
  std::string s = text;
  double scale = 1.0;
  auto strip = [&](const std::string& suffix) {
    if (s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
      s.resize(s.size() - suffix.size());
      return true;
    }
    return false;
  };
  if (strip("deg"))
    scale = kPi / 180.0;
  else
    strip("rad");
  while (!s.empty() && s.back() == ' ') s.pop_back();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ParseError("angle", "cannot parse '" + text + "'");
  return v * scale;
}

// ---------------------------------------------------------------------------
// OBJ

ObjMesh parse_mesh_obj(const std::string& text, const std::string& origin) {
  ObjMesh out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto where = [&] { return origin + ":" + std::to_string(lineno); };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    ls.imbue(std::locale::classic());
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw ParseError(where(), "vertex needs three coordinates");
      out.mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        const std::string head = tok.substr(0, tok.find('/'));
        int i = 0;
        const auto res = std::from_chars(head.data(), head.data() + head.size(), i);
        if (res.ec != std::errc() || res.ptr != head.data() + head.size() || i == 0)
          throw ParseError(where(), "bad face index '" + tok + "'");
        const int nv = static_cast<int>(out.mesh.vertices.size());
        const int k = i > 0 ? i - 1 : nv + i;
        if (k < 0 || k >= nv) throw ParseError(where(), "face index " + std::to_string(i) + " out of range");
        idx.push_back(k);
      }
      if (idx.size() < 3) throw ParseError(where(), "face needs at least three vertices");
      for (std::size_t j = 1; j + 1 < idx.size(); ++j) out.mesh.triangles.push_back({idx[0], idx[j], idx[j + 1]});
    }
    // Other records (vn, vt, o, g, s, usemtl, ...) carry nothing we use.
  }

  std::map<std::pair<int, int>, int> edge_use;
  for (const auto& t : out.mesh.triangles)
    for (int e = 0; e < 3; ++e) {
      const int a = t[e], b = t[(e + 1) % 3];
      ++edge_use[{std::min(a, b), std::max(a, b)}];
    }
  int non_manifold = 0;
  for (const auto& [e, n] : edge_use) non_manifold += n > 2 ? 1 : 0;
  if (non_manifold > 0)
    out.warnings.push_back(origin + ": " + std::to_string(non_manifold) + " non-manifold edge(s)");
  return out;
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << data;
  if (!f) throw IoError("write failed for " + path);
}

}  // namespace

ObjMesh load_mesh_obj(const std::string& path) {
  if (!fs::exists(path)) throw MissingMeshError(path);
  return parse_mesh_obj(read_file(path), path);
}

// ---------------------------------------------------------------------------
// Scene

namespace {

Vec3 get_vec3(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) throw ParseError(field, "expected an array of three numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ParseError(field, "expected a number");
    v[i] = j[i].get<double>();
  }
  return v;
}

double get_angle(const json& j, const std::string& field) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    try {
      return parse_angle(j.get<std::string>());
    } catch (const ParseError&) {
      throw ParseError(field, "cannot parse angle '" + j.get<std::string>() + "'");
    }
  }
  throw ParseError(field, "expected an angle");
}

Vec3 get_angles(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) throw ParseError(field, "expected three angles");
  return {get_angle(j[0], field), get_angle(j[1], field), get_angle(j[2], field)};
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& field) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(field + "." + key, "wrong type");
  }
}

RadioMaterial parse_material(const std::string& name, const json& j) {
  const std::string field = "materials." + name;
  if (!j.is_object()) throw ParseError(field, "expected an object");
  RadioMaterial m;
  if (j.contains("preset")) m = material_preset(get_or<std::string>(j, "preset", "", field));
  m.name = name;
  m.eps_r = get_or(j, "eps_r", m.eps_r, field);
  m.sigma = get_or(j, "sigma", m.sigma, field);
  m.thickness = get_or(j, "thickness", m.thickness, field);
  m.scattering = get_or(j, "scattering", m.scattering, field);
  m.xpd_kx = get_or(j, "xpd_kx", m.xpd_kx, field);
  m.random_phases = get_or(j, "random_phases", m.random_phases, field);
  if (j.contains("pattern")) {
    const json& p = j["pattern"];
    const std::string model = get_or<std::string>(p, "model", "lambertian", field + ".pattern");
    if (model == "lambertian")
      m.pattern.model = ScatteringModel::Lambertian;
    else if (model == "directive")
      m.pattern.model = ScatteringModel::Directive;
    else if (model == "backscattering")
      m.pattern.model = ScatteringModel::Backscattering;
    else
      throw ParseError(field + ".pattern.model", "unknown model '" + model + "'");
    m.pattern.alpha_r = get_or(p, "alpha_r", m.pattern.alpha_r, field + ".pattern");
    m.pattern.alpha_i = get_or(p, "alpha_i", m.pattern.alpha_i, field + ".pattern");
    m.pattern.lambda = get_or(p, "lambda", m.pattern.lambda, field + ".pattern");
  }
  if (m.eps_r < 1.0 || m.sigma < 0.0 || m.thickness < 0.0) throw ParseError(field, "non-physical material values");
  if (m.scattering < 0.0 || m.scattering > 1.0) throw ParseError(field + ".scattering", "must lie in [0, 1]");
  if (m.xpd_kx < 0.0 || m.xpd_kx > 1.0) throw ParseError(field + ".xpd_kx", "must lie in [0, 1]");
  return m;
}

RadioDevice parse_device(const json& j, const std::string& field) {
  if (!j.is_object()) throw ParseError(field, "expected an object");
  RadioDevice d;
  d.name = get_or<std::string>(j, "name", field, field);
  if (!j.contains("position")) throw ParseError(field + ".position", "missing");
  d.position = get_vec3(j["position"], field + ".position");
  if (j.contains("orientation")) d.orientation = get_angles(j["orientation"], field + ".orientation");
  if (j.contains("velocity")) d.velocity = get_vec3(j["velocity"], field + ".velocity");
  d.pattern = get_or<std::string>(j, "pattern", d.pattern, field);
  d.polarization = get_or<std::string>(j, "polarization", d.polarization, field);
  try {
    make_pattern(d.pattern);
    polarization_slants(d.polarization);
  } catch (const ValidationError& e) {
    throw ParseError(field, e.what());
  }
  d.power = get_or(j, "power", d.power, field);
  if (!(d.power >= 0.0)) throw ParseError(field + ".power", "must be non-negative");
  if (j.contains("offsets")) {
    d.offsets.clear();
    for (const auto& o : j["offsets"]) d.offsets.push_back(get_vec3(o, field + ".offsets"));
    if (d.offsets.empty()) throw ParseError(field + ".offsets", "empty");
  } else if (j.contains("array")) {
    const json& a = j["array"];
    const int rows = get_or(a, "rows", 1, field + ".array");
    const int cols = get_or(a, "cols", 1, field + ".array");
    const double sv = get_or(a, "spacing_v", 0.0, field + ".array");
    const double sh = get_or(a, "spacing_h", 0.0, field + ".array");
    if (rows < 1 || cols < 1) throw ParseError(field + ".array", "rows and cols must be positive");
    d.offsets = planar_array(rows, cols, sv, sh).offsets;
  }
  if (j.contains("precoder")) {
    const json& p = j["precoder"];
    d.precoder.resize(static_cast<Eigen::Index>(p.size()));
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i].is_number())
        d.precoder[i] = p[i].get<double>();
      else if (p[i].is_array() && p[i].size() == 2)
        d.precoder[i] = cd(p[i][0].get<double>(), p[i][1].get<double>());
      else
        throw ParseError(field + ".precoder", "entries are numbers or [re, im] pairs");
    }
    if (d.precoder.size() != d.elements()) throw ParseError(field + ".precoder", "length must equal the element count");
  }
  return d;
}

Mesh inline_mesh(const json& j, const std::string& field) {
  Mesh m;
  for (const auto& v : j.at("vertices")) m.vertices.push_back(get_vec3(v, field + ".vertices"));
  const int nv = static_cast<int>(m.vertices.size());
  for (const auto& f : j.at("faces")) {
    if (!f.is_array() || f.size() < 3) throw ParseError(field + ".faces", "faces need at least three indices");
    std::vector<int> idx;
    for (const auto& i : f) {
      const int k = i.get<int>();
      if (k < 0 || k >= nv) throw ParseError(field + ".faces", "index " + std::to_string(k) + " out of range");
      idx.push_back(k);
    }
    for (std::size_t q = 1; q + 1 < idx.size(); ++q) m.triangles.push_back({idx[0], idx[q], idx[q + 1]});
  }
  return m;
}

// Removes zero-area triangles; returns how many were dropped.
int drop_degenerate(Mesh& m) {
  std::vector<std::array<int, 3>> kept;
  for (const auto& t : m.triangles) {
    const Vec3 c = (m.vertices[t[1]] - m.vertices[t[0]]).cross(m.vertices[t[2]] - m.vertices[t[0]]);
    if (0.5 * c.norm() > kMinTriangleArea) kept.push_back(t);
  }
  const int dropped = static_cast<int>(m.triangles.size() - kept.size());
  m.triangles = std::move(kept);
  return dropped;
}

}  // namespace

Scene parse_scene(const std::string& text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("scene", e.what());
  }
  if (!doc.is_object()) throw ParseError("scene", "top level must be an object");
  const int version = get_or(doc, "format_version", 0, "scene");
  if (version != 1) throw ParseError("format_version", "unsupported version " + std::to_string(version));

  Scene s;
  if (!doc.contains("frequency")) throw ParseError("frequency", "missing");
  s.frequency = get_or(doc, "frequency", 0.0, "scene");
  if (!(s.frequency > 0.0)) throw ParseError("frequency", "must be positive");
  if (doc.contains("dihedral_threshold")) s.dihedral_threshold_deg = get_angle(doc["dihedral_threshold"], "dihedral_threshold") * 180.0 / kPi;

  std::map<std::string, int> mat_index;
  if (doc.contains("materials")) {
    if (!doc["materials"].is_object()) throw ParseError("materials", "expected an object");
    for (const auto& [name, j] : doc["materials"].items()) {
      mat_index[name] = static_cast<int>(s.materials.size());
      s.materials.push_back(parse_material(name, j));
    }
  }
  auto resolve = [&](const std::string& name) {
    if (auto it = mat_index.find(name); it != mat_index.end()) return it->second;
    if (!is_material_preset(name)) throw UnresolvedMaterialError(name);
    mat_index[name] = static_cast<int>(s.materials.size());
    s.materials.push_back(material_preset(name));
    return mat_index[name];
  };

  if (doc.contains("objects")) {
    int i = 0;
    for (const auto& j : doc["objects"]) {
      const std::string field = "objects[" + std::to_string(i++) + "]";
      SceneObject o;
      o.name = get_or<std::string>(j, "name", field, field);
      if (!j.contains("material")) throw ParseError(field + ".material", "missing");
      o.material = resolve(get_or<std::string>(j, "material", "", field));
      if (j.contains("velocity")) o.velocity = get_vec3(j["velocity"], field + ".velocity");
      if (j.contains("mesh")) {
        const fs::path p = fs::path(base_dir) / get_or<std::string>(j, "mesh", "", field);
        ObjMesh om = load_mesh_obj(p.string());
        o.mesh = std::move(om.mesh);
        for (auto& w : om.warnings) s.warnings.push_back(std::move(w));
      } else if (j.contains("vertices") && j.contains("faces")) {
        try {
          o.mesh = inline_mesh(j, field);
        } catch (const json::exception& e) {
          throw ParseError(field, e.what());
        }
      } else {
        throw ParseError(field, "needs either 'mesh' or 'vertices' and 'faces'");
      }
      o.mesh.material = s.materials[o.material].name;
      if (const int dropped = drop_degenerate(o.mesh); dropped > 0)
        s.warnings.push_back(o.name + ": dropped " + std::to_string(dropped) + " degenerate triangle(s)");
      s.objects.push_back(std::move(o));
    }
  }

  auto devices = [&](const char* key, std::vector<RadioDevice>& out) {
    if (!doc.contains(key)) return;
    int i = 0;
    for (const auto& j : doc[key]) out.push_back(parse_device(j, std::string(key) + "[" + std::to_string(i++) + "]"));
  };
  devices("transmitters", s.transmitters);
  devices("receivers", s.receivers);

  if (doc.contains("grid")) {
    const json& g = doc["grid"];
    const Vec3 center = get_vec3(g.at("center"), "grid.center");
    const Vec3 normal = g.contains("normal") ? get_vec3(g["normal"], "grid.normal") : Vec3::UnitZ();
    const Vec3 u = g.contains("u") ? get_vec3(g["u"], "grid.u") : Vec3::UnitX();
    const json& cs = g.at("cell_size");
    const json& cells = g.at("cells");
    if (!cs.is_array() || cs.size() != 2 || !cells.is_array() || cells.size() != 2)
      throw ParseError("grid", "cell_size and cells are two-element arrays");
    try {
      s.grid = MeasurementGrid::make(center, normal, u, cs[0].get<double>(), cs[1].get<double>(), cells[0].get<int>(),
                                     cells[1].get<int>());
    } catch (const ValidationError& e) {
      throw ParseError("grid", e.what());
    }
  }
  s.finalize();
  return s;
}

Scene load_scene(const std::string& path) {
  if (!fs::exists(path)) throw IoError("scene file not found: " + path);
  return parse_scene(read_file(path), fs::path(path).parent_path().string());
}

void save_scene(const Scene& scene, const std::string& path) {
  json doc;
  doc["format_version"] = 1;
  doc["frequency"] = scene.frequency;
  doc["dihedral_threshold"] = format_double(scene.dihedral_threshold_deg) + "deg";
  json mats = json::object();
  for (const auto& m : scene.materials) {
    static const char* models[] = {"lambertian", "directive", "backscattering"};
    mats[m.name] = {{"eps_r", m.eps_r},
                    {"sigma", m.sigma},
                    {"thickness", m.thickness},
                    {"scattering", m.scattering},
                    {"xpd_kx", m.xpd_kx},
                    {"random_phases", m.random_phases},
                    {"pattern",
                     {{"model", models[static_cast<int>(m.pattern.model)]},
                      {"alpha_r", m.pattern.alpha_r},
                      {"alpha_i", m.pattern.alpha_i},
                      {"lambda", m.pattern.lambda}}}};
  }
  doc["materials"] = mats;
  auto vec = [](const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); };
  json objs = json::array();
  for (const auto& o : scene.objects) {
    json verts = json::array(), faces = json::array();
    for (const auto& v : o.mesh.vertices) verts.push_back(vec(v));
    for (const auto& t : o.mesh.triangles) faces.push_back({t[0], t[1], t[2]});
    objs.push_back({{"name", o.name},
                    {"material", scene.materials[o.material].name},
                    {"velocity", vec(o.velocity)},
                    {"vertices", verts},
                    {"faces", faces}});
  }
  doc["objects"] = objs;
  auto devs = [&](const std::vector<RadioDevice>& list) {
    json out = json::array();
    for (const auto& d : list) {
      json offs = json::array();
      for (const auto& o : d.offsets) offs.push_back(vec(o));
      json j = {{"name", d.name},         {"position", vec(d.position)}, {"orientation", vec(d.orientation)},
                {"velocity", vec(d.velocity)}, {"pattern", d.pattern},   {"polarization", d.polarization},
                {"power", d.power},       {"offsets", offs}};
      if (d.precoder.size() > 0) {
        json p = json::array();
        for (Eigen::Index i = 0; i < d.precoder.size(); ++i) p.push_back({d.precoder[i].real(), d.precoder[i].imag()});
        j["precoder"] = p;
      }
      out.push_back(j);
    }
    return out;
  };
  doc["transmitters"] = devs(scene.transmitters);
  doc["receivers"] = devs(scene.receivers);
  if (scene.grid) {
    const auto& g = *scene.grid;
    doc["grid"] = {{"center", vec(g.center)},
                   {"normal", vec(g.n)},
                   {"u", vec(g.u)},
                   {"cell_size", {g.cell_w, g.cell_h}},
                   {"cells", {g.nx, g.ny}}};
  }
  write_file(path, doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Results

void write_paths(const PathSet& set, const std::string& path, PathFormat format) {
  if (format == PathFormat::Csv) {
    std::string out = "tx,rx,depth,interactions,re_a,im_a,tau,doppler,theta_t,phi_t,theta_r,phi_r\n";
    for (const PathRecord& p : set.paths) {
      const ValidPath& g = p.geometry;
      const auto [tt, pt] = direction_angles(g.direction(0));
      const auto [tr, pr] = direction_angles(-g.direction(g.depth()));
      for (Eigen::Index r = 0; r < p.a.rows(); ++r)
        for (Eigen::Index c = 0; c < p.a.cols(); ++c) {
          out += std::to_string(p.tx) + ',' + std::to_string(p.rx) + ',' + std::to_string(g.depth()) + ",\"" +
                 g.interaction_string() + "\"," + format_double(p.a(r, c).real()) + ',' +
                 format_double(p.a(r, c).imag()) + ',' + format_double(p.tau) + ',' + format_double(p.doppler) +
                 ',' + format_double(tt) + ',' + format_double(pt) + ',' + format_double(tr) + ',' +
                 format_double(pr) + '\n';
        }
    }
    write_file(path, out);
    return;
  }
  json arr = json::array();
  for (const PathRecord& p : set.paths) {
    const ValidPath& g = p.geometry;
    const auto [tt, pt] = direction_angles(g.direction(0));
    const auto [tr, pr] = direction_angles(-g.direction(g.depth()));
    json a = json::array();
    for (Eigen::Index r = 0; r < p.a.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < p.a.cols(); ++c) row.push_back({p.a(r, c).real(), p.a(r, c).imag()});
      a.push_back(row);
    }
    json verts = json::array();
    for (int i = 0; i <= g.depth() + 1; ++i) {
      const Vec3 v = g.vertex(i);
      verts.push_back({v.x(), v.y(), v.z()});
    }
    arr.push_back({{"tx", p.tx},
                   {"rx", p.rx},
                   {"tx_element", p.tx_element},
                   {"rx_element", p.rx_element},
                   {"rx_port_offset", p.rx_port_offset},
                   {"tx_port_offset", p.tx_port_offset},
                   {"depth", g.depth()},
                   {"interactions", g.interaction_string()},
                   {"a", a},
                   {"tau", p.tau},
                   {"doppler", p.doppler},
                   {"theta_t", tt},
                   {"phi_t", pt},
                   {"theta_r", tr},
                   {"phi_r", pr},
                   {"vertices", verts}});
  }
  write_file(path, json{{"paths", arr}}.dump(2) + "\n");
}

void write_radio_map(const RadioMap& map, const std::string& path, MapFormat format, PgmRange range) {
  const MeasurementGrid& g = map.grid;
  if (format == MapFormat::Csv) {
    std::string out;
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) {
        if (i) out += ',';
        out += format_double(map.at(i, j));
      }
      out += '\n';
    }
    write_file(path, out);
    return;
  }
  if (!(range.ceil_db > range.floor_db)) throw ValidationError("PGM ceiling must exceed the floor");
  std::string out = "P5\n# dB range [" + format_double(range.floor_db) + ", " + format_double(range.ceil_db) +
                    "] mapped to [0, 65535]\n" + std::to_string(g.nx) + " " + std::to_string(g.ny) + "\n65535\n";
  // Image rows run top to bottom, so the highest v row comes first.
  for (int j = g.ny - 1; j >= 0; --j)
    for (int i = 0; i < g.nx; ++i) {
      const double v = map.at(i, j);
      const double db = v > 0.0 ? 10.0 * std::log10(v) : -kInf;
      const double f = std::clamp((db - range.floor_db) / (range.ceil_db - range.floor_db), 0.0, 1.0);
      const auto px = static_cast<std::uint16_t>(std::lround(f * 65535.0));
      out += static_cast<char>(px >> 8);
      out += static_cast<char>(px & 0xFF);
    }
  write_file(path, out);
}

void write_path_diagnostics(const PathDiagnostics& d, const std::string& path) {
  json j = {{"samples", d.samples},
            {"samples_escaped", d.samples_escaped},
            {"candidates", d.candidates},
            {"diffuse_paths", d.diffuse_paths},
            {"duplicates", d.duplicates},
            {"heuristic_rejected", d.heuristic_rejected},
            {"buffer_overflows", d.buffer_overflows},
            {"all_zero_terminations", d.all_zero_terminations},
            {"rejected", d.rejected},
            {"valid_paths", d.valid_paths},
            {"hash_load_factor", d.hash_load_factor}};
  if (d.valid_paths == 0) j["note"] = "no valid paths found";
  write_file(path, j.dump(2) + "\n");
}

void write_map_diagnostics(const std::vector<RadioMap>& maps, const std::string& path) {
  json arr = json::array();
  for (const auto& m : maps) {
    const auto& d = m.diagnostics;
    arr.push_back({{"tx", m.tx},
                   {"samples", d.samples},
                   {"deposits", d.deposits},
                   {"roulette_terminations", d.roulette_terminations},
                   {"threshold_terminations", d.threshold_terminations},
                   {"all_zero_terminations", d.all_zero_terminations},
                   {"wedges", d.wedges},
                   {"diffraction_deposits", d.diffraction_deposits}});
  }
  write_file(path, json{{"maps", arr}}.dump(2) + "\n");
}

}  // namespace rt
