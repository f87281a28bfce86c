#pragma once

#include <string>
#include <vector>

#include "rt/path_solver.hpp"
#include "rt/radio_map.hpp"
#include "rt/scene.hpp"

namespace rt {

/// Malformed input; `where()` names the line or field.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& where, const std::string& what)
      : ValidationError(where + ": " + what), where_(where) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

class UnresolvedMaterialError : public ValidationError {
 public:
  explicit UnresolvedMaterialError(const std::string& name)
      : ValidationError("unresolved material '" + name + "'"), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class MissingMeshError : public IoError {
 public:
  explicit MissingMeshError(const std::string& path) : IoError("mesh file not found: " + path) {}
};

struct ObjMesh {
  Mesh mesh;
  /// Non-fatal findings such as edges shared by more than two faces.
  std::vector<std::string> warnings;
};

/// Wavefront OBJ subset: `v x y z` and `f i j k ...` records (1-based or
/// negative indices, `i/t/n` forms accepted). Polygons are fan-triangulated
/// from their first vertex.
ObjMesh load_mesh_obj(const std::string& path);
ObjMesh parse_mesh_obj(const std::string& text, const std::string& origin = "<memory>");

/// Reads a JSON scene description. Mesh paths are relative to the scene file.
Scene load_scene(const std::string& path);
Scene parse_scene(const std::string& text, const std::string& base_dir = ".");

/// Writes a self-contained scene (inline meshes, explicit materials).
void save_scene(const Scene& scene, const std::string& path);

/// Angle from a number (radians) or a string with a `deg` or `rad` suffix.
double parse_angle(const std::string& text);

/// Shortest decimal string that reads back to the same double.
std::string format_double(double v);

enum class PathFormat { Csv, Json };
enum class MapFormat { Csv, Pgm };

/// One row per path and port pair; CSV columns: tx, rx, depth, interactions,
/// re_a, im_a, tau, doppler, theta_t, phi_t, theta_r, phi_r.
void write_paths(const PathSet& set, const std::string& path, PathFormat format);

struct PgmRange {
  double floor_db = -150.0;
  double ceil_db = -50.0;
};

/// CSV: ny rows of nx linear gains, row 0 at the lowest v coordinate.
/// PGM: 16-bit grayscale of the dB values mapped affinely from the range.
void write_radio_map(const RadioMap& map, const std::string& path, MapFormat format, PgmRange range = {});

void write_path_diagnostics(const PathDiagnostics& d, const std::string& path);
void write_map_diagnostics(const std::vector<RadioMap>& maps, const std::string& path);

}  // namespace rt
