#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "rt/scene_io.hpp"

using namespace rt;
namespace fs = std::filesystem;

namespace {

const std::string kData = RT_TEST_DATA;

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rt_scene_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : s) {
    if (c == '"') quoted = !quoted;
    if (c == sep && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

TEST(SceneJson, MinimalLoads) {
  const Scene s = load_scene(kData + "/minimal.json");
  EXPECT_EQ(s.triangle_count(), 2u);
  EXPECT_DOUBLE_EQ(s.frequency, 3.5e9);
  ASSERT_EQ(s.transmitters.size(), 1u);
  ASSERT_EQ(s.receivers.size(), 1u);
  EXPECT_EQ(s.transmitters[0].position, Vec3(0, 0, 2));
  ASSERT_TRUE(s.grid.has_value());
  EXPECT_EQ(s.grid->nx, 10);
  EXPECT_EQ(s.material_of(0).name, "concrete");
  EXPECT_TRUE(s.warnings.empty());
}

TEST(SceneJson, UnknownMaterial) {
  const std::string text = R"({"format_version": 1, "frequency": 3.5e9, "objects": [{"name": "w", "material": "steel",
    "vertices": [[0,0,0],[1,0,0],[0,1,0]], "faces": [[0,1,2]]}]})";
  try {
    parse_scene(text);
    FAIL() << "expected UnresolvedMaterialError";
  } catch (const UnresolvedMaterialError& e) {
    EXPECT_EQ(e.name(), "steel");
  }
}

TEST(SceneJson, DegenerateTriangleDropped) {
  const std::string text = R"({"format_version": 1, "frequency": 3.5e9, "objects": [{"name": "w", "material": "glass",
    "vertices": [[0,0,0],[1,0,0],[0,1,0],[2,0,0]], "faces": [[0,1,2],[0,1,3]]}]})";
  const Scene s = parse_scene(text);
  EXPECT_EQ(s.triangle_count(), 1u);
  ASSERT_EQ(s.warnings.size(), 1u);
  EXPECT_NE(s.warnings[0].find("degenerate"), std::string::npos);
}

TEST(SceneJson, RejectsBadInput) {
  EXPECT_THROW(parse_scene("{"), ParseError);
  EXPECT_THROW(parse_scene(R"({"format_version": 2})"), ParseError);
  EXPECT_THROW(parse_scene(R"({"format_version": 1, "frequency": 1e9, "transmitters": [{"name": "t"}]})"), ParseError);
  EXPECT_THROW(
      parse_scene(R"({"format_version": 1, "frequency": 1e9, "transmitters": [{"position": [0,0,0], "pattern": "horn"}]})"),
      ParseError);
  EXPECT_THROW(load_scene("/nonexistent/scene.json"), IoError);
}

TEST(SceneJson, MissingMesh) {
  const fs::path dir = temp_dir("missing_mesh");
  std::ofstream(dir / "s.json") << R"({"format_version": 1, "frequency": 3.5e9,
    "objects": [{"name": "m", "material": "metal", "mesh": "nowhere.obj"}]})";
  EXPECT_THROW(load_scene((dir / "s.json").string()), MissingMeshError);
}

TEST(SceneJson, MeshRelativeToSceneFile) {
  const fs::path dir = temp_dir("mesh_rel");
  std::ofstream(dir / "quad.obj") << "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
  std::ofstream(dir / "s.json") << R"({"format_version": 1, "frequency": 3.5e9,
    "objects": [{"name": "m", "material": "metal", "mesh": "quad.obj"}]})";
  EXPECT_EQ(load_scene((dir / "s.json").string()).triangle_count(), 2u);
}

TEST(Obj, FanTriangulation) {
  const ObjMesh m = parse_mesh_obj("# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3 4/4/4\n");
  ASSERT_EQ(m.mesh.vertices.size(), 4u);
  ASSERT_EQ(m.mesh.triangles.size(), 2u);
  EXPECT_EQ(m.mesh.triangles[0], (std::array<int, 3>{0, 1, 2}));
  EXPECT_EQ(m.mesh.triangles[1], (std::array<int, 3>{0, 2, 3}));
}

TEST(Obj, NegativeIndices) {
  const ObjMesh m = parse_mesh_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n");
  ASSERT_EQ(m.mesh.triangles.size(), 1u);
  EXPECT_EQ(m.mesh.triangles[0], (std::array<int, 3>{0, 1, 2}));
}

TEST(Obj, OutOfRangeNamesLine) {
  try {
    parse_mesh_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\n\nf 1 2 7\n", "tri.obj");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.where(), "tri.obj:5");
  }
  EXPECT_THROW(parse_mesh_obj("v 0 0\n"), ParseError);
}

TEST(SceneJson, SaveLoadRoundTrip) {
  const Scene a = load_scene(kData + "/box.json");
  const fs::path dir = temp_dir("roundtrip");
  save_scene(a, (dir / "s.json").string());
  const Scene b = load_scene((dir / "s.json").string());
  EXPECT_EQ(b.frequency, a.frequency);
  EXPECT_EQ(b.triangle_count(), a.triangle_count());
  EXPECT_EQ(b.wedges().size(), a.wedges().size());
  ASSERT_EQ(b.objects.size(), a.objects.size());
  EXPECT_EQ(b.objects[0].mesh.vertices, a.objects[0].mesh.vertices);
  EXPECT_EQ(b.objects[0].mesh.triangles, a.objects[0].mesh.triangles);
  EXPECT_EQ(b.material_of(0).eps_r, a.material_of(0).eps_r);
  EXPECT_EQ(b.material_of(0).sigma, a.material_of(0).sigma);
  EXPECT_EQ(b.transmitters[0].position, a.transmitters[0].position);
  EXPECT_EQ(b.transmitters[0].pattern, a.transmitters[0].pattern);
  EXPECT_EQ(b.dihedral_threshold_deg, a.dihedral_threshold_deg);
}

TEST(FormatDouble, BitwiseRoundTrip) {
  std::mt19937_64 gen(5);
  for (int i = 0; i < 10000; ++i) {
    double v;
    const std::uint64_t bits = gen();
    std::memcpy(&v, &bits, sizeof v);
    if (!std::isfinite(v)) continue;
    EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(-0.0), "-0");
}

TEST(Angle, Suffixes) {
  EXPECT_NEAR(parse_angle("90deg"), kPi / 2, 1e-15);
  EXPECT_NEAR(parse_angle("1rad"), 1.0, 1e-15);
  EXPECT_NEAR(parse_angle("0.5"), 0.5, 1e-15);
  EXPECT_NEAR(parse_angle("-45 deg"), -kPi / 4, 1e-15);
  EXPECT_THROW(parse_angle("ninety"), ParseError);
  EXPECT_THROW(parse_angle("1grad"), ParseError);
}

TEST(WritePaths, CsvRoundTrip) {
  Scene s = load_scene(kData + "/minimal.json");
  PathConfig cfg;
  cfg.samples = 20000;
  cfg.max_depth = 1;
  const PathSet set = compute_paths(s, cfg);
  ASSERT_GE(set.paths.size(), 2u);
  const fs::path dir = temp_dir("csv");
  write_paths(set, (dir / "p.csv").string(), PathFormat::Csv);
  std::istringstream in(slurp(dir / "p.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "tx,rx,depth,interactions,re_a,im_a,tau,doppler,theta_t,phi_t,theta_r,phi_r");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    const auto f = split(line, ',');
    ASSERT_EQ(f.size(), 12u);
    const PathRecord& p = set.paths[rows];
    EXPECT_EQ(std::stoi(f[2]), p.geometry.depth());
    EXPECT_EQ(f[3], "\"" + p.geometry.interaction_string() + "\"");
    EXPECT_EQ(std::stod(f[4]), p.a(0, 0).real());
    EXPECT_EQ(std::stod(f[5]), p.a(0, 0).imag());
    EXPECT_EQ(std::stod(f[6]), p.tau);
    ++rows;
  }
  EXPECT_EQ(rows, set.paths.size());
}

TEST(WritePaths, EmptySetHeaderOnly) {
  const fs::path dir = temp_dir("empty");
  write_paths(PathSet{}, (dir / "p.csv").string(), PathFormat::Csv);
  EXPECT_EQ(slurp(dir / "p.csv"), "tx,rx,depth,interactions,re_a,im_a,tau,doppler,theta_t,phi_t,theta_r,phi_r\n");
  write_paths(PathSet{}, (dir / "p.json").string(), PathFormat::Json);
  EXPECT_NE(slurp(dir / "p.json").find("\"paths\": []"), std::string::npos);
}

TEST(WritePaths, UnwritableTarget) {
  EXPECT_THROW(write_paths(PathSet{}, "/nonexistent/dir/p.csv", PathFormat::Csv), IoError);
}

namespace {

RadioMap uniform_map(double v) {
  RadioMap m;
  m.grid = MeasurementGrid::make(Vec3::Zero(), Vec3::UnitZ(), Vec3::UnitX(), 1.0, 1.0, 3, 2);
  m.values.assign(6, v);
  return m;
}

std::vector<std::uint16_t> pgm_pixels(const std::string& data, int& w, int& h) {
  std::istringstream in(data);
  std::string magic, comment;
  std::getline(in, magic);
  EXPECT_EQ(magic, "P5");
  std::getline(in, comment);
  EXPECT_EQ(comment[0], '#');
  int maxval = 0;
  in >> w >> h >> maxval;
  EXPECT_EQ(maxval, 65535);
  in.get();
  std::vector<std::uint16_t> px;
  for (int i = 0; i < w * h; ++i) {
    const int hi = in.get(), lo = in.get();
    px.push_back(static_cast<std::uint16_t>((hi << 8) | lo));
  }
  EXPECT_EQ(in.peek(), std::char_traits<char>::eof());
  return px;
}

}  // namespace

TEST(WriteMap, PgmUniform) {
  const fs::path dir = temp_dir("pgm");
  write_radio_map(uniform_map(1e-10), (dir / "m.pgm").string(), MapFormat::Pgm);
  int w = 0, h = 0;
  const auto px = pgm_pixels(slurp(dir / "m.pgm"), w, h);
  EXPECT_EQ(w, 3);
  EXPECT_EQ(h, 2);
  // -100 dB sits halfway between -150 and -50.
  for (auto p : px) EXPECT_EQ(p, 32768);
}

TEST(WriteMap, PgmZeroCellIsBlackAndOrientation) {
  RadioMap m = uniform_map(1.0);
  m.values[m.grid.index(0, 0)] = 0.0;
  const fs::path dir = temp_dir("pgm0");
  write_radio_map(m, (dir / "m.pgm").string(), MapFormat::Pgm);
  int w = 0, h = 0;
  const auto px = pgm_pixels(slurp(dir / "m.pgm"), w, h);
  // Cell (0, 0) is the lowest row, so it is written last.
  EXPECT_EQ(px[3], 0);
  for (int i : {0, 1, 2, 4, 5}) EXPECT_EQ(px[i], 65535);
  EXPECT_THROW(write_radio_map(m, (dir / "x.pgm").string(), MapFormat::Pgm, {-50.0, -50.0}), ValidationError);
}

TEST(WriteMap, CsvRows) {
  RadioMap m = uniform_map(0.0);
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 3; ++i) m.values[m.grid.index(i, j)] = 0.25 + i + 10 * j;
  const fs::path dir = temp_dir("mapcsv");
  write_radio_map(m, (dir / "m.csv").string(), MapFormat::Csv);
  EXPECT_EQ(slurp(dir / "m.csv"), "0.25,1.25,2.25\n10.25,11.25,12.25\n");
}
