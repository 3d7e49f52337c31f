#include "lacal/mesh_io.hpp"

#include "lacal/error.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace lacal::geometry {

void write_mesh(std::ostream& out, const ShellMesh& mesh) {
  out << std::setprecision(17);
  out << "format lacal-shell 1\n";
  out << "radius " << mesh.radius << '\n';
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& t = mesh.triangles[i];
    out << "t " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << region_name(mesh.regions[i]) << '\n';
  }
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const Vec3& f = mesh.fiber_dir[i];
    const Vec3& s = mesh.sheet_dir[i];
    out << "a " << f.x() << ' ' << f.y() << ' ' << f.z() << ' ' << s.x() << ' ' << s.y() << ' ' << s.z()
        << ' ' << mesh.thickness[i] << '\n';
  }
  for (int v : mesh.rim_vertex_ids) out << "rim " << v << '\n';
  for (int v : mesh.vein_patch_vertex_ids) out << "vein " << v << '\n';
}

void write_mesh(const std::filesystem::path& path, const ShellMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
  write_mesh(out, mesh);
}

ShellMesh read_mesh(std::istream& in) {
  ShellMesh mesh;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::io, "mesh line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "format") {
      std::string name;
      int version = 0;
      ls >> name >> version;
      if (name != "lacal-shell" || version != 1) fail("unsupported format '" + name + "'");
      header = true;
    } else if (tag == "radius") {
      ls >> mesh.radius;
    } else if (tag == "v") {
      Vec3 p;
      ls >> p.x() >> p.y() >> p.z();
      if (!ls) fail("bad vertex");
      mesh.vertices.push_back(p);
    } else if (tag == "t") {
      std::array<int, 3> t{};
      std::string region;
      ls >> t[0] >> t[1] >> t[2] >> region;
      if (!ls) fail("bad triangle");
      mesh.triangles.push_back(t);
      mesh.regions.push_back(region_from_name(region));
    } else if (tag == "a") {
      Vec3 f;
      Vec3 s;
      double h = 0.0;
      ls >> f.x() >> f.y() >> f.z() >> s.x() >> s.y() >> s.z() >> h;
      if (!ls) fail("bad triangle attributes");
      mesh.fiber_dir.push_back(f);
      mesh.sheet_dir.push_back(s);
      mesh.thickness.push_back(h);
    } else if (tag == "rim") {
      int v = 0;
      ls >> v;
      mesh.rim_vertex_ids.push_back(v);
    } else if (tag == "vein") {
      int v = 0;
      ls >> v;
      mesh.vein_patch_vertex_ids.push_back(v);
    } else {
      fail("unknown record '" + tag + "'");
    }
  }
  if (!header) throw Error(ErrorKind::io, "missing 'format lacal-shell 1' header");
  if (mesh.fiber_dir.size() != mesh.triangles.size()) {
    throw Error(ErrorKind::io, "attribute record count does not match triangle count");
  }
  const auto n = static_cast<int>(mesh.vertices.size());
  for (const auto& t : mesh.triangles) {
    for (int v : t) {
      if (v < 0 || v >= n) throw Error(ErrorKind::io, "triangle index out of range");
    }
  }
  mesh.rest_area.resize(mesh.triangles.size());
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    mesh.rest_area[i] = triangle_area(mesh.vertices, mesh.triangles[i]);
  }
  return mesh;
}

ShellMesh read_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  return read_mesh(in);
}

}  // namespace lacal::geometry
