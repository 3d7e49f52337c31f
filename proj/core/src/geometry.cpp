#include "lacal/geometry.hpp"

#include "lacal/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <unordered_map>

namespace lacal::geometry {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

struct RawSurface {
  Positions vertices;
  std::vector<std::array<int, 3>> triangles;
};

void subdivide(RawSurface& s, double radius) {
  std::unordered_map<std::uint64_t, int> midpoint;
  auto mid = [&](int a, int b) {
    const auto key = edge_key(a, b);
    if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
    Vec3 m = 0.5 * (s.vertices[static_cast<std::size_t>(a)] + s.vertices[static_cast<std::size_t>(b)]);
    m *= radius / m.norm();
    // equatorial midpoints stay exactly on the rim plane
    if (s.vertices[static_cast<std::size_t>(a)].z() == 0.0 && s.vertices[static_cast<std::size_t>(b)].z() == 0.0) {
      m.z() = 0.0;
    }
    s.vertices.push_back(m);
    const int id = static_cast<int>(s.vertices.size()) - 1;
    midpoint.emplace(key, id);
    return id;
  };
  std::vector<std::array<int, 3>> out;
  out.reserve(s.triangles.size() * 4);
  for (const auto& t : s.triangles) {
    const int ab = mid(t[0], t[1]);
    const int bc = mid(t[1], t[2]);
    const int ca = mid(t[2], t[0]);
    out.push_back({t[0], ab, ca});
    out.push_back({ab, t[1], bc});
    out.push_back({ca, bc, t[2]});
    out.push_back({ab, bc, ca});
  }
  s.triangles = std::move(out);
}

// Pole, a ring of six at 50 degrees co-latitude and six staggered rim
// vertices: 18 triangles with a minimum angle near 50 degrees. The closed
// variant mirrors the ring and pole below the equator.
RawSurface ring_base(double radius, bool closed) {
  constexpr double ring = 50.0 * kDeg;
  RawSurface s;
  s.vertices.emplace_back(0.0, 0.0, radius);
  for (int k = 0; k < 6; ++k) {
    const double phi = k * std::numbers::pi / 3.0;
    s.vertices.emplace_back(radius * std::sin(ring) * std::cos(phi), radius * std::sin(ring) * std::sin(phi),
                            radius * std::cos(ring));
  }
  for (int k = 0; k < 6; ++k) {
    const double phi = (k + 0.5) * std::numbers::pi / 3.0;
    s.vertices.emplace_back(radius * std::cos(phi), radius * std::sin(phi), 0.0);
  }
  auto upper = [](int k) { return 1 + (k % 6); };
  auto equator = [](int k) { return 7 + (k % 6); };
  for (int k = 0; k < 6; ++k) {
    s.triangles.push_back({0, upper(k), upper(k + 1)});
    s.triangles.push_back({upper(k), equator(k), upper(k + 1)});
    s.triangles.push_back({upper(k + 1), equator(k), equator(k + 1)});
  }
  if (closed) {
    for (int k = 0; k < 6; ++k) {
      const double phi = k * std::numbers::pi / 3.0;
      s.vertices.emplace_back(radius * std::sin(ring) * std::cos(phi), radius * std::sin(ring) * std::sin(phi),
                              -radius * std::cos(ring));
    }
    s.vertices.emplace_back(0.0, 0.0, -radius);
    auto lower = [](int k) { return 13 + (k % 6); };
    const int south = 19;
    for (int k = 0; k < 6; ++k) {
      s.triangles.push_back({south, lower(k + 1), lower(k)});
      s.triangles.push_back({lower(k), lower(k + 1), equator(k)});
      s.triangles.push_back({lower(k + 1), equator(k + 1), equator(k)});
    }
  }
  return s;
}

void validate_radius(double radius, int refinement) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw Error(ErrorKind::invalid_geometry, "radius must be positive, got " + std::to_string(radius));
  }
  if (refinement < 0 || refinement > 8) {
    throw Error(ErrorKind::invalid_geometry, "refinement must lie in [0, 8], got " + std::to_string(refinement));
  }
}

void compute_rest_areas(ShellMesh& mesh) {
  mesh.rest_area.resize(mesh.triangles.size());
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    mesh.rest_area[i] = triangle_area(mesh.vertices, mesh.triangles[i]);
  }
}

void assign_vein_patch(ShellMesh& mesh, const VeinPatchConfig& cfg) {
  const double th = cfg.colatitude_deg * kDeg;
  const double ph = cfg.azimuth_deg * kDeg;
  const Vec3 centre(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
  const auto rim = mesh.rim_mask();
  mesh.vein_patch_vertex_ids.clear();
  int nearest = -1;
  double best = -2.0;
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (rim[v]) continue;
    const double c = mesh.vertices[v].normalized().dot(centre);
    if (c > best) {
      best = c;
      nearest = static_cast<int>(v);
    }
    if (std::acos(std::clamp(c, -1.0, 1.0)) <= cfg.radius_deg * kDeg) {
      mesh.vein_patch_vertex_ids.push_back(static_cast<int>(v));
    }
  }
  if (mesh.vein_patch_vertex_ids.empty() && nearest >= 0) {
    mesh.vein_patch_vertex_ids.push_back(nearest);
  }
}

}  // namespace

std::string_view region_name(Region region) {
  switch (region) {
    case Region::anterior: return "anterior";
    case Region::posterior: return "posterior";
    case Region::septum: return "septum";
    case Region::lateral: return "lateral";
    case Region::roof: return "roof";
    case Region::rim: return "rim";
  }
  return "unknown";
}

Region region_from_name(std::string_view name) {
  for (Region r : {Region::anterior, Region::posterior, Region::septum, Region::lateral, Region::roof,
                   Region::rim}) {
    if (region_name(r) == name) return r;
  }
  throw Error(ErrorKind::invalid_argument, "unknown region '" + std::string(name) + "'");
}

double ThicknessProfile::for_region(Region r) const {
  if (auto it = per_region.find(r); it != per_region.end()) return it->second;
  return uniform;
}

std::vector<bool> ShellMesh::rim_mask() const {
  std::vector<bool> mask(vertices.size(), false);
  for (int v : rim_vertex_ids) mask[static_cast<std::size_t>(v)] = true;
  return mask;
}

double colatitude_deg(const Vec3& p) {
  const double n = p.norm();
  if (n == 0.0) return 0.0;
  return std::acos(std::clamp(p.z() / n, -1.0, 1.0)) / kDeg;
}

double azimuth_deg(const Vec3& p) { return std::atan2(p.y(), p.x()) / kDeg; }

Vec3 triangle_centroid(const Positions& x, const std::array<int, 3>& t) {
  return (x[static_cast<std::size_t>(t[0])] + x[static_cast<std::size_t>(t[1])] +
          x[static_cast<std::size_t>(t[2])]) /
         3.0;
}

Vec3 triangle_normal(const Positions& x, const std::array<int, 3>& t) {
  const Vec3& a = x[static_cast<std::size_t>(t[0])];
  return (x[static_cast<std::size_t>(t[1])] - a).cross(x[static_cast<std::size_t>(t[2])] - a).normalized();
}

double triangle_area(const Positions& x, const std::array<int, 3>& t) {
  const Vec3& a = x[static_cast<std::size_t>(t[0])];
  return 0.5 * (x[static_cast<std::size_t>(t[1])] - a).cross(x[static_cast<std::size_t>(t[2])] - a).norm();
}

std::vector<double> vertex_areas(const ShellMesh& mesh, const Positions& x) {
  std::vector<double> area(mesh.vertices.size(), 0.0);
  for (const auto& t : mesh.triangles) {
    const double a = triangle_area(x, t) / 3.0;
    for (int v : t) area[static_cast<std::size_t>(v)] += a;
  }
  return area;
}

std::vector<std::vector<int>> triangle_neighbors(const ShellMesh& mesh) {
  std::unordered_map<std::uint64_t, std::vector<int>> by_edge;
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& t = mesh.triangles[i];
    for (int k = 0; k < 3; ++k) {
      by_edge[edge_key(t[static_cast<std::size_t>(k)], t[static_cast<std::size_t>((k + 1) % 3)])].push_back(
          static_cast<int>(i));
    }
  }
  std::vector<std::vector<int>> nbr(mesh.triangles.size());
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& t = mesh.triangles[i];
    for (int k = 0; k < 3; ++k) {
      for (int j : by_edge[edge_key(t[static_cast<std::size_t>(k)], t[static_cast<std::size_t>((k + 1) % 3)])]) {
        if (j != static_cast<int>(i)) nbr[i].push_back(j);
      }
    }
  }
  return nbr;
}

std::size_t count_region_islands(const ShellMesh& mesh) {
  const auto nbr = triangle_neighbors(mesh);
  std::size_t islands = 0;
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    if (nbr[i].size() < 3) continue;
    const bool isolated = std::all_of(nbr[i].begin(), nbr[i].end(), [&](int j) {
      return mesh.regions[static_cast<std::size_t>(j)] != mesh.regions[i];
    });
    if (isolated) ++islands;
  }
  return islands;
}

void assign_regions(ShellMesh& mesh, const RegionConfig& config) {
  const auto rim = mesh.rim_mask();
  mesh.regions.assign(mesh.triangles.size(), Region::anterior);
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& t = mesh.triangles[i];
    const Vec3 c = triangle_centroid(mesh.vertices, t);
    const double colat = colatitude_deg(c);
    const int on_rim = static_cast<int>(rim[static_cast<std::size_t>(t[0])]) +
                       static_cast<int>(rim[static_cast<std::size_t>(t[1])]) +
                       static_cast<int>(rim[static_cast<std::size_t>(t[2])]);
    if (mesh.has_rim() && (on_rim >= 2 || colat > 90.0 - config.rim_band_deg)) {
      mesh.regions[i] = Region::rim;
      continue;
    }
    if (colat < config.roof_cap_deg) {
      mesh.regions[i] = Region::roof;
      continue;
    }
    const double phi = azimuth_deg(c);
    if (phi >= -45.0 && phi < 45.0) {
      mesh.regions[i] = Region::anterior;
    } else if (phi >= 45.0 && phi < 135.0) {
      mesh.regions[i] = Region::septum;
    } else if (phi >= -135.0 && phi < -45.0) {
      mesh.regions[i] = Region::lateral;
    } else {
      mesh.regions[i] = Region::posterior;
    }
  }

  // Floating-element correction: a triangle surrounded on all three edges by
  // other tags takes the most common neighbouring wall tag.
  const auto nbr = triangle_neighbors(mesh);
  for (int pass = 0; pass < 100; ++pass) {
    bool changed = false;
    for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
      if (nbr[i].size() < 3) continue;
      const Region own = mesh.regions[i];
      std::array<int, 6> votes{};
      bool isolated = true;
      for (int j : nbr[i]) {
        const Region r = mesh.regions[static_cast<std::size_t>(j)];
        if (r == own) {
          isolated = false;
          break;
        }
        ++votes[index_of(r)];
      }
      if (!isolated) continue;
      int best = -1;
      for (std::size_t r = 0; r < kWallRegionCount; ++r) {
        if (votes[r] > 0 && (best < 0 || votes[r] > votes[static_cast<std::size_t>(best)])) best = static_cast<int>(r);
      }
      if (best < 0) best = static_cast<int>(index_of(Region::rim));
      mesh.regions[i] = static_cast<Region>(best);
      changed = true;
    }
    if (!changed) break;
  }
}

void assign_fibers(ShellMesh& mesh) {
  mesh.fiber_dir.resize(mesh.triangles.size());
  mesh.sheet_dir.resize(mesh.triangles.size());
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& t = mesh.triangles[i];
    const Vec3 c = triangle_centroid(mesh.vertices, t);
    const Vec3 n = triangle_normal(mesh.vertices, t);
    const double colat = colatitude_deg(c);
    Vec3 dir;
    if (colat < 2.0 || colat > 178.0) {
      dir = Vec3::UnitX();
    } else {
      const double phi = std::atan2(c.y(), c.x());
      dir = Vec3(-std::sin(phi), std::cos(phi), 0.0);
    }
    Vec3 f = dir - dir.dot(n) * n;
    if (f.norm() < 1e-8) {
      // x-axis parallel to the normal: fall back to y
      f = Vec3::UnitY() - Vec3::UnitY().dot(n) * n;
    }
    f.normalize();
    Vec3 s = n.cross(f);
    s -= s.dot(f) * f;
    mesh.fiber_dir[i] = f;
    mesh.sheet_dir[i] = s.normalized();
  }
}

void assign_thickness(ShellMesh& mesh, const ThicknessProfile& profile) {
  auto check = [](double h) {
    if (!(h > 0.0) || !std::isfinite(h)) {
      throw Error(ErrorKind::invalid_geometry, "thickness must be positive, got " + std::to_string(h));
    }
  };
  check(profile.uniform);
  for (const auto& [r, h] : profile.per_region) check(h);
  mesh.thickness.resize(mesh.triangles.size());
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    mesh.thickness[i] = profile.for_region(mesh.regions[i]);
  }
}

ShellMesh build_hemisphere_mesh(double radius, int refinement, const ThicknessProfile& thickness,
                                const MeshOptions& options) {
  validate_radius(radius, refinement);
  RawSurface s = ring_base(radius, false);
  for (int r = 0; r < refinement; ++r) subdivide(s, radius);

  ShellMesh mesh;
  mesh.radius = radius;
  mesh.vertices = std::move(s.vertices);
  mesh.triangles = std::move(s.triangles);
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (mesh.vertices[v].z() == 0.0) mesh.rim_vertex_ids.push_back(static_cast<int>(v));
  }
  assign_regions(mesh, options.regions);
  assign_fibers(mesh);
  assign_thickness(mesh, thickness);
  compute_rest_areas(mesh);
  assign_vein_patch(mesh, options.vein_patch);
  return mesh;
}

ShellMesh build_sphere_mesh(double radius, int refinement, const ThicknessProfile& thickness,
                            const RegionConfig& regions) {
  validate_radius(radius, refinement);
  RawSurface s = ring_base(radius, true);
  for (int r = 0; r < refinement; ++r) subdivide(s, radius);
  ShellMesh mesh;
  mesh.radius = radius;
  mesh.vertices = std::move(s.vertices);
  mesh.triangles = std::move(s.triangles);
  assign_regions(mesh, regions);
  assign_fibers(mesh);
  assign_thickness(mesh, thickness);
  compute_rest_areas(mesh);
  return mesh;
}

ClosedSurface::ClosedSurface(const ShellMesh& mesh) : mesh_(&mesh) {
  // directed edge -> count; an interior edge must appear once in each direction
  std::unordered_map<std::uint64_t, int> directed;
  directed.reserve(mesh.triangles.size() * 3);
  auto dkey = [](int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
  };
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[static_cast<std::size_t>(k)];
      const int b = t[static_cast<std::size_t>((k + 1) % 3)];
      if (++directed[dkey(a, b)] > 1) {
        throw Error(ErrorKind::topology, "edge (" + std::to_string(a) + "," + std::to_string(b) +
                                             ") used twice with the same orientation");
      }
    }
  }
  const auto rim = mesh.rim_mask();
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[static_cast<std::size_t>(k)];
      const int b = t[static_cast<std::size_t>((k + 1) % 3)];
      if (directed.count(dkey(b, a)) == 0) {
        if (!rim[static_cast<std::size_t>(a)] || !rim[static_cast<std::size_t>(b)]) {
          throw Error(ErrorKind::topology, "open surface: boundary edge (" + std::to_string(a) + "," +
                                               std::to_string(b) + ") is not on the rim");
        }
        boundary_edges_.push_back({a, b});
      }
    }
  }
  rim_vertices_ = mesh.rim_vertex_ids;
  if (!boundary_edges_.empty() && rim_vertices_.empty()) {
    throw Error(ErrorKind::topology, "open surface without a rim");
  }
}

double ClosedSurface::volume(const Positions& x) const {
  double six_v = 0.0;
  for (const auto& t : mesh_->triangles) {
    const Vec3& a = x[static_cast<std::size_t>(t[0])];
    const Vec3& b = x[static_cast<std::size_t>(t[1])];
    const Vec3& c = x[static_cast<std::size_t>(t[2])];
    six_v += a.dot(b.cross(c));
  }
  if (!boundary_edges_.empty()) {
    Vec3 centre = Vec3::Zero();
    for (int v : rim_vertices_) centre += x[static_cast<std::size_t>(v)];
    centre /= static_cast<double>(rim_vertices_.size());
    for (const auto& e : boundary_edges_) {
      // cap triangle (b, a, centre) traverses the rim edge in reverse
      six_v += x[static_cast<std::size_t>(e[1])].dot(x[static_cast<std::size_t>(e[0])].cross(centre));
    }
  }
  return six_v / 6.0;
}

double ClosedSurface::volume_and_gradient(const Positions& x, Positions& gradient) const {
  gradient.assign(x.size(), Vec3::Zero());
  double six_v = 0.0;
  for (const auto& t : mesh_->triangles) {
    const auto ia = static_cast<std::size_t>(t[0]);
    const auto ib = static_cast<std::size_t>(t[1]);
    const auto ic = static_cast<std::size_t>(t[2]);
    const Vec3& a = x[ia];
    const Vec3& b = x[ib];
    const Vec3& c = x[ic];
    six_v += a.dot(b.cross(c));
    gradient[ia] += b.cross(c);
    gradient[ib] += c.cross(a);
    gradient[ic] += a.cross(b);
  }
  if (!boundary_edges_.empty()) {
    Vec3 centre = Vec3::Zero();
    for (int v : rim_vertices_) centre += x[static_cast<std::size_t>(v)];
    const double inv_n = 1.0 / static_cast<double>(rim_vertices_.size());
    centre *= inv_n;
    Vec3 d_centre = Vec3::Zero();
    for (const auto& e : boundary_edges_) {
      const auto ib = static_cast<std::size_t>(e[1]);
      const auto ia = static_cast<std::size_t>(e[0]);
      const Vec3& b = x[ib];
      const Vec3& a = x[ia];
      six_v += b.dot(a.cross(centre));
      gradient[ib] += a.cross(centre);
      gradient[ia] += centre.cross(b);
      d_centre += b.cross(a);
    }
    for (int v : rim_vertices_) gradient[static_cast<std::size_t>(v)] += inv_n * d_centre;
  }
  for (auto& g : gradient) g /= 6.0;
  return six_v / 6.0;
}

Positions ClosedSurface::vertex_normals(const Positions& x) const {
  Positions n(x.size(), Vec3::Zero());
  for (const auto& t : mesh_->triangles) {
    const Vec3& a = x[static_cast<std::size_t>(t[0])];
    const Vec3 an = (x[static_cast<std::size_t>(t[1])] - a).cross(x[static_cast<std::size_t>(t[2])] - a);
    for (int v : t) n[static_cast<std::size_t>(v)] += an;
  }
  for (auto& v : n) {
    const double len = v.norm();
    if (len > 0.0) v /= len;
  }
  return n;
}

double enclosed_volume(const ShellMesh& mesh, const Positions& positions) {
  if (positions.size() != mesh.vertices.size()) {
    throw Error(ErrorKind::shape, "position count does not match mesh vertex count");
  }
  const ClosedSurface surface(mesh);
  const double v = surface.volume(positions);
  if (!(v > 0.0)) {
    throw Error(ErrorKind::topology, "non-positive enclosed volume " + std::to_string(v) +
                                         " (inward-facing orientation)");
  }
  return v;
}

double enclosed_volume(const ShellMesh& mesh, const DisplacementField* displacement) {
  if (displacement == nullptr) return enclosed_volume(mesh, mesh.vertices);
  if (displacement->u.size() != mesh.vertices.size()) {
    throw Error(ErrorKind::shape, "displacement field does not match mesh vertex count");
  }
  Positions x(mesh.vertices.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = mesh.vertices[i] + displacement->u[i];
  return enclosed_volume(mesh, x);
}

RegionalDisplacement regional_displacement(const ShellMesh& mesh, const Positions& u) {
  if (u.size() != mesh.vertices.size()) {
    throw Error(ErrorKind::shape, "displacement field does not match mesh vertex count");
  }
  RegionalDisplacement out;
  std::array<std::size_t, kWallRegionCount> count{};
  std::size_t total = 0;
  double total_sum = 0.0;
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const Region r = mesh.regions[i];
    if (r == Region::rim) continue;
    const double d = triangle_centroid(u, mesh.triangles[i]).norm();
    out.by_region[index_of(r)] += d;
    ++count[index_of(r)];
    total_sum += d;
    ++total;
  }
  for (std::size_t r = 0; r < kWallRegionCount; ++r) {
    if (count[r] == 0) {
      throw Error(ErrorKind::missing_region,
                  "region '" + std::string(region_name(static_cast<Region>(r))) + "' has no triangles");
    }
    out.by_region[r] /= static_cast<double>(count[r]);
  }
  out.global = total_sum / static_cast<double>(total);
  return out;
}

RegionalDisplacement regional_displacement(const ShellMesh& mesh, const DisplacementField& displacement) {
  return regional_displacement(mesh, displacement.u);
}

}  // namespace lacal::geometry
