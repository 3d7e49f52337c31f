#pragma once

#include "lacal/types.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

namespace lacal::geometry {

enum class Region : std::uint8_t { anterior = 0, posterior, septum, lateral, roof, rim };

inline constexpr std::size_t kWallRegionCount = 5;
inline constexpr std::array<Region, kWallRegionCount> kWallRegions{
    Region::anterior, Region::posterior, Region::septum, Region::lateral, Region::roof};

std::string_view region_name(Region region);
Region region_from_name(std::string_view name);

inline std::size_t index_of(Region r) { return static_cast<std::size_t>(r); }

struct RegionConfig {
  double roof_cap_deg = 35.0;  // co-latitude of the roof cap boundary
  double rim_band_deg = 5.0;   // band above the equator tagged as annulus
};

struct VeinPatchConfig {
  double colatitude_deg = 30.0;
  double azimuth_deg = 90.0;  // septal side of the roof
  double radius_deg = 20.0;   // angular radius of the anchored patch
};

/// Wall thickness per region; regions absent from `per_region` get `uniform`.
struct ThicknessProfile {
  double uniform = 2.0;
  std::map<Region, double> per_region;

  static ThicknessProfile constant(double mm) { return ThicknessProfile{mm, {}}; }
  double for_region(Region r) const;
};

struct ShellMesh {
  Positions vertices;                          // mm
  std::vector<std::array<int, 3>> triangles;   // counter-clockwise seen from outside
  std::vector<Region> regions;                 // per triangle
  std::vector<Vec3> fiber_dir;                 // per triangle, unit, in-plane
  std::vector<Vec3> sheet_dir;                 // per triangle, unit, in-plane, orthogonal to fiber
  std::vector<double> rest_area;               // mm^2
  std::vector<double> thickness;               // mm
  std::vector<int> rim_vertex_ids;             // equatorial annulus (empty for closed surfaces)
  std::vector<int> vein_patch_vertex_ids;      // omni-directional spring anchors
  double radius = 0.0;                         // construction radius, mm

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t triangle_count() const { return triangles.size(); }
  bool has_rim() const { return !rim_vertex_ids.empty(); }
  std::vector<bool> rim_mask() const;
};

/// Per-vertex displacement from the end-diastolic reference.
struct DisplacementField {
  Positions u;
  double t = 0.0;
};

struct MeshOptions {
  RegionConfig regions{};
  VeinPatchConfig vein_patch{};
};

/// Hemisphere (open at the equator, z >= 0) built by recursive 1:4
/// subdivision of an 18-triangle base (pole, one ring, rim), projected onto the sphere. Regions, fibres,
/// thickness and rest areas are all assigned.
ShellMesh build_hemisphere_mesh(double radius, int refinement,
                                const ThicknessProfile& thickness = ThicknessProfile::constant(2.0),
                                const MeshOptions& options = {});

/// Closed sphere with the same construction (base mirrored below the equator). Used by
/// the inflation oracle; it carries no rim and no vein patch.
ShellMesh build_sphere_mesh(double radius, int refinement,
                            const ThicknessProfile& thickness = ThicknessProfile::constant(2.0),
                            const RegionConfig& regions = {});

/// Tags the roof cap, the equatorial annulus and four azimuthal quadrants,
/// then relabels isolated triangles to the surrounding tag until none remain.
void assign_regions(ShellMesh& mesh, const RegionConfig& config = {});

/// Circumferential fibre rule with sheet = normal x fibre. Triangles whose
/// centroid lies within 2 degrees of a pole fall back to the projected x-axis.
void assign_fibers(ShellMesh& mesh);

void assign_thickness(ShellMesh& mesh, const ThicknessProfile& profile);

/// Triangle-adjacency: for each triangle the (up to three) edge neighbours.
std::vector<std::vector<int>> triangle_neighbors(const ShellMesh& mesh);

/// Count of triangles whose edge neighbours all carry a tag different from
/// their own (only triangles with three neighbours are considered).
std::size_t count_region_islands(const ShellMesh& mesh);

/// Watertight-surface helper: the shell triangles plus a fan cap over each
/// rim loop to the loop centroid. Construction validates the topology.
class ClosedSurface {
 public:
  explicit ClosedSurface(const ShellMesh& mesh);

  /// Signed volume (divergence theorem). Positive for outward orientation.
  double volume(const Positions& x) const;

  /// Volume and its gradient with respect to every vertex position.
  double volume_and_gradient(const Positions& x, Positions& gradient) const;

  /// Area-weighted vertex normals of the closed shell (cap excluded).
  Positions vertex_normals(const Positions& x) const;

  const std::vector<std::array<int, 2>>& boundary_edges() const { return boundary_edges_; }
  const std::vector<int>& rim_loop_vertices() const { return rim_vertices_; }

 private:
  const ShellMesh* mesh_;
  std::vector<std::array<int, 2>> boundary_edges_;  // oriented as in the shell triangle
  std::vector<int> rim_vertices_;
};

/// Enclosed volume of the (optionally displaced) surface closed by a flat
/// fan over the rim. Rejects negative (inverted) orientation.
double enclosed_volume(const ShellMesh& mesh, const DisplacementField* displacement = nullptr);
double enclosed_volume(const ShellMesh& mesh, const Positions& positions);

struct RegionalDisplacement {
  std::array<double, kWallRegionCount> by_region{};
  double global = 0.0;

  double operator[](Region r) const { return by_region[index_of(r)]; }
};

/// Mean magnitude of triangle-centre displacement per wall region and over all
/// non-rim triangles.
RegionalDisplacement regional_displacement(const ShellMesh& mesh, const Positions& displacement);
RegionalDisplacement regional_displacement(const ShellMesh& mesh, const DisplacementField& displacement);

/// Triangle centroid, unit normal and area for arbitrary positions.
Vec3 triangle_centroid(const Positions& x, const std::array<int, 3>& t);
Vec3 triangle_normal(const Positions& x, const std::array<int, 3>& t);
double triangle_area(const Positions& x, const std::array<int, 3>& t);

/// One third of the adjacent triangle areas, per vertex.
std::vector<double> vertex_areas(const ShellMesh& mesh, const Positions& x);

/// Co-latitude in degrees of a point relative to the +z axis through the origin.
double colatitude_deg(const Vec3& p);
double azimuth_deg(const Vec3& p);

}  // namespace lacal::geometry
