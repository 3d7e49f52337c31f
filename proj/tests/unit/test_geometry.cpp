#include "lacal/error.hpp"
#include "lacal/geometry.hpp"
#include "lacal/mesh_io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

using namespace lacal;
using namespace lacal::geometry;

namespace {

void expect_invariants(const ShellMesh& m) {
  ASSERT_EQ(m.regions.size(), m.triangle_count());
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    EXPECT_GT(m.rest_area[t], 0.0);
    EXPECT_NEAR(m.fiber_dir[t].dot(m.sheet_dir[t]), 0.0, 1e-12);
    EXPECT_NEAR(m.fiber_dir[t].norm(), 1.0, 1e-12);
    EXPECT_NEAR(m.sheet_dir[t].norm(), 1.0, 1e-12);
    const Vec3 n = triangle_normal(m.vertices, m.triangles[t]);
    EXPECT_NEAR(m.fiber_dir[t].dot(n), 0.0, 1e-12);
    // outward: normal points away from the sphere centre
    EXPECT_GT(n.dot(triangle_centroid(m.vertices, m.triangles[t])), 0.0);
  }
  for (int v : m.rim_vertex_ids) EXPECT_NEAR(m.vertices[static_cast<std::size_t>(v)].z(), 0.0, 1e-9);
}

}  // namespace

TEST(Mesh, HemisphereVolumeWithinOnePercent) {
  const auto m = build_hemisphere_mesh(20.0, 3);
  const double exact = 2.0 * std::numbers::pi * 8000.0 / 3.0;
  EXPECT_NEAR(enclosed_volume(m), exact, 0.01 * exact);
}

TEST(Mesh, InvariantsAtEveryRefinement) {
  std::size_t prev = 0;
  for (int r = 0; r <= 4; ++r) {
    const auto m = build_hemisphere_mesh(20.0, r);
    expect_invariants(m);
    EXPECT_TRUE(m.has_rim());
    if (prev > 0) {
      const double ratio = static_cast<double>(m.vertex_count()) / static_cast<double>(prev);
      EXPECT_GT(ratio, 2.5);
      EXPECT_LT(ratio, 4.5);
    }
    prev = m.vertex_count();
  }
}

TEST(Mesh, PerRegionThickness) {
  ThicknessProfile p{1.5, {{Region::roof, 3.0}}};
  const auto m = build_hemisphere_mesh(20.0, 3, p);
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    EXPECT_DOUBLE_EQ(m.thickness[t], m.regions[t] == Region::roof ? 3.0 : 1.5);
  }
}

TEST(Mesh, BadInputsRejected) {
  EXPECT_THROW(build_hemisphere_mesh(0.0, 2), Error);
  EXPECT_THROW(build_hemisphere_mesh(-1.0, 2), Error);
  EXPECT_THROW(build_hemisphere_mesh(20.0, 2, ThicknessProfile::constant(0.0)), Error);
}

TEST(Regions, SixTagsNoIslands) {
  const auto m = build_hemisphere_mesh(20.0, 3);
  std::set<Region> tags(m.regions.begin(), m.regions.end());
  EXPECT_EQ(tags.size(), 6u);
  EXPECT_EQ(count_region_islands(m), 0u);
  for (int r = 2; r <= 4; ++r) EXPECT_EQ(count_region_islands(build_hemisphere_mesh(20.0, r)), 0u);
}

TEST(Regions, RoofAreaFractionMatchesCap) {
  MeshOptions opt;
  opt.regions.roof_cap_deg = 30.0;
  const auto m = build_hemisphere_mesh(20.0, 4, ThicknessProfile::constant(2.0), opt);
  double roof = 0.0;
  double total = 0.0;
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    total += m.rest_area[t];
    if (m.regions[t] == Region::roof) roof += m.rest_area[t];
  }
  // cap area / hemisphere area = 1 - cos(30 deg)
  const double expected = 1.0 - std::cos(30.0 * std::numbers::pi / 180.0);
  EXPECT_NEAR(roof / total, expected, 0.02);
}

TEST(Regions, Idempotent) {
  auto m = build_hemisphere_mesh(20.0, 3);
  const auto before = m.regions;
  assign_regions(m);
  EXPECT_EQ(m.regions, before);
}

TEST(Fibers, EquatorialHorizontalAndPoleFallback) {
  const auto m = build_hemisphere_mesh(20.0, 4);
  bool saw_equator = false;
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    const Vec3 c = triangle_centroid(m.vertices, m.triangles[t]);
    if (colatitude_deg(c) > 85.0) {
      saw_equator = true;
      // the circumferential direction is horizontal; projection onto a tilted
      // triangle leaves a small z part at finite resolution
      EXPECT_LT(std::abs(m.fiber_dir[t].z()), 0.05);
    }
  }
  EXPECT_TRUE(saw_equator);
  // a triangle straddling the pole: build a single flat triangle around +z
  ShellMesh tiny;
  tiny.vertices = {Vec3(1, 0, 20), Vec3(-0.5, 0.866, 20), Vec3(-0.5, -0.866, 20)};
  tiny.triangles = {{0, 1, 2}};
  tiny.regions = {Region::roof};
  assign_fibers(tiny);
  EXPECT_NEAR(tiny.fiber_dir[0].x(), 1.0, 1e-12);
  EXPECT_NEAR(tiny.fiber_dir[0].dot(tiny.sheet_dir[0]), 0.0, 1e-12);
}

TEST(Volume, UnitHemisphereRefinement4) {
  const auto m = build_hemisphere_mesh(1.0, 4);
  const double exact = 2.0 * std::numbers::pi / 3.0;
  EXPECT_NEAR(enclosed_volume(m), exact, 0.005 * exact);
}

TEST(Volume, ScalesCubically) {
  const auto m = build_hemisphere_mesh(20.0, 2);
  const double v0 = enclosed_volume(m);
  Positions x = m.vertices;
  for (auto& p : x) p *= 1.3;
  EXPECT_NEAR(enclosed_volume(m, x), v0 * 1.3 * 1.3 * 1.3, 1e-9 * v0);
}

TEST(Volume, FlippedOrientationRejected) {
  auto m = build_hemisphere_mesh(20.0, 2);
  for (auto& t : m.triangles) std::swap(t[1], t[2]);
  EXPECT_THROW(enclosed_volume(m), Error);
}

TEST(Volume, OpenSurfaceRejected) {
  auto m = build_hemisphere_mesh(20.0, 2);
  // removing a wall triangle opens a second hole
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    if (m.regions[t] == Region::roof) {
      m.triangles.erase(m.triangles.begin() + static_cast<std::ptrdiff_t>(t));
      break;
    }
  }
  EXPECT_THROW(ClosedSurface{m}, Error);
}

TEST(Volume, ConvergesUnderRefinement) {
  const double exact = 2.0 * std::numbers::pi / 3.0;
  std::vector<double> err;
  for (int r = 1; r <= 4; ++r) err.push_back(std::abs(enclosed_volume(build_hemisphere_mesh(1.0, r)) - exact));
  // edge length halves per level: order >= 1 means the error at least halves
  for (std::size_t i = 1; i < err.size(); ++i) EXPECT_LT(err[i], 0.55 * err[i - 1]);
}

TEST(RegionalDisplacement, ZeroAndTranslation) {
  const auto m = build_hemisphere_mesh(20.0, 3);
  Positions u(m.vertex_count(), Vec3::Zero());
  auto r0 = regional_displacement(m, u);
  EXPECT_EQ(r0.global, 0.0);
  for (double v : r0.by_region) EXPECT_EQ(v, 0.0);
  const Vec3 t(0.3, -1.2, 0.4);
  std::fill(u.begin(), u.end(), t);
  auto r1 = regional_displacement(m, u);
  EXPECT_NEAR(r1.global, t.norm(), 1e-12);
  for (double v : r1.by_region) EXPECT_NEAR(v, t.norm(), 1e-12);
  std::fill(u.begin(), u.end(), Vec3(1, 0, 0));
  for (double v : regional_displacement(m, u).by_region) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(RegionalDisplacement, RoofOnlyOracle) {
  const auto m = build_hemisphere_mesh(20.0, 3);
  // move only vertices that touch no non-roof triangle
  std::vector<bool> roof_only(m.vertex_count(), true);
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    if (m.regions[t] != Region::roof) {
      for (int v : m.triangles[t]) roof_only[static_cast<std::size_t>(v)] = false;
    }
  }
  Positions u(m.vertex_count(), Vec3::Zero());
  for (std::size_t v = 0; v < u.size(); ++v) {
    if (roof_only[v]) u[v] = Vec3(0, 0, 0.5 + 0.01 * static_cast<double>(v % 7));
  }
  const auto r = regional_displacement(m, u);
  double roof_sum = 0.0;
  std::size_t roof_n = 0;
  std::size_t wall_n = 0;
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    if (m.regions[t] == Region::rim) continue;
    ++wall_n;
    if (m.regions[t] != Region::roof) continue;
    Vec3 c = Vec3::Zero();
    for (int v : m.triangles[t]) c += u[static_cast<std::size_t>(v)] / 3.0;
    roof_sum += c.norm();
    ++roof_n;
  }
  for (auto reg : kWallRegions) {
    if (reg != Region::roof) EXPECT_EQ(r[reg], 0.0);
  }
  EXPECT_NEAR(r[Region::roof], roof_sum / static_cast<double>(roof_n), 1e-12);
  EXPECT_NEAR(r.global, r[Region::roof] * static_cast<double>(roof_n) / static_cast<double>(wall_n), 1e-12);
}

TEST(RegionalDisplacement, MissingRegion) {
  auto m = build_hemisphere_mesh(20.0, 3);
  for (auto& r : m.regions) {
    if (r == Region::septum) r = Region::lateral;
  }
  Positions u(m.vertex_count(), Vec3::Zero());
  try {
    regional_displacement(m, u);
    FAIL() << "expected missing-region error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::missing_region);
  }
}

TEST(MeshIo, RoundTripExact) {
  const auto m = build_hemisphere_mesh(20.0, 2);
  std::stringstream s;
  s << "# leading comment\n";
  write_mesh(s, m);
  const auto r = read_mesh(s);
  ASSERT_EQ(r.vertex_count(), m.vertex_count());
  for (std::size_t i = 0; i < m.vertex_count(); ++i) EXPECT_EQ(r.vertices[i], m.vertices[i]);
  EXPECT_EQ(r.triangles, m.triangles);
  EXPECT_EQ(r.regions, m.regions);
  EXPECT_EQ(r.rim_vertex_ids, m.rim_vertex_ids);
  EXPECT_EQ(r.vein_patch_vertex_ids, m.vein_patch_vertex_ids);
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    EXPECT_EQ(r.fiber_dir[t], m.fiber_dir[t]);
    EXPECT_EQ(r.thickness[t], m.thickness[t]);
  }
  EXPECT_EQ(enclosed_volume(r), enclosed_volume(m));
}
