#pragma once

#include "lacal/geometry.hpp"

#include <filesystem>
#include <iosfwd>

namespace lacal::geometry {

// Plain-text shell mesh, one record per line, indices 0-based:
//
//   format lacal-shell 1
//   radius <mm>
//   v <x> <y> <z>
//   t <i> <j> <k> <region>
//   a <fx> <fy> <fz> <sx> <sy> <sz> <thickness>   (one per triangle, same order as t)
//   rim <vertex>
//   vein <vertex>
//
// Lines starting with '#' are comments. Values are written with 17
// significant digits so a round trip is exact.

void write_mesh(std::ostream& out, const ShellMesh& mesh);
void write_mesh(const std::filesystem::path& path, const ShellMesh& mesh);
ShellMesh read_mesh(std::istream& in);
ShellMesh read_mesh(const std::filesystem::path& path);

}  // namespace lacal::geometry
