#pragma once

#include <iosfwd>
#include <string>

#include "phong/mesh.hpp"

namespace phong {

// Plain-text control mesh: `v x y z`, `vn x y z` (paired with vertices by
// order) and `f i j k` with 1-based indices. Blank lines and `#` comments are
// skipped. Normals are renormalised on load.
ControlMesh read_mesh(std::istream& in);
ControlMesh load_mesh(const std::string& path);

// Writes with 17 significant digits so that a reload is bit-exact.
void write_mesh(std::ostream& out, const ControlMesh& mesh);
void save_mesh(const std::string& path, const ControlMesh& mesh);

}  // namespace phong
