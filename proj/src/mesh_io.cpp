#include "phong/mesh_io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace phong {

namespace {

[[noreturn]] void parse_error(int line_no, const std::string& what) {
  throw MeshError("mesh line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

ControlMesh read_mesh(std::istream& in) {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
  std::vector<Triangle> triangles;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v" || tag == "vn") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z())) parse_error(line_no, "expected three numbers");
      if (tag == "v") {
        positions.push_back(p);
      } else {
        const double n = p.norm();
        if (!(n > 0.0)) parse_error(line_no, "zero-length normal");
        // Leave already-unit normals untouched so a reload is bit-exact.
        normals.push_back(std::abs(n - 1.0) > 1e-12 ? Vec3(p / n) : p);
      }
    } else if (tag == "f") {
      Triangle t;
      for (int& k : t) {
        if (!(ls >> k)) parse_error(line_no, "expected three vertex indices");
        k -= 1;
      }
      triangles.push_back(t);
    } else {
      parse_error(line_no, "unknown record '" + tag + "'");
    }
  }
  return ControlMesh(std::move(positions), std::move(normals), std::move(triangles));
}

ControlMesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open mesh file " + path);
  return read_mesh(in);
}

void write_mesh(std::ostream& out, const ControlMesh& mesh) {
  const auto old_precision = out.precision(17);
  for (const Vec3& p : mesh.positions()) {
    out << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  }
  for (const Vec3& n : mesh.normals()) {
    out << "vn " << n.x() << ' ' << n.y() << ' ' << n.z() << '\n';
  }
  for (const Triangle& t : mesh.triangles()) {
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
  out.precision(old_precision);
}

void save_mesh(const std::string& path, const ControlMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw MeshError("cannot write mesh file " + path);
  write_mesh(out, mesh);
}

}  // namespace phong
