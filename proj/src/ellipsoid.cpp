#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "phong/bench.hpp"
#include "phong/surfaces.hpp"

namespace phong::bench {

namespace {

struct SphereMesh {
  std::vector<Vec3> points;  // unit length
  std::vector<Triangle> triangles;
};

SphereMesh icosahedron() {
  const double g = std::numbers::phi;
  SphereMesh m;
  for (double s : {-1.0, 1.0}) {
    for (double t : {-1.0, 1.0}) {
      m.points.emplace_back(s, t * g, 0.0);
      m.points.emplace_back(0.0, s, t * g);
      m.points.emplace_back(t * g, 0.0, s);
    }
  }
  // Faces are the triples of mutually adjacent vertices (edge length 2).
  const int n = static_cast<int>(m.points.size());
  auto adjacent = [&](int i, int j) {
    return std::abs((m.points[i] - m.points[j]).norm() - 2.0) < 1e-9;
  };
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (int k = j + 1; k < n; ++k) {
        if (!adjacent(i, j) || !adjacent(j, k) || !adjacent(i, k)) continue;
        const Vec3 nrm = (m.points[j] - m.points[i]).cross(m.points[k] - m.points[i]);
        const Vec3 centre = m.points[i] + m.points[j] + m.points[k];
        if (nrm.dot(centre) > 0.0) {
          m.triangles.push_back({i, j, k});
        } else {
          m.triangles.push_back({i, k, j});
        }
      }
    }
  }
  for (Vec3& p : m.points) p.normalize();
  return m;
}

SphereMesh subdivide(const SphereMesh& in) {
  SphereMesh out;
  out.points = in.points;
  std::map<std::pair<int, int>, int> midpoints;
  auto midpoint = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    const auto it = midpoints.find(key);
    if (it != midpoints.end()) return it->second;
    out.points.push_back((in.points[a] + in.points[b]).normalized());
    const int id = static_cast<int>(out.points.size()) - 1;
    midpoints.emplace(key, id);
    return id;
  };
  for (const Triangle& t : in.triangles) {
    const int ab = midpoint(t[0], t[1]);
    const int bc = midpoint(t[1], t[2]);
    const int ca = midpoint(t[2], t[0]);
    out.triangles.push_back({t[0], ab, ca});
    out.triangles.push_back({t[1], bc, ab});
    out.triangles.push_back({t[2], ca, bc});
    out.triangles.push_back({ab, bc, ca});
  }
  return out;
}

}  // namespace

ControlMesh ellipsoid_control_mesh(int facets) {
  SphereMesh sphere = icosahedron();
  int count = 20;
  while (count < facets) {
    sphere = subdivide(sphere);
    count *= 4;
  }
  if (count != facets) {
    throw Error("ellipsoid facet count must be 20 * 4^k, got " + std::to_string(facets));
  }
  const Vec3 radii(kEllipsoidRadii[0], kEllipsoidRadii[1], kEllipsoidRadii[2]);
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
  for (const Vec3& p : sphere.points) {
    const Vec3 x = p.cwiseProduct(radii);
    positions.push_back(x);
    normals.push_back(x.cwiseQuotient(radii.cwiseProduct(radii)).normalized());
  }
  return ControlMesh(std::move(positions), std::move(normals), std::move(sphere.triangles));
}

ControlMesh make_ellipsoid(int facets) {
  if (facets != 320 && facets != 1280) {
    throw Error("ellipsoid model supports 320 or 1280 facets, got " + std::to_string(facets));
  }
  return with_loop_limit_data(ellipsoid_control_mesh(facets));
}

}  // namespace phong::bench
