#include "phong/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <utility>

namespace phong {

namespace {

struct HalfEdgeRef {
  int triangle;
  int edge;
  int from;  // vertex at corner `edge`
};

// Barycentric slot of a corner inside a neighbour, given the shared edge link.
struct SlotMap {
  int a, b, opposite;
};

SlotMap neighbour_slots(const EdgeLink& link) {
  const int f = link.edge;
  const int f1 = (f + 1) % 3;
  // Corner e of the source maps to the neighbour corner holding the same vertex.
  if (link.same_direction) return {f, f1, (f + 2) % 3};
  return {f1, f, (f + 2) % 3};
}

Eigen::Vector3d remap_weights(const Eigen::Vector3d& lam, int from_edge,
                              const EdgeLink& link) {
  const int a = from_edge;
  const int b = (from_edge + 1) % 3;
  const int c = (from_edge + 2) % 3;
  const SlotMap s = neighbour_slots(link);
  Eigen::Vector3d out;
  // Unfold the neighbour across the shared edge: its opposite corner sits at
  // a + b - c in this domain. Keeps weight sums, and is its own inverse.
  out[s.a] = lam[a] + lam[c];
  out[s.b] = lam[b] + lam[c];
  out[s.opposite] = -lam[c];
  return out;
}

}  // namespace

EdgeAdjacency build_adjacency(std::span<const Triangle> triangles) {
  std::map<std::pair<int, int>, std::vector<HalfEdgeRef>> edges;
  for (int t = 0; t < static_cast<int>(triangles.size()); ++t) {
    for (int e = 0; e < 3; ++e) {
      const int a = triangles[t][e];
      const int b = triangles[t][(e + 1) % 3];
      edges[{std::min(a, b), std::max(a, b)}].push_back({t, e, a});
    }
  }

  EdgeAdjacency adjacency(triangles.size());
  for (const auto& [key, refs] : edges) {
    if (refs.size() > 2) {
      std::ostringstream msg;
      msg << "non-manifold edge (" << key.first << ", " << key.second
          << ") shared by " << refs.size() << " triangles";
      throw MeshError(msg.str());
    }
    if (refs.size() == 2) {
      const HalfEdgeRef& p = refs[0];
      const HalfEdgeRef& q = refs[1];
      const bool same = p.from == q.from;
      adjacency[p.triangle][p.edge] = {q.triangle, q.edge, same};
      adjacency[q.triangle][q.edge] = {p.triangle, p.edge, same};
    }
  }
  return adjacency;
}

ControlMesh::ControlMesh(std::vector<Vec3> positions, std::vector<Vec3> normals,
                         std::vector<Triangle> triangles)
    : positions_(std::move(positions)),
      normals_(std::move(normals)),
      triangles_(std::move(triangles)) {
  if (normals_.size() != positions_.size()) {
    throw MeshError("vertex normal count does not match vertex count");
  }
  for (std::size_t i = 0; i < normals_.size(); ++i) {
    if (std::abs(normals_[i].norm() - 1.0) > 1e-9) {
      throw MeshError("vertex normal " + std::to_string(i) + " is not unit length");
    }
  }
  const int n = num_vertices();
  for (int t = 0; t < num_triangles(); ++t) {
    for (int k : triangles_[t]) {
      if (k < 0 || k >= n) {
        throw MeshError("triangle " + std::to_string(t) + " references vertex " +
                        std::to_string(k) + " out of range");
      }
    }
    if (!(triangle_area(t) > 0.0)) {
      throw MeshError("triangle " + std::to_string(t) + " is degenerate");
    }
  }
  adjacency_ = build_adjacency(triangles_);
}

int ControlMesh::num_boundary_edges() const {
  int count = 0;
  for (const auto& links : adjacency_) {
    for (const auto& l : links) count += l.is_boundary() ? 1 : 0;
  }
  return count;
}

int ControlMesh::num_interior_edges() const {
  return (3 * num_triangles() - num_boundary_edges()) / 2;
}

double ControlMesh::triangle_area(int t) const {
  const auto& tri = triangles_[t];
  const Vec3 e1 = positions_[tri[1]] - positions_[tri[0]];
  const Vec3 e2 = positions_[tri[2]] - positions_[tri[0]];
  return 0.5 * e1.cross(e2).norm();
}

Vec3 ControlMesh::point(const SurfaceCoordinate& u) const {
  const auto& tri = triangles_[u.patch];
  return (1.0 - u.v - u.w) * positions_[tri[0]] + u.v * positions_[tri[1]] +
         u.w * positions_[tri[2]];
}

bool is_valid(const SurfaceCoordinate& u, double slack) {
  return u.v >= -slack && u.w >= -slack && u.v + u.w <= 1.0 + slack;
}

SurfaceCoordinate clamp_to_domain(SurfaceCoordinate u) {
  u.v = std::max(u.v, 0.0);
  u.w = std::max(u.w, 0.0);
  const double s = u.v + u.w;
  if (s > 1.0) {
    u.v /= s;
    u.w /= s;
  }
  return u;
}

Eigen::Vector3d barycentric(const SurfaceCoordinate& u) {
  return {1.0 - u.v - u.w, u.v, u.w};
}

Vec2 remap_across_edge(const Vec2& delta, int from_edge, const EdgeLink& link) {
  const Eigen::Vector3d d(-delta.x() - delta.y(), delta.x(), delta.y());
  const Eigen::Vector3d out = remap_weights(d, from_edge, link);
  return {out[1], out[2]};
}

WalkResult walk(const ControlMesh& mesh, const SurfaceCoordinate& start,
                const Vec2& delta, int max_crossings) {
  WalkResult result;
  int patch = start.patch;
  Eigen::Vector3d lam = barycentric(start);
  Eigen::Vector3d step(-delta.x() - delta.y(), delta.x(), delta.y());
  int entered_edge = -1;

  for (;;) {
    int exit_edge = -1;
    double exit_r = 0.0;
    for (int e = 0; e < 3; ++e) {
      if (e == entered_edge) continue;
      const int opp = (e + 2) % 3;
      if (!(step[opp] < 0.0)) continue;
      const double r = std::max(lam[opp], 0.0) / -step[opp];
      if (exit_edge < 0 || r < exit_r) {
        exit_edge = e;
        exit_r = r;
      }
    }

    if (exit_edge < 0 || exit_r >= 1.0) {
      lam += step;
      break;
    }

    lam += exit_r * step;
    lam[(exit_edge + 2) % 3] = 0.0;
    const EdgeLink& link = mesh.neighbour(patch, exit_edge);
    if (link.is_boundary()) {
      result.hit_boundary = true;
      break;
    }
    if (result.crossings >= max_crossings) {
      result.hit_crossing_cap = true;
      break;
    }

    const Eigen::Vector3d rest = (1.0 - exit_r) * step;
    lam = remap_weights(lam, exit_edge, link);
    step = remap_weights(rest, exit_edge, link);
    patch = link.triangle;
    entered_edge = link.edge;
    ++result.crossings;
  }

  result.coord = clamp_to_domain({patch, lam[1], lam[2]});
  return result;
}

}  // namespace phong
