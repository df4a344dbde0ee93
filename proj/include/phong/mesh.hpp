#pragma once

#include <array>
#include <span>
#include <vector>

#include "phong/types.hpp"

namespace phong {

using Triangle = std::array<int, 3>;

// Location on a triangulated surface: patch index plus the (v, w) pair of the
// unit-triangle domain. The point is (1-v-w)*P0 + v*P1 + w*P2.
struct SurfaceCoordinate {
  int patch = 0;
  double v = 0.0;
  double w = 0.0;

  bool operator==(const SurfaceCoordinate&) const = default;
};

// Local edge e of a triangle joins corners e and (e+1)%3; it is the edge on
// which the barycentric weight of corner (e+2)%3 vanishes.
struct EdgeLink {
  int triangle = -1;
  int edge = -1;
  // True when the neighbour traverses the shared edge in the same vertex
  // order (inconsistently oriented pair).
  bool same_direction = false;

  bool is_boundary() const { return triangle < 0; }
};

using EdgeAdjacency = std::vector<std::array<EdgeLink, 3>>;

// Throws MeshError naming the offending edge if more than two triangles share it.
EdgeAdjacency build_adjacency(std::span<const Triangle> triangles);

class ControlMesh {
 public:
  ControlMesh() = default;
  ControlMesh(std::vector<Vec3> positions, std::vector<Vec3> normals,
              std::vector<Triangle> triangles);

  const std::vector<Vec3>& positions() const { return positions_; }
  const std::vector<Vec3>& normals() const { return normals_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const EdgeAdjacency& adjacency() const { return adjacency_; }

  int num_vertices() const { return static_cast<int>(positions_.size()); }
  int num_triangles() const { return static_cast<int>(triangles_.size()); }

  const EdgeLink& neighbour(int triangle, int edge) const {
    return adjacency_[triangle][edge];
  }

  int num_boundary_edges() const;
  int num_interior_edges() const;
  bool is_closed() const { return num_boundary_edges() == 0; }

  double triangle_area(int t) const;

  // Position on the rest geometry.
  Vec3 point(const SurfaceCoordinate& u) const;

 private:
  std::vector<Vec3> positions_;
  std::vector<Vec3> normals_;
  std::vector<Triangle> triangles_;
  EdgeAdjacency adjacency_;
};

// Validity with slack; clamping pushes tiny negatives back onto the domain.
bool is_valid(const SurfaceCoordinate& u, double slack = 1e-12);
SurfaceCoordinate clamp_to_domain(SurfaceCoordinate u);

Eigen::Vector3d barycentric(const SurfaceCoordinate& u);

// Re-expresses a domain step that leaves triangle `from_edge`'s owner through
// that edge in the (v, w) basis of the neighbour. The neighbour is unfolded
// across the shared edge as a parallelogram, so the map keeps weight sums and
// is its own inverse.
Vec2 remap_across_edge(const Vec2& delta, int from_edge, const EdgeLink& link);

struct WalkResult {
  SurfaceCoordinate coord;
  int crossings = 0;
  bool hit_boundary = false;
  bool hit_crossing_cap = false;

  bool truncated() const { return hit_boundary || hit_crossing_cap; }
};

inline constexpr int kDefaultMaxCrossings = 64;

WalkResult walk(const ControlMesh& mesh, const SurfaceCoordinate& start,
                const Vec2& delta, int max_crossings = kDefaultMaxCrossings);

}  // namespace phong
