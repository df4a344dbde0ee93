#pragma once

#include <span>
#include <vector>

#include <Eigen/Geometry>

#include "phong/mesh.hpp"

namespace phong {

struct TriangleProjection {
  double v = 0.0;
  double w = 0.0;
  double distance_squared = 0.0;
};

// Exact closest point of x on triangle (a, b, c), as (v, w) in the domain
// where the point is (1-v-w)a + v b + w c.
TriangleProjection project_to_triangle(const Vec3& x, const Vec3& a, const Vec3& b,
                                       const Vec3& c);

struct ClosestPoint {
  SurfaceCoordinate coord;
  double distance_squared = 0.0;
};

// Exhaustive scan; ties go to the lowest triangle index.
ClosestPoint closest_point_brute_force(const ControlMesh& mesh, std::span<const Vec3> positions,
                                       const Vec3& x);

// Bounding-volume hierarchy over one posed configuration. Queries return
// exactly what the exhaustive scan returns, including the tie rule.
class ClosestPointIndex {
 public:
  ClosestPointIndex(const ControlMesh& mesh, std::span<const Vec3> positions);

  ClosestPoint query(const Vec3& x) const;

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    int left = -1;   // child nodes, or -1 for a leaf
    int right = -1;
    int begin = 0;   // leaf range into order_
    int end = 0;
  };

  int build(int begin, int end, const std::vector<Vec3>& centroids);

  const ControlMesh* mesh_;
  std::vector<Vec3> positions_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

SurfaceCoordinate closest_point(const ControlMesh& mesh, std::span<const Vec3> positions,
                                const Vec3& x);

}  // namespace phong
