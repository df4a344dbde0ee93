#include "phong/closest_point.hpp"

#include <algorithm>
#include <limits>
#include <utility>

namespace phong {

namespace {

constexpr int kLeafSize = 4;

bool better(double d2, int tri, double best_d2, int best_tri) {
  return d2 < best_d2 || (d2 == best_d2 && tri < best_tri);
}

TriangleProjection finish(const Vec3& x, const Vec3& a, const Vec3& b, const Vec3& c, double v,
                          double w) {
  const Vec3 p = (1.0 - v - w) * a + v * b + w * c;
  return {v, w, (x - p).squaredNorm()};
}

}  // namespace

// Region classification over the Voronoi regions of the triangle's features.
TriangleProjection project_to_triangle(const Vec3& x, const Vec3& a, const Vec3& b,
                                       const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ax = x - a;
  const double d1 = ab.dot(ax);
  const double d2 = ac.dot(ax);
  if (d1 <= 0.0 && d2 <= 0.0) return finish(x, a, b, c, 0.0, 0.0);

  const Vec3 bx = x - b;
  const double d3 = ab.dot(bx);
  const double d4 = ac.dot(bx);
  if (d3 >= 0.0 && d4 <= d3) return finish(x, a, b, c, 1.0, 0.0);

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    return finish(x, a, b, c, d1 / (d1 - d3), 0.0);
  }

  const Vec3 cx = x - c;
  const double d5 = ab.dot(cx);
  const double d6 = ac.dot(cx);
  if (d6 >= 0.0 && d5 <= d6) return finish(x, a, b, c, 0.0, 1.0);

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    return finish(x, a, b, c, 0.0, d2 / (d2 - d6));
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return finish(x, a, b, c, 1.0 - t, t);
  }

  const double denom = 1.0 / (va + vb + vc);
  return finish(x, a, b, c, vb * denom, vc * denom);
}

ClosestPoint closest_point_brute_force(const ControlMesh& mesh, std::span<const Vec3> positions,
                                       const Vec3& x) {
  ClosestPoint best;
  best.distance_squared = std::numeric_limits<double>::infinity();
  best.coord.patch = -1;
  const auto& tris = mesh.triangles();
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const TriangleProjection pr =
        project_to_triangle(x, positions[tris[t][0]], positions[tris[t][1]], positions[tris[t][2]]);
    if (best.coord.patch < 0 || better(pr.distance_squared, t, best.distance_squared, best.coord.patch)) {
      best = {{t, pr.v, pr.w}, pr.distance_squared};
    }
  }
  return best;
}

ClosestPointIndex::ClosestPointIndex(const ControlMesh& mesh, std::span<const Vec3> positions)
    : mesh_(&mesh), positions_(positions.begin(), positions.end()) {
  const int n = mesh.num_triangles();
  std::vector<Vec3> centroids(n);
  order_.resize(n);
  for (int t = 0; t < n; ++t) {
    const auto& tri = mesh.triangles()[t];
    centroids[t] = (positions_[tri[0]] + positions_[tri[1]] + positions_[tri[2]]) / 3.0;
    order_[t] = t;
  }
  nodes_.reserve(2 * n / kLeafSize + 2);
  if (n > 0) build(0, n, centroids);
}

int ClosestPointIndex::build(int begin, int end, const std::vector<Vec3>& centroids) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box;
  box.setEmpty();
  for (int i = begin; i < end; ++i) {
    for (int k : mesh_->triangles()[order_[i]]) box.extend(positions_[k]);
  }
  nodes_[id].box = box;
  if (end - begin <= kLeafSize) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  Eigen::AlignedBox3d cbox;
  cbox.setEmpty();
  for (int i = begin; i < end; ++i) cbox.extend(centroids[order_[i]]);
  int axis = 0;
  cbox.sizes().maxCoeff(&axis);
  const int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     const double ca = centroids[a][axis];
                     const double cb = centroids[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const int left = build(begin, mid, centroids);
  const int right = build(mid, end, centroids);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

ClosestPoint ClosestPointIndex::query(const Vec3& x) const {
  ClosestPoint best;
  best.distance_squared = std::numeric_limits<double>::infinity();
  best.coord.patch = -1;
  if (nodes_.empty()) return best;

  const auto& tris = mesh_->triangles();
  std::vector<std::pair<double, int>> stack;
  stack.reserve(64);
  stack.emplace_back(nodes_[0].box.squaredExteriorDistance(x), 0);
  while (!stack.empty()) {
    const auto [bound, id] = stack.back();
    stack.pop_back();
    // Equal bounds are still visited so that lower-index ties are found; the
    // slack covers rounding in the per-triangle distance.
    if (bound > best.distance_squared * (1.0 + 1e-12)) continue;
    const Node& node = nodes_[id];
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int t = order_[i];
        const TriangleProjection pr = project_to_triangle(
            x, positions_[tris[t][0]], positions_[tris[t][1]], positions_[tris[t][2]]);
        if (best.coord.patch < 0 ||
            better(pr.distance_squared, t, best.distance_squared, best.coord.patch)) {
          best = {{t, pr.v, pr.w}, pr.distance_squared};
        }
      }
      continue;
    }
    const double dl = nodes_[node.left].box.squaredExteriorDistance(x);
    const double dr = nodes_[node.right].box.squaredExteriorDistance(x);
    // Push the farther child first so the nearer one is processed next.
    if (dl <= dr) {
      stack.emplace_back(dr, node.right);
      stack.emplace_back(dl, node.left);
    } else {
      stack.emplace_back(dl, node.left);
      stack.emplace_back(dr, node.right);
    }
  }
  return best;
}

SurfaceCoordinate closest_point(const ControlMesh& mesh, std::span<const Vec3> positions,
                                const Vec3& x) {
  return ClosestPointIndex(mesh, positions).query(x).coord;
}

}  // namespace phong
