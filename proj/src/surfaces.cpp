#include "phong/surfaces.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include <Eigen/Geometry>

namespace phong {

namespace {

Mat3 skew(const Vec3& a) {
  Mat3 m;
  m << 0.0, -a.z(), a.y(), a.z(), 0.0, -a.x(), -a.y(), a.x(), 0.0;
  return m;
}

void require_pose_jacobians(const PosedControlData& posed) {
  if (!posed.has_jacobians()) {
    throw Error("pose derivatives requested from posed data without Jacobians");
  }
}

}  // namespace

std::string_view to_string(SurfaceType type) {
  switch (type) {
    case SurfaceType::phong:
      return "phong";
    case SurfaceType::trimesh:
      return "trimesh";
  }
  return "unknown";
}

SurfaceType parse_surface_type(std::string_view name) {
  if (name == "phong") return SurfaceType::phong;
  if (name == "trimesh") return SurfaceType::trimesh;
  throw ConfigError("unknown surface type '" + std::string(name) + "'");
}

SurfaceEvaluation eval_phong(const ControlMesh& mesh, const PosedControlData& posed,
                             const SurfaceCoordinate& u, EvalFlags flags) {
  const Triangle& tri = mesh.triangles()[u.patch];
  const double l0 = 1.0 - u.v - u.w;
  const Vec3& p0 = posed.positions[tri[0]];
  const Vec3& p1 = posed.positions[tri[1]];
  const Vec3& p2 = posed.positions[tri[2]];
  const Vec3& n0 = posed.normals[tri[0]];
  const Vec3& n1 = posed.normals[tri[1]];
  const Vec3& n2 = posed.normals[tri[2]];

  SurfaceEvaluation out;
  out.position = l0 * p0 + u.v * p1 + u.w * p2;
  const Vec3 c = l0 * n0 + u.v * n1 + u.w * n2;
  const double c_norm = c.norm();
  if (!(c_norm > kMinInterpolatedNormal)) {
    throw DegenerateError("interpolated normal vanishes on patch " + std::to_string(u.patch),
                          u.patch);
  }
  out.normal = c / c_norm;

  if (!flags.coordinate_derivatives && !flags.pose_derivatives) return out;

  // d(c/|c|) = (I - n n^T) dc / |c|
  const Mat3 project = (Mat3::Identity() - out.normal * out.normal.transpose()) / c_norm;

  if (flags.coordinate_derivatives) {
    out.dposition_dv = p1 - p0;
    out.dposition_dw = p2 - p0;
    out.dnormal_dv = project * (n1 - n0);
    out.dnormal_dw = project * (n2 - n0);
  }
  if (flags.pose_derivatives) {
    require_pose_jacobians(posed);
    out.dposition_dtheta = l0 * posed.position_block(tri[0]) +
                           u.v * posed.position_block(tri[1]) +
                           u.w * posed.position_block(tri[2]);
    out.dnormal_dtheta = project * (l0 * posed.normal_block(tri[0]) +
                                    u.v * posed.normal_block(tri[1]) +
                                    u.w * posed.normal_block(tri[2]));
  }
  return out;
}

SurfaceEvaluation eval_trimesh(const ControlMesh& mesh, const PosedControlData& posed,
                               const SurfaceCoordinate& u, EvalFlags flags) {
  const Triangle& tri = mesh.triangles()[u.patch];
  const double l0 = 1.0 - u.v - u.w;
  const Vec3& p0 = posed.positions[tri[0]];
  const Vec3& p1 = posed.positions[tri[1]];
  const Vec3& p2 = posed.positions[tri[2]];

  SurfaceEvaluation out;
  out.position = l0 * p0 + u.v * p1 + u.w * p2;
  const Vec3 e1 = p1 - p0;
  const Vec3 e2 = p2 - p0;
  const Vec3 c = e1.cross(e2);
  const double c_norm = c.norm();
  if (!(c_norm > 0.0)) {
    throw DegenerateError("posed facet " + std::to_string(u.patch) + " has zero area",
                          u.patch);
  }
  out.normal = c / c_norm;

  if (flags.coordinate_derivatives) {
    out.dposition_dv = e1;
    out.dposition_dw = e2;
  }
  if (flags.pose_derivatives) {
    require_pose_jacobians(posed);
    const auto j0 = posed.position_block(tri[0]);
    const auto j1 = posed.position_block(tri[1]);
    const auto j2 = posed.position_block(tri[2]);
    out.dposition_dtheta = l0 * j0 + u.v * j1 + u.w * j2;
    const PoseJacobian de1 = j1 - j0;
    const PoseJacobian de2 = j2 - j0;
    const Mat3 project = (Mat3::Identity() - out.normal * out.normal.transpose()) / c_norm;
    out.dnormal_dtheta = project * (skew(e1) * de2 - skew(e2) * de1);
  }
  return out;
}

SurfaceEvaluation evaluate(SurfaceType type, const ControlMesh& mesh,
                           const PosedControlData& posed, const SurfaceCoordinate& u,
                           EvalFlags flags) {
  return type == SurfaceType::phong ? eval_phong(mesh, posed, u, flags)
                                    : eval_trimesh(mesh, posed, u, flags);
}

PosedControlData rest_pose(const ControlMesh& mesh) {
  PosedControlData posed;
  posed.positions = mesh.positions();
  posed.normals = mesh.normals();
  return posed;
}

std::vector<int> one_ring(const ControlMesh& mesh, int vertex) {
  std::map<int, int> next_of;
  for (const Triangle& t : mesh.triangles()) {
    for (int k = 0; k < 3; ++k) {
      if (t[k] != vertex) continue;
      const int a = t[(k + 1) % 3];
      const int b = t[(k + 2) % 3];
      if (!next_of.emplace(a, b).second) {
        throw MeshError("vertex " + std::to_string(vertex) + " is non-manifold");
      }
    }
  }
  if (next_of.size() < 3) {
    throw MeshError("vertex " + std::to_string(vertex) + " has valence below 3");
  }

  std::vector<int> ring;
  int current = next_of.begin()->first;
  for (std::size_t i = 0; i < next_of.size(); ++i) {
    ring.push_back(current);
    const auto it = next_of.find(current);
    if (it == next_of.end()) {
      throw MeshError("vertex " + std::to_string(vertex) +
                      " lies on a boundary; limit stencils need a closed mesh");
    }
    current = it->second;
  }
  if (current != ring.front()) {
    throw MeshError("1-ring of vertex " + std::to_string(vertex) + " does not close");
  }
  return ring;
}

std::pair<Vec3, Vec3> loop_limit_stencil(const ControlMesh& mesh, int vertex) {
  const std::vector<int> ring = one_ring(mesh, vertex);
  const int n = static_cast<int>(ring.size());
  const auto& pos = mesh.positions();

  const double alpha = n == 3 ? 9.0 / 16.0 : 3.0 / 8.0;
  const double omega = 3.0 * n / (8.0 * alpha);

  Vec3 ring_sum = Vec3::Zero();
  Vec3 t1 = Vec3::Zero();
  Vec3 t2 = Vec3::Zero();
  for (int j = 0; j < n; ++j) {
    const Vec3& q = pos[ring[j]];
    const double angle = 2.0 * std::numbers::pi * j / n;
    ring_sum += q;
    t1 += std::cos(angle) * q;
    t2 += std::sin(angle) * q;
  }
  const Vec3 limit = (omega * pos[vertex] + ring_sum) / (omega + n);
  const Vec3 normal = t1.cross(t2);
  const double len = normal.norm();
  if (!(len > 0.0)) {
    throw DegenerateError("limit tangents are parallel at vertex " + std::to_string(vertex),
                          -1);
  }
  return {limit, normal / len};
}

ControlMesh with_loop_limit_data(const ControlMesh& mesh) {
  std::vector<Vec3> positions(mesh.num_vertices());
  std::vector<Vec3> normals(mesh.num_vertices());
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    std::tie(positions[i], normals[i]) = loop_limit_stencil(mesh, i);
  }
  return ControlMesh(std::move(positions), std::move(normals), mesh.triangles());
}

}  // namespace phong
