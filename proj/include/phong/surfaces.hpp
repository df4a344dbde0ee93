#pragma once

#include <string_view>
#include <utility>

#include "phong/mesh.hpp"
#include "phong/posed.hpp"

namespace phong {

enum class SurfaceType { phong, trimesh };

std::string_view to_string(SurfaceType type);
SurfaceType parse_surface_type(std::string_view name);

struct SurfaceEvaluation {
  Vec3 position = Vec3::Zero();
  Vec3 normal = Vec3::Zero();
  Vec3 dposition_dv = Vec3::Zero();
  Vec3 dposition_dw = Vec3::Zero();
  Vec3 dnormal_dv = Vec3::Zero();
  Vec3 dnormal_dw = Vec3::Zero();
  PoseJacobian dposition_dtheta;
  PoseJacobian dnormal_dtheta;
};

struct EvalFlags {
  bool coordinate_derivatives = true;
  // Requires the posed data to carry Jacobians.
  bool pose_derivatives = true;
};

inline constexpr double kMinInterpolatedNormal = 1e-8;

// Linear position with a normalised, linearly interpolated normal field.
// Throws DegenerateError when the interpolated direction is shorter than
// kMinInterpolatedNormal.
SurfaceEvaluation eval_phong(const ControlMesh& mesh, const PosedControlData& posed,
                             const SurfaceCoordinate& u, EvalFlags flags = {});

// Same geometry with the facet normal; normal derivatives in (v, w) are zero.
SurfaceEvaluation eval_trimesh(const ControlMesh& mesh, const PosedControlData& posed,
                               const SurfaceCoordinate& u, EvalFlags flags = {});

SurfaceEvaluation evaluate(SurfaceType type, const ControlMesh& mesh,
                           const PosedControlData& posed, const SurfaceCoordinate& u,
                           EvalFlags flags = {});

// Rest-pose data without Jacobians, for evaluating the mesh as stored.
PosedControlData rest_pose(const ControlMesh& mesh);

// Loop limit position and normal at a control vertex of a closed mesh.
// Center weight omega(n) = 3n / (8 alpha(n)) against unit 1-ring weights,
// with Warren's ring weight alpha(n) = 3/8 (n > 3), 9/16 (n = 3). The normal
// is the cross product of the cosine/sine tangent masks over the 1-ring taken
// in winding order.
std::pair<Vec3, Vec3> loop_limit_stencil(const ControlMesh& mesh, int vertex);

// Ordered 1-ring (counter-clockwise seen from the outside). Throws MeshError
// for boundary or non-manifold vertices.
std::vector<int> one_ring(const ControlMesh& mesh, int vertex);

// Replaces every control vertex with its Loop limit position and normal.
ControlMesh with_loop_limit_data(const ControlMesh& mesh);

}  // namespace phong
