#pragma once

#include <vector>

#include <Eigen/Core>

#include "phong/types.hpp"

namespace phong {

// Control vertices and normals at a pose, optionally with their pose
// Jacobians stacked as 3N x P (rows 3i..3i+2 belong to vertex i).
struct PosedControlData {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
  Eigen::MatrixXd position_jacobian;
  Eigen::MatrixXd normal_jacobian;
  int num_params = 0;

  bool has_jacobians() const { return position_jacobian.rows() > 0; }

  auto position_block(int vertex) const {
    return position_jacobian.middleRows<3>(3 * vertex);
  }
  auto normal_block(int vertex) const {
    return normal_jacobian.middleRows<3>(3 * vertex);
  }
};

}  // namespace phong
