#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "phong/mesh.hpp"
#include "phong/posed.hpp"

namespace phong {

// Axis-angle rotation. Below a rotation magnitude of 0.5 the coefficients
// sin(t)/t and (1-cos(t))/t^2 and their derivatives come from their power
// series, so the value and all derivatives stay smooth through zero.
Mat3 rotation_from_axis_angle(const Vec3& r);

// dR/dr_k for k = 0, 1, 2.
std::array<Mat3, 3> rotation_derivatives(const Vec3& r);

// Inverse of rotation_from_axis_angle with |r| in [0, pi].
Vec3 axis_angle_from_rotation(const Mat3& R);

// [t_x, t_y, t_z, r_x, r_y, r_z]
struct RigidPose {
  Eigen::Matrix<double, 6, 1> theta = Eigen::Matrix<double, 6, 1>::Zero();

  Vec3 translation() const { return theta.head<3>(); }
  Vec3 rotation_vector() const { return theta.tail<3>(); }
  Mat3 rotation() const { return rotation_from_axis_angle(rotation_vector()); }
};

PosedControlData pose_rigid(const ControlMesh& mesh, const RigidPose& pose,
                            bool with_jacobians = true);

// Anything that turns a parameter vector into posed control data over a
// fixed triangulation.
class PoseModel {
 public:
  virtual ~PoseModel() = default;
  virtual const ControlMesh& mesh() const = 0;
  virtual int num_params() const = 0;
  virtual PosedControlData pose(const Eigen::VectorXd& theta, bool with_jacobians) const = 0;
};

class RigidModel final : public PoseModel {
 public:
  explicit RigidModel(ControlMesh mesh) : mesh_(std::move(mesh)) {}
  const ControlMesh& mesh() const override { return mesh_; }
  int num_params() const override { return 6; }
  PosedControlData pose(const Eigen::VectorXd& theta, bool with_jacobians) const override;

 private:
  ControlMesh mesh_;
};

struct Joint {
  std::string name;
  int parent = -1;
  // Rest transform relative to the parent frame (world frame for the root).
  Eigen::Affine3d rest = Eigen::Affine3d::Identity();
};

// One revolute degree of freedom about `axis`, expressed in the joint frame.
struct JointDof {
  int joint = 0;
  Vec3 axis = Vec3::UnitZ();
};

struct SkinWeight {
  int vertex = 0;
  int joint = 0;
  double weight = 0.0;
};

enum class LbsNormalMode {
  // Normals blended by the rotational part of the skinning transform, then
  // renormalised per vertex.
  blended,
  // Area-weighted facet normals of the posed positions.
  recomputed,
};

// Linear blend skinning over a joint tree. Parameters: a root rigid 6-vector
// followed by one angle per JointDof. Joints must be listed parents first.
class SkinnedModel final : public PoseModel {
 public:
  SkinnedModel(ControlMesh mesh, std::vector<Joint> joints, std::vector<JointDof> dofs,
               std::vector<SkinWeight> weights);

  const ControlMesh& mesh() const override { return mesh_; }
  int num_params() const override { return 6 + static_cast<int>(dofs_.size()); }
  PosedControlData pose(const Eigen::VectorXd& theta, bool with_jacobians) const override;
  PosedControlData pose(const Eigen::VectorXd& theta, bool with_jacobians,
                        LbsNormalMode mode) const;

  const std::vector<Joint>& joints() const { return joints_; }
  const std::vector<JointDof>& dofs() const { return dofs_; }
  const std::vector<SkinWeight>& weights() const { return weights_; }

  // World transforms of every joint at theta.
  std::vector<Eigen::Affine3d> joint_transforms(const Eigen::VectorXd& theta) const;

  // Largest angle (radians) between blended and recomputed vertex normals.
  double normal_mode_divergence(const Eigen::VectorXd& theta) const;

  void set_normal_mode(LbsNormalMode mode) { normal_mode_ = mode; }
  LbsNormalMode normal_mode() const { return normal_mode_; }

 private:
  struct Influence {
    int joint;
    double weight;
  };

  ControlMesh mesh_;
  std::vector<Joint> joints_;
  std::vector<JointDof> dofs_;
  std::vector<SkinWeight> weights_;
  std::vector<std::vector<Influence>> influences_;  // per vertex
  std::vector<std::vector<int>> dof_ancestry_;      // per joint: dofs on the path to root
  std::vector<Eigen::Affine3d> inverse_bind_;
  LbsNormalMode normal_mode_ = LbsNormalMode::blended;
};

}  // namespace phong
