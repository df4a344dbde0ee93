#include "phong/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace phong {

namespace {

Mat3 skew(const Vec3& a) {
  Mat3 m;
  m << 0.0, -a.z(), a.y(), a.z(), 0.0, -a.x(), -a.y(), a.x(), 0.0;
  return m;
}

// Coefficients of R = I + a K + b K^2 as functions of s = |r|^2, with their
// s-derivatives.
struct RodriguesCoefficients {
  double a, b, da, db;
};

constexpr double kSeriesThreshold = 0.5;

RodriguesCoefficients rodrigues_coefficients(double s) {
  RodriguesCoefficients c{};
  const double t = std::sqrt(s);
  if (t < kSeriesThreshold) {
    // a = sum (-1)^k s^k / (2k+1)!,  b = sum (-1)^k s^k / (2k+2)!
    double fa = 1.0;  // 1/(2k+1)!
    double fb = 0.5;  // 1/(2k+2)!
    double sk = 1.0;  // s^k
    double skm1 = 0.0;
    double sign = 1.0;
    for (int k = 0; k < 12; ++k) {
      c.a += sign * sk * fa;
      c.b += sign * sk * fb;
      if (k > 0) {
        c.da += sign * k * skm1 * fa;
        c.db += sign * k * skm1 * fb;
      }
      skm1 = sk;
      sk *= s;
      sign = -sign;
      fa /= (2.0 * k + 2.0) * (2.0 * k + 3.0);
      fb /= (2.0 * k + 3.0) * (2.0 * k + 4.0);
    }
    return c;
  }
  const double st = std::sin(t);
  const double ct = std::cos(t);
  c.a = st / t;
  c.b = (1.0 - ct) / s;
  c.da = (t * ct - st) / (2.0 * s * t);
  c.db = (t * st - 2.0 * (1.0 - ct)) / (2.0 * s * s);
  return c;
}

const std::array<Mat3, 3>& generators() {
  static const std::array<Mat3, 3> g{skew(Vec3::UnitX()), skew(Vec3::UnitY()),
                                     skew(Vec3::UnitZ())};
  return g;
}

}  // namespace

Mat3 rotation_from_axis_angle(const Vec3& r) {
  const RodriguesCoefficients c = rodrigues_coefficients(r.squaredNorm());
  const Mat3 K = skew(r);
  return Mat3::Identity() + c.a * K + c.b * K * K;
}

std::array<Mat3, 3> rotation_derivatives(const Vec3& r) {
  const RodriguesCoefficients c = rodrigues_coefficients(r.squaredNorm());
  const Mat3 K = skew(r);
  const Mat3 K2 = K * K;
  std::array<Mat3, 3> d;
  for (int k = 0; k < 3; ++k) {
    const Mat3& E = generators()[k];
    d[k] = c.a * E + c.b * (E * K + K * E) + 2.0 * r[k] * (c.da * K + c.db * K2);
  }
  return d;
}

Vec3 axis_angle_from_rotation(const Mat3& R) {
  const Eigen::AngleAxisd aa(R);
  return aa.angle() * aa.axis();
}

PosedControlData pose_rigid(const ControlMesh& mesh, const RigidPose& pose,
                            bool with_jacobians) {
  const int n = mesh.num_vertices();
  const Mat3 R = pose.rotation();
  const Vec3 t = pose.translation();

  PosedControlData out;
  out.num_params = 6;
  out.positions.resize(n);
  out.normals.resize(n);
  for (int i = 0; i < n; ++i) {
    out.positions[i] = R * mesh.positions()[i] + t;
    out.normals[i] = R * mesh.normals()[i];
  }
  if (!with_jacobians) return out;

  const auto dR = rotation_derivatives(pose.rotation_vector());
  out.position_jacobian.setZero(3 * n, 6);
  out.normal_jacobian.setZero(3 * n, 6);
  for (int i = 0; i < n; ++i) {
    out.position_jacobian.block<3, 3>(3 * i, 0).setIdentity();
    for (int k = 0; k < 3; ++k) {
      out.position_jacobian.block<3, 1>(3 * i, 3 + k) = dR[k] * mesh.positions()[i];
      out.normal_jacobian.block<3, 1>(3 * i, 3 + k) = dR[k] * mesh.normals()[i];
    }
  }
  return out;
}

PosedControlData RigidModel::pose(const Eigen::VectorXd& theta, bool with_jacobians) const {
  if (theta.size() != 6) throw Error("rigid pose expects 6 parameters");
  RigidPose p;
  p.theta = theta;
  return pose_rigid(mesh_, p, with_jacobians);
}

SkinnedModel::SkinnedModel(ControlMesh mesh, std::vector<Joint> joints,
                           std::vector<JointDof> dofs, std::vector<SkinWeight> weights)
    : mesh_(std::move(mesh)),
      joints_(std::move(joints)),
      dofs_(std::move(dofs)),
      weights_(std::move(weights)) {
  const int nj = static_cast<int>(joints_.size());
  if (nj == 0) throw Error("skinned model needs at least one joint");
  for (int j = 0; j < nj; ++j) {
    const int p = joints_[j].parent;
    if ((j == 0) != (p < 0) || p >= j) {
      throw Error("joint '" + joints_[j].name +
                  "': joints must be listed parents first with a single root at index 0");
    }
  }
  if (num_params() > kMaxPoseParams) throw Error("too many skinning parameters");
  for (const JointDof& d : dofs_) {
    if (d.joint <= 0 || d.joint >= nj) {
      throw Error("joint degree of freedom must reference a non-root joint");
    }
    if (std::abs(d.axis.norm() - 1.0) > 1e-9) throw Error("joint axis must be unit length");
  }

  influences_.assign(mesh_.num_vertices(), {});
  for (const SkinWeight& w : weights_) {
    if (w.vertex < 0 || w.vertex >= mesh_.num_vertices() || w.joint < 0 || w.joint >= nj) {
      throw Error("skin weight references an unknown vertex or joint");
    }
    if (w.weight < 0.0) throw Error("skin weights must be nonnegative");
    if (w.weight > 0.0) influences_[w.vertex].push_back({w.joint, w.weight});
  }
  for (int i = 0; i < mesh_.num_vertices(); ++i) {
    double sum = 0.0;
    for (const Influence& inf : influences_[i]) sum += inf.weight;
    if (std::abs(sum - 1.0) > 1e-9) {
      throw Error("skin weights of vertex " + std::to_string(i) + " do not sum to 1");
    }
  }

  dof_ancestry_.assign(nj, {});
  for (int j = 0; j < nj; ++j) {
    for (int a = j; a > 0; a = joints_[a].parent) {
      for (int d = 0; d < static_cast<int>(dofs_.size()); ++d) {
        if (dofs_[d].joint == a) dof_ancestry_[j].push_back(d);
      }
    }
  }

  const auto bind = joint_transforms(Eigen::VectorXd::Zero(num_params()));
  inverse_bind_.resize(nj);
  for (int j = 0; j < nj; ++j) inverse_bind_[j] = bind[j].inverse();
}

std::vector<Eigen::Affine3d> SkinnedModel::joint_transforms(const Eigen::VectorXd& theta) const {
  const int nj = static_cast<int>(joints_.size());
  std::vector<Eigen::Affine3d> global(nj);
  Eigen::Affine3d root = Eigen::Affine3d::Identity();
  root.linear() = rotation_from_axis_angle(theta.segment<3>(3));
  root.translation() = theta.head<3>();
  for (int j = 0; j < nj; ++j) {
    Eigen::Affine3d g = j == 0 ? root * joints_[0].rest : global[joints_[j].parent] * joints_[j].rest;
    for (int d = 0; d < static_cast<int>(dofs_.size()); ++d) {
      if (dofs_[d].joint != j) continue;
      g.linear() = g.linear() * rotation_from_axis_angle(theta[6 + d] * dofs_[d].axis);
    }
    global[j] = g;
  }
  return global;
}

PosedControlData SkinnedModel::pose(const Eigen::VectorXd& theta, bool with_jacobians) const {
  return pose(theta, with_jacobians, normal_mode_);
}

PosedControlData SkinnedModel::pose(const Eigen::VectorXd& theta, bool with_jacobians,
                                    LbsNormalMode mode) const {
  if (theta.size() != num_params()) {
    throw Error("skinned pose expects " + std::to_string(num_params()) + " parameters, got " +
                std::to_string(theta.size()));
  }
  const int n = mesh_.num_vertices();
  const int np = num_params();
  const int nj = static_cast<int>(joints_.size());

  // Forward kinematics, tracking each revolute axis and pivot in world space.
  std::vector<Eigen::Affine3d> global(nj);
  std::vector<Vec3> dof_axis(dofs_.size());
  std::vector<Vec3> dof_origin(dofs_.size());
  const Mat3 root_rotation = rotation_from_axis_angle(theta.segment<3>(3));
  const Vec3 root_translation = theta.head<3>();
  {
    Eigen::Affine3d root = Eigen::Affine3d::Identity();
    root.linear() = root_rotation;
    root.translation() = root_translation;
    for (int j = 0; j < nj; ++j) {
      Eigen::Affine3d g =
          j == 0 ? root * joints_[0].rest : global[joints_[j].parent] * joints_[j].rest;
      for (int d = 0; d < static_cast<int>(dofs_.size()); ++d) {
        if (dofs_[d].joint != j) continue;
        g.linear() = g.linear() * rotation_from_axis_angle(theta[6 + d] * dofs_[d].axis);
        dof_axis[d] = g.linear() * dofs_[d].axis;
        dof_origin[d] = g.translation();
      }
      global[j] = g;
    }
  }
  std::vector<Eigen::Affine3d> skin(nj);
  for (int j = 0; j < nj; ++j) skin[j] = global[j] * inverse_bind_[j];

  PosedControlData out;
  out.num_params = np;
  out.positions.assign(n, Vec3::Zero());
  out.normals.assign(n, Vec3::Zero());
  std::vector<Vec3> blended(n, Vec3::Zero());
  if (with_jacobians) {
    out.position_jacobian.setZero(3 * n, np);
    out.normal_jacobian.setZero(3 * n, np);
  }
  Eigen::MatrixXd blended_jacobian;
  if (with_jacobians) blended_jacobian.setZero(3 * n, np);

  for (int i = 0; i < n; ++i) {
    const Vec3& rest_p = mesh_.positions()[i];
    const Vec3& rest_n = mesh_.normals()[i];
    for (const Influence& inf : influences_[i]) {
      const Vec3 p = skin[inf.joint] * rest_p;
      const Vec3 q = skin[inf.joint].linear() * rest_n;
      out.positions[i] += inf.weight * p;
      blended[i] += inf.weight * q;
      if (!with_jacobians) continue;
      for (int d : dof_ancestry_[inf.joint]) {
        out.position_jacobian.block<3, 1>(3 * i, 6 + d) +=
            inf.weight * dof_axis[d].cross(p - dof_origin[d]);
        blended_jacobian.block<3, 1>(3 * i, 6 + d) += inf.weight * dof_axis[d].cross(q);
      }
    }
  }

  if (with_jacobians) {
    const auto dR = rotation_derivatives(theta.segment<3>(3));
    std::array<Mat3, 3> spin;
    for (int k = 0; k < 3; ++k) spin[k] = dR[k] * root_rotation.transpose();
    for (int i = 0; i < n; ++i) {
      out.position_jacobian.block<3, 3>(3 * i, 0).setIdentity();
      for (int k = 0; k < 3; ++k) {
        out.position_jacobian.block<3, 1>(3 * i, 3 + k) =
            spin[k] * (out.positions[i] - root_translation);
        blended_jacobian.block<3, 1>(3 * i, 3 + k) = spin[k] * blended[i];
      }
    }
  }

  if (mode == LbsNormalMode::recomputed) {
    blended.assign(n, Vec3::Zero());
    if (with_jacobians) blended_jacobian.setZero(3 * n, np);
    for (const Triangle& t : mesh_.triangles()) {
      const Vec3 e1 = out.positions[t[1]] - out.positions[t[0]];
      const Vec3 e2 = out.positions[t[2]] - out.positions[t[0]];
      const Vec3 c = e1.cross(e2);
      Eigen::Matrix<double, 3, Eigen::Dynamic> dc;
      if (with_jacobians) {
        const Eigen::MatrixXd de1 = out.position_jacobian.middleRows<3>(3 * t[1]) -
                                    out.position_jacobian.middleRows<3>(3 * t[0]);
        const Eigen::MatrixXd de2 = out.position_jacobian.middleRows<3>(3 * t[2]) -
                                    out.position_jacobian.middleRows<3>(3 * t[0]);
        dc = skew(e1) * de2 - skew(e2) * de1;
      }
      for (int k : t) {
        blended[k] += c;
        if (with_jacobians) blended_jacobian.middleRows<3>(3 * k) += dc;
      }
    }
  }

  for (int i = 0; i < n; ++i) {
    const double len = blended[i].norm();
    if (!(len > 0.0)) throw DegenerateError("skinned normal vanishes at vertex " + std::to_string(i), -1);
    out.normals[i] = blended[i] / len;
    if (with_jacobians) {
      const Mat3 project =
          (Mat3::Identity() - out.normals[i] * out.normals[i].transpose()) / len;
      out.normal_jacobian.middleRows<3>(3 * i) = project * blended_jacobian.middleRows<3>(3 * i);
    }
  }
  return out;
}

double SkinnedModel::normal_mode_divergence(const Eigen::VectorXd& theta) const {
  const PosedControlData a = pose(theta, false, LbsNormalMode::blended);
  const PosedControlData b = pose(theta, false, LbsNormalMode::recomputed);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.normals.size(); ++i) {
    const double c = std::clamp(a.normals[i].dot(b.normals[i]), -1.0, 1.0);
    worst = std::max(worst, std::acos(c));
  }
  return worst;
}

}  // namespace phong
