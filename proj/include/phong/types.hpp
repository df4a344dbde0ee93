#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace phong {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Upper bound on the pose parameter count; lets per-evaluation Jacobian
// blocks live on the stack.
inline constexpr int kMaxPoseParams = 64;

using PoseJacobian =
    Eigen::Matrix<double, 3, Eigen::Dynamic, Eigen::ColMajor, 3, kMaxPoseParams>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MeshError : public Error {
 public:
  using Error::Error;
};

// Raised when an interpolated normal direction or a posed facet collapses.
class DegenerateError : public Error {
 public:
  DegenerateError(const std::string& what, int patch)
      : Error(what), patch_(patch) {}
  int patch() const { return patch_; }

 private:
  int patch_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace phong
