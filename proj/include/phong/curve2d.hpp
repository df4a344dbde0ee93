#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "phong/types.hpp"

// Rigid alignment of a closed planar curve to 2D points with three update
// rules: point-to-tangent-line ICP (plain and regularised) and lifting.
namespace phong::curve2d {

// Closed curve C(t), t in [0, 1).
class Curve {
 public:
  // (a cos 2 pi t, b sin 2 pi t)
  static Curve ellipse(double a, double b);
  // Closed polyline through `points`, parameterised by normalised arc length.
  static Curve polyline(std::vector<Vec2> points);
  // Arc-length polyline with `segments` vertices sampled on an ellipse.
  static Curve sampled_ellipse(double a, double b, int segments = 512);

  Vec2 point(double t) const;
  // dC/dt; piecewise constant for polylines.
  Vec2 derivative(double t) const;
  Vec2 second_derivative(double t) const;
  Vec2 tangent(double t) const { return derivative(t).normalized(); }

  // Parameter of the closest curve point to x (unposed frame).
  double closest_parameter(const Vec2& x) const;

  bool is_polyline() const { return !vertices_.empty(); }

 private:
  Curve() = default;
  int segment_of(double t, double& local) const;

  double a_ = 1.0;
  double b_ = 1.0;
  std::vector<Vec2> vertices_;
  std::vector<double> knots_;  // cumulative normalised arc length, knots_[0] = 0
};

// [t_x, t_y, phi]
using Pose2D = Eigen::Vector3d;

double wrap_parameter(double t);

Vec2 posed_point(const Curve& curve, const Pose2D& pose, double t);
Vec2 posed_tangent(const Curve& curve, const Pose2D& pose, double t);

std::vector<double> closest_parameters(const Curve& curve, const Pose2D& pose,
                                       std::span<const Vec2> data);

// Sum over data of the squared distance to the posed curve.
double distance_energy(const Curve& curve, const Pose2D& pose, std::span<const Vec2> data);

// sum_i min_gamma |x_i - C(t_i) - gamma C'(t_i)/|C'(t_i)||^2 + lambda gamma^2
double tangent_line_objective(const Curve& curve, const Pose2D& pose, std::span<const Vec2> data,
                              std::span<const double> params, double lambda);

// sum_i |x_i - C(t_i, pose)|^2
double lifted_objective(const Curve& curve, const Pose2D& pose, std::span<const Vec2> data,
                        std::span<const double> params);

// Gradient of lifted_objective in (pose, params), length 3 + N.
Eigen::VectorXd lifted_gradient(const Curve& curve, const Pose2D& pose,
                                std::span<const Vec2> data, std::span<const double> params);

// Minimiser over gamma of |d - gamma t|^2 + lambda gamma^2 for unit t.
double regularized_footpoint(const Vec2& offset, const Vec2& unit_tangent, double lambda);

struct PoseUpdate {
  Pose2D pose = Pose2D::Zero();
  bool rank_deficient = false;
};

// One Gauss-Newton update of the point-to-tangent-line objective.
PoseUpdate p2pl_step_unconstrained(const Curve& curve, const Pose2D& pose,
                                   std::span<const Vec2> data, std::span<const double> params);

// Same with the footpoint offset penalised by lambda (must be >= 0).
PoseUpdate p2pl_step_regularized(const Curve& curve, const Pose2D& pose,
                                 std::span<const Vec2> data, std::span<const double> params,
                                 double lambda);

// Point-to-point Gauss-Newton update with fixed correspondences.
PoseUpdate p2p_step(const Curve& curve, const Pose2D& pose, std::span<const Vec2> data,
                    std::span<const double> params);

struct LiftedState2D {
  Pose2D pose = Pose2D::Zero();
  std::vector<double> params;
  double damping = 1e-3;
  double energy = 0.0;
};

// Joint increment (dpose, dparams) solving the damped normal equations of the
// lifted objective, eliminating the scalar correspondence blocks.
Eigen::VectorXd lifted2d_increment(const Curve& curve, const Pose2D& pose,
                                   std::span<const Vec2> data, std::span<const double> params,
                                   double damping);

// One damped Levenberg iteration (x10 / /10, up to max_rejects retries).
// Returns whether a step was accepted.
bool lifted2d_step(const Curve& curve, std::span<const Vec2> data, LiftedState2D& state,
                   int max_rejects = 10, double factor = 10.0);

enum class Method { p2pl, p2pl_regularized, lifted };

std::string_view to_string(Method m);

struct AlignmentTrace {
  Method method = Method::lifted;
  std::vector<double> energy;  // distance_energy after each iteration, [0] = start
  std::vector<Pose2D> poses;
  std::vector<double> objective;  // the method's own objective
};

// ICP variants re-match closest points every iteration; lifting matches once.
AlignmentTrace align(const Curve& curve, std::span<const Vec2> data, const Pose2D& start,
                     Method method, int iterations, double lambda = 1.0);

}  // namespace phong::curve2d
