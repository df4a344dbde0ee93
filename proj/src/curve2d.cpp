#include "phong/curve2d.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace phong::curve2d {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }

Eigen::Matrix2d rotation(double phi) {
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

// d C(t, pose) / d pose, columns (t_x, t_y, phi).
Eigen::Matrix<double, 2, 3> pose_jacobian(const Curve& curve, const Pose2D& pose, double t) {
  Eigen::Matrix<double, 2, 3> j;
  j.leftCols<2>().setIdentity();
  j.col(2) = perp(rotation(pose[2]) * curve.point(t));
  return j;
}

PoseUpdate gauss_newton(const Eigen::MatrixXd& jac, const Eigen::VectorXd& res, const Pose2D& pose) {
  PoseUpdate out;
  const Eigen::Matrix3d normal = jac.transpose() * jac;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(normal);
  const double hi = eig.eigenvalues().maxCoeff();
  out.rank_deficient = !(eig.eigenvalues().minCoeff() > 1e-12 * hi) || !(hi > 0.0);
  Eigen::Vector3d delta;
  if (out.rank_deficient) {
    delta = -jac.completeOrthogonalDecomposition().solve(res);
  } else {
    delta = -normal.ldlt().solve(jac.transpose() * res);
  }
  out.pose = pose + delta;
  return out;
}

// Residuals of the tangent-line objective after eliminating the footpoint:
// the normal offset, and the tangential offset weighted by sqrt(lambda/(1+lambda)).
PoseUpdate tangent_line_step(const Curve& curve, const Pose2D& pose, std::span<const Vec2> data,
                             std::span<const double> params, double lambda) {
  const int n = static_cast<int>(data.size());
  const double s = std::sqrt(lambda / (1.0 + lambda));
  Eigen::MatrixXd jac(2 * n, 3);
  Eigen::VectorXd res(2 * n);
  for (int i = 0; i < n; ++i) {
    const Vec2 c = posed_point(curve, pose, params[i]);
    const Vec2 u = posed_tangent(curve, pose, params[i]);
    const Vec2 nrm = perp(u);
    const Vec2 d = data[i] - c;
    const auto dc = pose_jacobian(curve, pose, params[i]);

    res[2 * i] = nrm.dot(d);
    res[2 * i + 1] = s * u.dot(d);
    // Classic linearisation: the tangent frame is frozen at the current pose.
    jac.row(2 * i) = -nrm.transpose() * dc;
    jac.row(2 * i + 1) = -s * u.transpose() * dc;
  }
  return gauss_newton(jac, res, pose);
}

}  // namespace

Curve Curve::ellipse(double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw Error("ellipse radii must be positive");
  Curve c;
  c.a_ = a;
  c.b_ = b;
  return c;
}

Curve Curve::polyline(std::vector<Vec2> points) {
  if (points.size() < 3) throw Error("closed polyline needs at least 3 points");
  Curve c;
  c.vertices_ = std::move(points);
  const std::size_t n = c.vertices_.size();
  c.knots_.assign(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double len = (c.vertices_[(k + 1) % n] - c.vertices_[k]).norm();
    if (!(len > 0.0)) throw Error("closed polyline has a zero-length segment");
    c.knots_[k + 1] = c.knots_[k] + len;
  }
  const double total = c.knots_.back();
  for (double& k : c.knots_) k /= total;
  c.knots_.back() = 1.0;
  return c;
}

Curve Curve::sampled_ellipse(double a, double b, int segments) {
  if (segments < 3) throw Error("sampled ellipse needs at least 3 segments");
  std::vector<Vec2> pts(segments);
  for (int k = 0; k < segments; ++k) {
    const double ang = kTwoPi * k / segments;
    pts[k] = {a * std::cos(ang), b * std::sin(ang)};
  }
  return polyline(std::move(pts));
}

double wrap_parameter(double t) {
  double w = t - std::floor(t);
  if (w >= 1.0) w = 0.0;
  return w;
}

int Curve::segment_of(double t, double& local) const {
  t = wrap_parameter(t);
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  int k = static_cast<int>(it - knots_.begin()) - 1;
  k = std::clamp(k, 0, static_cast<int>(vertices_.size()) - 1);
  local = (t - knots_[k]) / (knots_[k + 1] - knots_[k]);
  return k;
}

Vec2 Curve::point(double t) const {
  if (is_polyline()) {
    double local = 0.0;
    const int k = segment_of(t, local);
    const Vec2& p = vertices_[k];
    const Vec2& q = vertices_[(k + 1) % vertices_.size()];
    return p + local * (q - p);
  }
  const double ang = kTwoPi * t;
  return {a_ * std::cos(ang), b_ * std::sin(ang)};
}

Vec2 Curve::derivative(double t) const {
  if (is_polyline()) {
    double local = 0.0;
    const int k = segment_of(t, local);
    const Vec2& p = vertices_[k];
    const Vec2& q = vertices_[(k + 1) % vertices_.size()];
    return (q - p) / (knots_[k + 1] - knots_[k]);
  }
  const double ang = kTwoPi * t;
  return {-kTwoPi * a_ * std::sin(ang), kTwoPi * b_ * std::cos(ang)};
}

Vec2 Curve::second_derivative(double t) const {
  if (is_polyline()) return Vec2::Zero();
  const double ang = kTwoPi * t;
  return {-kTwoPi * kTwoPi * a_ * std::cos(ang), -kTwoPi * kTwoPi * b_ * std::sin(ang)};
}

double Curve::closest_parameter(const Vec2& x) const {
  if (is_polyline()) {
    const std::size_t n = vertices_.size();
    double best_t = 0.0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      const Vec2& p = vertices_[k];
      const Vec2 e = vertices_[(k + 1) % n] - p;
      const double s = std::clamp(e.dot(x - p) / e.squaredNorm(), 0.0, 1.0);
      const double d = (p + s * e - x).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best_t = knots_[k] + s * (knots_[k + 1] - knots_[k]);
      }
    }
    return wrap_parameter(best_t);
  }

  constexpr int kSamples = 1024;
  double best_t = 0.0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < kSamples; ++k) {
    const double t = static_cast<double>(k) / kSamples;
    const double d = (point(t) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best_t = t;
    }
  }
  // Newton on the stationarity condition C'(t).(C(t) - x) = 0.
  double t = best_t;
  for (int it = 0; it < 30; ++it) {
    const Vec2 r = point(t) - x;
    const Vec2 d1 = derivative(t);
    const double f = d1.dot(r);
    const double df = second_derivative(t).dot(r) + d1.squaredNorm();
    if (!(df > 0.0)) break;
    const double step = std::clamp(f / df, -1.0 / kSamples, 1.0 / kSamples);
    t -= step;
    if (std::abs(step) < 1e-15) break;
  }
  return wrap_parameter(t);
}

Vec2 posed_point(const Curve& curve, const Pose2D& pose, double t) {
  return rotation(pose[2]) * curve.point(t) + pose.head<2>();
}

Vec2 posed_tangent(const Curve& curve, const Pose2D& pose, double t) {
  return rotation(pose[2]) * curve.tangent(t);
}

std::vector<double> closest_parameters(const Curve& curve, const Pose2D& pose,
                                       std::span<const Vec2> data) {
  const Eigen::Matrix2d rt = rotation(pose[2]).transpose();
  std::vector<double> out;
  out.reserve(data.size());
  for (const Vec2& x : data) out.push_back(curve.closest_parameter(rt * (x - pose.head<2>())));
  return out;
}

double distance_energy(const Curve& curve, const Pose2D& pose, std::span<const Vec2> data) {
  const auto params = closest_parameters(curve, pose, data);
  return lifted_objective(curve, pose, data, params);
}

double tangent_line_objective(const Curve& curve, const Pose2D& pose, std::span<const Vec2> data,
                              std::span<const double> params, double lambda) {
  double e = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Vec2 d = data[i] - posed_point(curve, pose, params[i]);
    const Vec2 u = posed_tangent(curve, pose, params[i]);
    const double gamma = regularized_footpoint(d, u, lambda);
    e += (d - gamma * u).squaredNorm() + lambda * gamma * gamma;
  }
  return e;
}

double lifted_objective(const Curve& curve, const Pose2D& pose, std::span<const Vec2> data,
                        std::span<const double> params) {
  double e = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    e += (data[i] - posed_point(curve, pose, params[i])).squaredNorm();
  }
  return e;
}

Eigen::VectorXd lifted_gradient(const Curve& curve, const Pose2D& pose,
                                std::span<const Vec2> data, std::span<const double> params) {
  const int n = static_cast<int>(data.size());
  Eigen::VectorXd g = Eigen::VectorXd::Zero(3 + n);
  const Eigen::Matrix2d rot = rotation(pose[2]);
  for (int i = 0; i < n; ++i) {
    const Vec2 r = posed_point(curve, pose, params[i]) - data[i];
    g.head<3>() += 2.0 * pose_jacobian(curve, pose, params[i]).transpose() * r;
    g[3 + i] = 2.0 * (rot * curve.derivative(params[i])).dot(r);
  }
  return g;
}

double regularized_footpoint(const Vec2& offset, const Vec2& unit_tangent, double lambda) {
  if (!(lambda >= 0.0)) throw Error("regulariser lambda must be nonnegative");
  return unit_tangent.dot(offset) / (1.0 + lambda);
}

PoseUpdate p2pl_step_unconstrained(const Curve& curve, const Pose2D& pose,
                                   std::span<const Vec2> data, std::span<const double> params) {
  return tangent_line_step(curve, pose, data, params, 0.0);
}

PoseUpdate p2pl_step_regularized(const Curve& curve, const Pose2D& pose,
                                 std::span<const Vec2> data, std::span<const double> params,
                                 double lambda) {
  if (!(lambda >= 0.0)) throw Error("regulariser lambda must be nonnegative");
  return tangent_line_step(curve, pose, data, params, lambda);
}

PoseUpdate p2p_step(const Curve& curve, const Pose2D& pose, std::span<const Vec2> data,
                    std::span<const double> params) {
  const int n = static_cast<int>(data.size());
  Eigen::MatrixXd jac(2 * n, 3);
  Eigen::VectorXd res(2 * n);
  for (int i = 0; i < n; ++i) {
    res.segment<2>(2 * i) = data[i] - posed_point(curve, pose, params[i]);
    jac.middleRows<2>(2 * i) = -pose_jacobian(curve, pose, params[i]);
  }
  return gauss_newton(jac, res, pose);
}

Eigen::VectorXd lifted2d_increment(const Curve& curve, const Pose2D& pose,
                                   std::span<const Vec2> data, std::span<const double> params,
                                   double damping) {
  const int n = static_cast<int>(data.size());
  const Eigen::Matrix2d rot = rotation(pose[2]);
  Eigen::Matrix3d reduced = Eigen::Matrix3d::Identity() * damping;
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  std::vector<Eigen::Vector3d> coupling(n);
  std::vector<double> diag(n);
  std::vector<double> grad(n);
  for (int i = 0; i < n; ++i) {
    const Vec2 r = posed_point(curve, pose, params[i]) - data[i];
    const auto jp = pose_jacobian(curve, pose, params[i]);
    const Vec2 jt = rot * curve.derivative(params[i]);
    reduced += jp.transpose() * jp;
    rhs -= jp.transpose() * r;
    coupling[i] = jp.transpose() * jt;
    diag[i] = jt.squaredNorm() + damping;
    grad[i] = jt.dot(r);
    reduced -= coupling[i] * coupling[i].transpose() / diag[i];
    rhs += coupling[i] * grad[i] / diag[i];
  }
  Eigen::VectorXd out(3 + n);
  out.head<3>() = reduced.ldlt().solve(rhs);
  for (int i = 0; i < n; ++i) {
    out[3 + i] = (-grad[i] - coupling[i].dot(out.head<3>())) / diag[i];
  }
  return out;
}

bool lifted2d_step(const Curve& curve, std::span<const Vec2> data, LiftedState2D& state,
                   int max_rejects, double factor) {
  const int n = static_cast<int>(data.size());
  std::vector<double> trial(n);
  for (int attempt = 0; attempt <= max_rejects; ++attempt) {
    const Eigen::VectorXd inc = lifted2d_increment(curve, state.pose, data, state.params, state.damping);
    if (!inc.allFinite()) {
      state.damping *= factor;
      continue;
    }
    const Pose2D pose = state.pose + inc.head<3>();
    for (int i = 0; i < n; ++i) trial[i] = wrap_parameter(state.params[i] + inc[3 + i]);
    const double e = lifted_objective(curve, pose, data, trial);
    if (e <= state.energy) {
      state.pose = pose;
      state.params = trial;
      state.energy = e;
      state.damping /= factor;
      return true;
    }
    state.damping *= factor;
  }
  return false;
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::p2pl:
      return "p2pl";
    case Method::p2pl_regularized:
      return "p2pl_regularized";
    case Method::lifted:
      return "lifted";
  }
  return "unknown";
}

AlignmentTrace align(const Curve& curve, std::span<const Vec2> data, const Pose2D& start,
                     Method method, int iterations, double lambda) {
  AlignmentTrace trace;
  trace.method = method;
  Pose2D pose = start;
  auto record = [&](double objective) {
    trace.poses.push_back(pose);
    trace.energy.push_back(distance_energy(curve, pose, data));
    trace.objective.push_back(objective);
  };

  if (method == Method::lifted) {
    LiftedState2D state;
    state.pose = start;
    state.params = closest_parameters(curve, start, data);
    state.energy = lifted_objective(curve, start, data, state.params);
    record(state.energy);
    for (int it = 0; it < iterations; ++it) {
      lifted2d_step(curve, data, state);
      pose = state.pose;
      record(state.energy);
    }
    return trace;
  }

  const double lam = method == Method::p2pl ? 0.0 : lambda;
  record(tangent_line_objective(curve, pose, data, closest_parameters(curve, pose, data), lam));
  for (int it = 0; it < iterations; ++it) {
    const auto params = closest_parameters(curve, pose, data);
    pose = method == Method::p2pl ? p2pl_step_unconstrained(curve, pose, data, params).pose
                                  : p2pl_step_regularized(curve, pose, data, params, lam).pose;
    record(tangent_line_objective(curve, pose, data, closest_parameters(curve, pose, data), lam));
  }
  return trace;
}

}  // namespace phong::curve2d
