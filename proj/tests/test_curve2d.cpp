#include <doctest.h>

#include <numbers>

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include "phong/curve2d.hpp"
#include "support.hpp"

using namespace phong;
using namespace phong::curve2d;

namespace {

Eigen::Matrix2d rot(double phi) {
  return Eigen::Rotation2Dd(phi).toRotationMatrix();
}

std::vector<Vec2> sample(const Curve& c, const Pose2D& pose, int n, double offset = 0.013) {
  std::vector<Vec2> out;
  for (int i = 0; i < n; ++i) out.push_back(posed_point(c, pose, wrap_parameter(offset + double(i) / n)));
  return out;
}

std::vector<double> parameters(int n, double offset = 0.013) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(wrap_parameter(offset + double(i) / n));
  return out;
}

// Iterations until the distance energy falls below the threshold, or -1.
int iterations_below(const AlignmentTrace& trace, double threshold) {
  for (std::size_t k = 0; k < trace.energy.size(); ++k) {
    if (trace.energy[k] < threshold) return static_cast<int>(k);
  }
  return -1;
}

}  // namespace

TEST_CASE("curves are closed with unit tangents") {
  for (const Curve& c : {Curve::ellipse(2, 1), Curve::sampled_ellipse(2, 1, 512),
                         Curve::polyline({{0, 0}, {1, 0}, {1, 1}, {0, 1}})}) {
    CHECK((c.point(0.0) - c.point(std::nextafter(1.0, 0.0))).norm() < 1e-9);
    for (int k = 0; k < 100; ++k) {
      const double t = (k + 0.5) / 100.0;
      CHECK(std::abs(c.tangent(t).norm() - 1.0) < 1e-9);
    }
  }
  const Curve square = Curve::polyline({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
  CHECK((square.point(0.25) - Vec2(1, 0)).norm() < 1e-15);
  CHECK((square.point(0.625) - Vec2(0.5, 1)).norm() < 1e-15);
}

TEST_CASE("closest parameter on an ellipse") {
  const Curve c = Curve::ellipse(2, 1);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const Vec2 x = testing::uniform_vector(rng, 2, -3, 3);
    const double t = c.closest_parameter(x);
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 200000; ++k) best = std::min(best, (c.point(k / 200000.0) - x).norm());
    CHECK((c.point(t) - x).norm() <= best + 1e-12);
  }
}

TEST_CASE("all steppers leave an aligned configuration fixed") {
  const Pose2D pose(0.3, -0.2, 0.4);
  for (const Curve& c : {Curve::ellipse(2, 1), Curve::sampled_ellipse(2, 1, 128)}) {
    const auto data = sample(c, pose, 40);
    const auto params = parameters(40);
    CHECK((p2pl_step_unconstrained(c, pose, data, params).pose - pose).norm() < 1e-12);
    CHECK((p2pl_step_regularized(c, pose, data, params, 0.5).pose - pose).norm() < 1e-12);
    CHECK((p2p_step(c, pose, data, params).pose - pose).norm() < 1e-12);
    CHECK(lifted2d_increment(c, pose, data, params, 1e-3).norm() < 1e-12);
  }
}

TEST_CASE("tangent-line residual is the perpendicular distance") {
  // Unit circle turned and shifted so that t = 0 sits at the origin with tangent +x.
  const Curve c = Curve::ellipse(1, 1);
  const Pose2D pose(0, 1, -std::numbers::pi / 2);
  REQUIRE(posed_point(c, pose, 0.0).norm() < 1e-15);
  REQUIRE((posed_tangent(c, pose, 0.0) - Vec2(1, 0)).norm() < 1e-15);
  const std::vector<Vec2> data = {{5, 1}};
  const std::vector<double> params = {0.0};
  CHECK(tangent_line_objective(c, pose, data, params, 0.0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("parallel tangents are flagged as rank deficient") {
  const Curve square = Curve::polyline({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
  const std::vector<Vec2> data = {{0.2, 0.1}, {0.5, -0.1}, {0.7, 0.05}};
  const std::vector<double> params = {0.05, 0.125, 0.175};  // all on the bottom edge
  const PoseUpdate up = p2pl_step_unconstrained(square, Pose2D::Zero(), data, params);
  CHECK(up.rank_deficient);
  CHECK(up.pose.allFinite());
}

TEST_CASE("regularised step reduces to the plain and point-to-point steps") {
  const Curve c = Curve::ellipse(2, 1);
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const Pose2D pose = testing::uniform_vector(rng, 3, -0.5, 0.5);
    std::vector<Vec2> data = sample(c, Pose2D::Zero(), 25);
    for (auto& x : data) x += Vec2(testing::uniform_vector(rng, 2, -0.2, 0.2));
    const auto params = closest_parameters(c, pose, data);

    const PoseUpdate plain = p2pl_step_unconstrained(c, pose, data, params);
    const PoseUpdate zero = p2pl_step_regularized(c, pose, data, params, 0.0);
    CHECK(plain.pose == zero.pose);

    const PoseUpdate stiff = p2pl_step_regularized(c, pose, data, params, 1e9);
    const PoseUpdate p2p = p2p_step(c, pose, data, params);
    CHECK(testing::relative_error(stiff.pose - pose, p2p.pose - pose) <= 1e-6);
  }
  CHECK_THROWS_AS(p2pl_step_regularized(c, Pose2D::Zero(), sample(c, Pose2D::Zero(), 4),
                                        parameters(4), -1.0),
                  Error);
}

TEST_CASE("footpoint closed form equals a line search") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lam(0.0, 5.0);
  for (int i = 0; i < 50; ++i) {
    const Vec2 d = testing::uniform_vector(rng, 2, -3, 3);
    const Vec2 u = testing::uniform_vector(rng, 2, -1, 1).normalized();
    const double lambda = i == 0 ? 0.0 : lam(rng);
    const auto f = [&](double g) { return (d - g * u).squaredNorm() + lambda * g * g; };
    // Coarse grid, then bisection on the sign of the difference slope.
    double best = -10.0;
    for (int k = 0; k <= 20000; ++k) {
      const double g = -10.0 + k * 1e-3;
      if (f(g) < f(best)) best = g;
    }
    const auto slope = [&](double g) { return f(g + 1e-4) - f(g - 1e-4); };
    boost::math::tools::eps_tolerance<double> tol(50);
    const auto [lo, hi] = boost::math::tools::bisect(slope, best - 2e-3, best + 2e-3, tol);
    CHECK(std::abs(regularized_footpoint(d, u, lambda) - 0.5 * (lo + hi)) <= 1e-9);
  }
}

TEST_CASE("lifted increment equals the dense joint solve") {
  std::mt19937_64 rng(4);
  for (const Curve& c : {Curve::ellipse(2, 1), Curve::sampled_ellipse(1.5, 1, 64)}) {
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 3 + trial;
      const Pose2D pose = testing::uniform_vector(rng, 3, -1, 1);
      const auto params = parameters(n, 0.01 + 0.003 * trial);
      std::vector<Vec2> data;
      for (int i = 0; i < n; ++i) data.push_back(Vec2(testing::uniform_vector(rng, 2, -2, 2)));
      const double damping = trial % 2 == 0 ? 1e-3 : 0.3;

      Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2 * n, 3 + n);
      Eigen::VectorXd r(2 * n);
      const Eigen::Matrix2d R = rot(pose[2]);
      const Eigen::Matrix2d dR = rot(pose[2] + std::numbers::pi / 2);
      for (int i = 0; i < n; ++i) {
        r.segment<2>(2 * i) = R * c.point(params[i]) + pose.head<2>() - data[i];
        j.block<2, 2>(2 * i, 0).setIdentity();
        j.block<2, 1>(2 * i, 2) = dR * c.point(params[i]);
        j.block<2, 1>(2 * i, 3 + i) = R * c.derivative(params[i]);
      }
      Eigen::MatrixXd a = j.transpose() * j;
      a.diagonal().array() += damping;
      const Eigen::VectorXd dense = a.colPivHouseholderQr().solve(-(j.transpose() * r));
      const Eigen::VectorXd ours = lifted2d_increment(c, pose, data, params, damping);
      CHECK(testing::relative_error(ours, dense) <= 1e-8);
    }
  }
}

TEST_CASE("lifted objective gradient matches finite differences") {
  std::mt19937_64 rng(5);
  const Curve c = Curve::ellipse(2, 1);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 6;
    const Pose2D pose = testing::uniform_vector(rng, 3, -1, 1);
    std::vector<Vec2> data;
    for (int i = 0; i < n; ++i) data.push_back(Vec2(testing::uniform_vector(rng, 2, -2, 2)));
    const Eigen::VectorXd x0 = [&] {
      Eigen::VectorXd x(3 + n);
      x.head<3>() = pose;
      x.tail(n) = testing::uniform_vector(rng, n, 0.05, 0.95);
      return x;
    }();
    const auto f = [&](const Eigen::VectorXd& x) {
      const std::vector<double> t(x.data() + 3, x.data() + 3 + n);
      return Eigen::VectorXd::Constant(1, lifted_objective(c, x.head<3>(), data, t));
    };
    const std::vector<double> t0(x0.data() + 3, x0.data() + 3 + n);
    const Eigen::VectorXd g = lifted_gradient(c, x0.head<3>(), data, t0);
    worst = std::max(worst, testing::relative_error(g.transpose(), testing::central_difference(f, x0)));
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("lifted step never increases its objective") {
  const Curve c = Curve::ellipse(2, 1);
  std::mt19937_64 rng(6);
  std::vector<Vec2> data = sample(c, Pose2D(0.2, 0.1, 0.3), 30);
  LiftedState2D state;
  state.params = closest_parameters(c, Pose2D::Zero(), data);
  state.energy = lifted_objective(c, state.pose, data, state.params);
  for (int it = 0; it < 20; ++it) {
    const double before = state.energy;
    lifted2d_step(c, data, state);
    CHECK(state.energy <= before);
    for (double t : state.params) CHECK((t >= 0.0 && t < 1.0));
  }
}

TEST_CASE("alignment traces record the method objective") {
  const Curve c = Curve::ellipse(1, 1);
  const auto data = sample(c, Pose2D(0.1, -0.05, 10.0 * std::numbers::pi / 180), 32);
  const AlignmentTrace trace = align(c, data, Pose2D::Zero(), Method::p2pl, 6);
  REQUIRE(trace.energy.size() == 7);
  for (std::size_t k = 0; k < trace.poses.size(); ++k) {
    const auto params = closest_parameters(c, trace.poses[k], data);
    CHECK(trace.objective[k] == doctest::Approx(tangent_line_objective(c, trace.poses[k], data, params, 0.0)));
    CHECK(trace.energy[k] == doctest::Approx(distance_energy(c, trace.poses[k], data)));
  }
}

TEST_CASE("lifting converges in fewer iterations than point-to-tangent-line ICP") {
  // Unit circle centred away from the rotation origin: its spin about its own
  // centre is invisible to the tangent lines, so the plain step overshoots.
  std::vector<Vec2> pts;
  for (int k = 0; k < 512; ++k) {
    const double a = 2.0 * std::numbers::pi * k / 512;
    pts.push_back({1.5 + std::cos(a), std::sin(a)});
  }
  const Curve c = Curve::polyline(pts);
  const auto data = sample(c, Pose2D(0, 0, 10.0 * std::numbers::pi / 180), 24);
  const int lifted = iterations_below(align(c, data, Pose2D::Zero(), Method::lifted, 30), 1e-6);
  const int p2pl = iterations_below(align(c, data, Pose2D::Zero(), Method::p2pl, 30), 1e-6);
  REQUIRE(lifted >= 0);
  CHECK((p2pl < 0 || lifted < p2pl));
}
