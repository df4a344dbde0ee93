#include <doctest.h>

#include <numbers>

#include "phong/bench.hpp"
#include "phong/kinematics.hpp"
#include "phong/skinned_io.hpp"
#include "support.hpp"

using namespace phong;

namespace {

Eigen::VectorXd flatten(const std::vector<Vec3>& v) {
  Eigen::VectorXd out(3 * v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out.segment<3>(3 * i) = v[i];
  return out;
}

// Largest relative error of the position and normal Jacobians of a model
// against central differences.
double jacobian_error(const PoseModel& model, const Eigen::VectorXd& theta) {
  const PosedControlData posed = model.pose(theta, true);
  const auto positions = [&](const Eigen::VectorXd& t) {
    return flatten(model.pose(t, false).positions);
  };
  const auto normals = [&](const Eigen::VectorXd& t) {
    return flatten(model.pose(t, false).normals);
  };
  return std::max(
      testing::relative_error(posed.position_jacobian, testing::central_difference(positions, theta)),
      testing::relative_error(posed.normal_jacobian, testing::central_difference(normals, theta)));
}

// Independent rotation from the axis-angle vector via Eigen's AngleAxis.
Mat3 reference_rotation(const Vec3& r) {
  const double t = r.norm();
  if (t == 0.0) return Mat3::Identity();
  return Eigen::AngleAxisd(t, r / t).toRotationMatrix();
}

// Two-joint model: a root and one child at (1, 0, 0) rotating about z. Vertex
// 0 sits at the child, vertex 1 one unit further along x.
SkinnedModel single_joint_model() {
  ControlMesh mesh({{2, 0, 0}, {1, 1, 0}, {1, 0, 1}, {3, 0, 0}},
                   {{0, 0, 1}, {0, 0, 1}, {0, 1, 0}, {1, 0, 0}},
                   {{0, 1, 2}, {0, 3, 1}});
  std::vector<Joint> joints(2);
  joints[0].name = "root";
  joints[1].name = "child";
  joints[1].parent = 0;
  joints[1].rest.translation() = Vec3(1, 0, 0);
  std::vector<SkinWeight> weights;
  for (int i = 0; i < 4; ++i) weights.push_back({i, 1, 1.0});
  return SkinnedModel(std::move(mesh), std::move(joints), {{1, Vec3::UnitZ()}}, weights);
}

}  // namespace

TEST_CASE("zero pose is the identity") {
  std::mt19937_64 rng(1);
  const ControlMesh m = testing::jittered_octahedron(rng);
  const PosedControlData posed = pose_rigid(m, RigidPose{});
  for (int i = 0; i < m.num_vertices(); ++i) {
    CHECK(posed.positions[i] == m.positions()[i]);
    CHECK(posed.normals[i] == m.normals()[i]);
  }
}

TEST_CASE("quarter turn about x") {
  const ControlMesh m({{0, 1, 0}, {1, 0, 0}, {0, 0, 1}}, {{0, 1, 0}, {1, 0, 0}, {0, 0, 1}},
                      {{0, 1, 2}});
  RigidPose pose;
  pose.theta << 0, 0, 0, std::numbers::pi / 2, 0, 0;
  const PosedControlData posed = pose_rigid(m, pose);
  CHECK((posed.positions[0] - Vec3(0, 0, 1)).norm() < 1e-15);
  CHECK((posed.normals[0] - Vec3(0, 0, 1)).norm() < 1e-15);
}

TEST_CASE("rotation matches an independent axis-angle construction") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const double scale = i % 4 == 0 ? 1e-7 : (i % 4 == 1 ? 0.4 : 3.0);
    const Vec3 r = scale * testing::random_unit(rng);
    CHECK((rotation_from_axis_angle(r) - reference_rotation(r)).norm() < 1e-14);
    CHECK((axis_angle_from_rotation(rotation_from_axis_angle(r)) - r).norm() < 1e-9);
  }
  // Series and closed form meet continuously at the branch threshold.
  const Vec3 axis = Vec3(1, 2, 3).normalized();
  CHECK((rotation_from_axis_angle(axis * std::nextafter(0.5, 0.0)) -
         rotation_from_axis_angle(axis * 0.5)).norm() < 1e-15);
}

TEST_CASE("rigid Jacobians match finite differences") {
  std::mt19937_64 rng(3);
  const ControlMesh m = testing::jittered_octahedron(rng);
  const RigidModel model(m);
  double worst = 0.0;
  for (int i = 0; i < 60; ++i) {
    Eigen::VectorXd theta = testing::uniform_vector(rng, 6, -2, 2);
    // A third of the instances sit right at the rotation origin.
    if (i % 3 == 0) theta.tail<3>() = 1e-7 * testing::random_unit(rng);
    worst = std::max(worst, jacobian_error(model, theta));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("rotation derivatives match finite differences near zero") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    const Vec3 r = (i % 2 == 0 ? 1e-7 : 0.5) * testing::random_unit(rng);
    const auto d = rotation_derivatives(r);
    for (int k = 0; k < 3; ++k) {
      const double h = 1e-6;
      Vec3 rp = r, rm = r;
      rp[k] += h;
      rm[k] -= h;
      const Mat3 fd = (rotation_from_axis_angle(rp) - rotation_from_axis_angle(rm)) / (2 * h);
      CHECK(testing::relative_error(d[k], fd) < 1e-8);
    }
  }
}

TEST_CASE("rigid posing is an isometry") {
  std::mt19937_64 rng(5);
  const ControlMesh m = testing::jittered_octahedron(rng);
  for (int i = 0; i < 20; ++i) {
    RigidPose pose;
    pose.theta = testing::uniform_vector(rng, 6, -3, 3);
    const PosedControlData posed = pose_rigid(m, pose, false);
    for (int a = 0; a < m.num_vertices(); ++a) {
      CHECK(std::abs(posed.normals[a].norm() - 1.0) < 1e-6);
      for (int b = a + 1; b < m.num_vertices(); ++b) {
        const double before = (m.positions()[a] - m.positions()[b]).norm();
        const double after = (posed.positions[a] - posed.positions[b]).norm();
        CHECK(std::abs(before - after) < 1e-9);
      }
    }
  }
}

TEST_CASE("rigid posing composes") {
  std::mt19937_64 rng(6);
  const ControlMesh m = testing::jittered_octahedron(rng);
  for (int i = 0; i < 20; ++i) {
    RigidPose a, b;
    a.theta = testing::uniform_vector(rng, 6, -1.5, 1.5);
    b.theta = testing::uniform_vector(rng, 6, -1.5, 1.5);
    const PosedControlData first = pose_rigid(m, a, false);
    // b applied after a.
    RigidPose ab;
    const Mat3 R = b.rotation() * a.rotation();
    ab.theta.head<3>() = b.rotation() * a.translation() + b.translation();
    ab.theta.tail<3>() = axis_angle_from_rotation(R);
    const PosedControlData composed = pose_rigid(m, ab, false);
    for (int v = 0; v < m.num_vertices(); ++v) {
      const Vec3 twice = b.rotation() * first.positions[v] + b.translation();
      CHECK((twice - composed.positions[v]).norm() < 1e-9);
    }
  }
}

TEST_CASE("skinning at zero pose reproduces the rest mesh") {
  const SkinnedModel chain = bench::make_chain();
  const PosedControlData posed = chain.pose(Eigen::VectorXd::Zero(chain.num_params()), false);
  for (int i = 0; i < chain.mesh().num_vertices(); ++i) {
    CHECK((posed.positions[i] - chain.mesh().positions()[i]).norm() < 1e-12);
    CHECK((posed.normals[i] - chain.mesh().normals()[i]).norm() < 1e-12);
  }
}

TEST_CASE("a fully bound joint rotates its vertices about the pivot") {
  const SkinnedModel model = single_joint_model();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(7);
  theta[6] = std::numbers::pi / 2;
  const PosedControlData posed = model.pose(theta, false);
  // (2, 0, 0) around pivot (1, 0, 0) by a quarter turn about z -> (1, 1, 0).
  CHECK((posed.positions[0] - Vec3(1, 1, 0)).norm() < 1e-12);
  CHECK((posed.positions[3] - Vec3(1, 2, 0)).norm() < 1e-12);
  CHECK((posed.positions[1] - Vec3(0, 0, 0)).norm() < 1e-12);
  CHECK((posed.normals[3] - Vec3(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("skinning Jacobians match finite differences on the chain") {
  const SkinnedModel chain = bench::make_chain();
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd theta = testing::uniform_vector(rng, chain.num_params(), -0.8, 0.8);
    worst = std::max(worst, jacobian_error(chain, theta));
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("recomputed skinned normals have consistent Jacobians") {
  SkinnedModel chain = bench::make_chain();
  chain.set_normal_mode(LbsNormalMode::recomputed);
  std::mt19937_64 rng(8);
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    worst = std::max(worst, jacobian_error(chain, testing::uniform_vector(rng, chain.num_params(), -0.8, 0.8)));
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("skinning bound entirely to the root equals rigid posing") {
  std::mt19937_64 rng(9);
  const ControlMesh m = testing::jittered_octahedron(rng);
  std::vector<Joint> joints(2);
  joints[1].parent = 0;
  joints[1].rest.translation() = Vec3(0.5, 0, 0);
  std::vector<SkinWeight> weights;
  for (int i = 0; i < m.num_vertices(); ++i) weights.push_back({i, 0, 1.0});
  const SkinnedModel skinned(m, joints, {{1, Vec3::UnitY()}}, weights);
  for (int k = 0; k < 10; ++k) {
    Eigen::VectorXd theta = testing::uniform_vector(rng, 7, -2, 2);
    RigidPose pose;
    pose.theta = theta.head<6>();
    const PosedControlData a = skinned.pose(theta, true);
    const PosedControlData b = pose_rigid(m, pose, true);
    for (int i = 0; i < m.num_vertices(); ++i) {
      CHECK((a.positions[i] - b.positions[i]).norm() < 1e-12);
      CHECK((a.normals[i] - b.normals[i]).norm() < 1e-12);
    }
    CHECK((a.position_jacobian.leftCols(6) - b.position_jacobian).norm() < 1e-10);
    CHECK(a.position_jacobian.col(6).norm() == 0.0);
  }
}

TEST_CASE("skinned model validation") {
  const SkinnedModel good = single_joint_model();
  std::vector<SkinWeight> bad_sum = good.weights();
  bad_sum[0].weight = 0.5;
  CHECK_THROWS_AS(SkinnedModel(good.mesh(), good.joints(), good.dofs(), bad_sum), Error);
  std::vector<SkinWeight> negative = good.weights();
  negative.push_back({0, 0, -0.1});
  CHECK_THROWS_AS(SkinnedModel(good.mesh(), good.joints(), good.dofs(), negative), Error);
  std::vector<Joint> cyclic = good.joints();
  cyclic[0].parent = 1;
  CHECK_THROWS_AS(SkinnedModel(good.mesh(), cyclic, good.dofs(), good.weights()), Error);
  CHECK_THROWS_AS(good.pose(Eigen::VectorXd::Zero(6), false), Error);
}

TEST_CASE("skinned model JSON round trip") {
  const SkinnedModel chain = bench::make_chain();
  const SkinnedModel back = skinned_model_from_json(skinned_model_to_json(chain));
  REQUIRE(back.num_params() == chain.num_params());
  std::mt19937_64 rng(10);
  const Eigen::VectorXd theta = testing::uniform_vector(rng, chain.num_params(), -0.5, 0.5);
  const PosedControlData a = chain.pose(theta, true);
  const PosedControlData b = back.pose(theta, true);
  CHECK((flatten(a.positions) - flatten(b.positions)).norm() < 1e-12);
  CHECK((a.normal_jacobian - b.normal_jacobian).norm() < 1e-10);
}

TEST_CASE("blended and recomputed normals diverge only when bent") {
  const SkinnedModel chain = bench::make_chain();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(chain.num_params());
  const double straight = chain.normal_mode_divergence(theta);
  theta[6] = 0.8;
  const double bent = chain.normal_mode_divergence(theta);
  CHECK(bent >= straight);
  CHECK(bent < std::numbers::pi / 2);
}
