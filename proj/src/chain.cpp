#include <algorithm>
#include <cmath>
#include <numbers>

#include "phong/bench.hpp"
#include "phong/surfaces.hpp"

namespace phong::bench {

namespace {

constexpr double kLength = 3.0;
constexpr double kRadius = 0.3;
constexpr int kRings = 13;    // cross sections along the axis
constexpr int kSegments = 12;  // vertices per cross section
constexpr double kBlendWidth = 0.25;

double smoothstep(double x) {
  const double t = std::clamp(x, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

// Blend parameter for the joint at `pivot`: 0 before, 1 after.
double blend(double x, double pivot) {
  return smoothstep((x - pivot + kBlendWidth) / (2.0 * kBlendWidth));
}

ControlMesh capped_cylinder() {
  std::vector<Vec3> positions;
  for (int r = 0; r < kRings; ++r) {
    const double x = kLength * r / (kRings - 1);
    for (int s = 0; s < kSegments; ++s) {
      const double a = 2.0 * std::numbers::pi * s / kSegments;
      positions.emplace_back(x, kRadius * std::cos(a), kRadius * std::sin(a));
    }
  }
  const int start_pole = static_cast<int>(positions.size());
  positions.emplace_back(-0.5 * kRadius, 0.0, 0.0);
  const int end_pole = start_pole + 1;
  positions.emplace_back(kLength + 0.5 * kRadius, 0.0, 0.0);

  auto id = [](int r, int s) { return r * kSegments + (s % kSegments); };
  std::vector<Triangle> triangles;
  // Ring angle increases counter-clockwise seen from +x; all faces wind outward.
  for (int r = 0; r + 1 < kRings; ++r) {
    for (int s = 0; s < kSegments; ++s) {
      triangles.push_back({id(r, s), id(r, s + 1), id(r + 1, s)});
      triangles.push_back({id(r, s + 1), id(r + 1, s + 1), id(r + 1, s)});
    }
  }
  for (int s = 0; s < kSegments; ++s) {
    triangles.push_back({start_pole, id(0, s + 1), id(0, s)});
    triangles.push_back({end_pole, id(kRings - 1, s), id(kRings - 1, s + 1)});
  }

  // Provisional normals; replaced by the limit normals below.
  std::vector<Vec3> normals;
  for (const Vec3& p : positions) {
    Vec3 n(0.0, p.y(), p.z());
    if (n.norm() < 1e-12) n = Vec3(p.x() < 1.0 ? -1.0 : 1.0, 0.0, 0.0);
    normals.push_back(n.normalized());
  }
  return ControlMesh(std::move(positions), std::move(normals), std::move(triangles));
}

}  // namespace

SkinnedModel make_chain() {
  ControlMesh mesh = with_loop_limit_data(capped_cylinder());

  std::vector<Joint> joints(3);
  joints[0].name = "base";
  joints[1].name = "middle";
  joints[1].parent = 0;
  joints[1].rest = Eigen::Translation3d(1.0, 0.0, 0.0);
  joints[2].name = "tip";
  joints[2].parent = 1;
  joints[2].rest = Eigen::Translation3d(1.0, 0.0, 0.0);

  const std::vector<JointDof> dofs = {
      {1, Vec3::UnitZ()}, {1, Vec3::UnitY()}, {2, Vec3::UnitZ()}, {2, Vec3::UnitY()}};

  std::vector<SkinWeight> weights;
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    const double x = mesh.positions()[v].x();
    const double s1 = blend(x, 1.0);
    const double s2 = blend(x, 2.0);
    const double w[3] = {1.0 - s1, s1 * (1.0 - s2), s1 * s2};
    for (int j = 0; j < 3; ++j) {
      if (w[j] > 0.0) weights.push_back({v, j, w[j]});
    }
  }
  return SkinnedModel(std::move(mesh), std::move(joints), dofs, std::move(weights));
}

}  // namespace phong::bench
