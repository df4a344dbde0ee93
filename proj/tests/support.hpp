#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "phong/mesh.hpp"

namespace testing {

using phong::Vec3;

inline double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                             double floor = 1e-8) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}

// Central differences of a vector-valued function, one column per parameter.
inline Eigen::MatrixXd central_difference(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
    double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd j(f0.size(), x.size());
  for (int k = 0; k < x.size(); ++k) {
    Eigen::VectorXd xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    j.col(k) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return j;
}

inline Eigen::VectorXd uniform_vector(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec3 v(g(rng), g(rng), g(rng));
  return v.normalized();
}

// Interior coordinate bounded away from the triangle edges.
inline phong::SurfaceCoordinate interior_coordinate(std::mt19937_64& rng, int patch,
                                                    double margin = 0.05) {
  std::uniform_real_distribution<double> u(margin, 1.0 - 2.0 * margin);
  for (;;) {
    const double v = u(rng), w = u(rng);
    if (v + w <= 1.0 - margin) return {patch, v, w};
  }
}

inline phong::ControlMesh single_triangle() {
  return phong::ControlMesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}},
                            {{0, 0, 1}, {0, 0, 1}, {0, 0, 1}}, {{0, 1, 2}});
}

// Unit square in z = 0 split along its diagonal.
inline phong::ControlMesh two_triangles() {
  return phong::ControlMesh({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}},
                            {{0, 0, 1}, {0, 0, 1}, {0, 0, 1}, {0, 0, 1}},
                            {{0, 1, 2}, {0, 2, 3}});
}

inline phong::ControlMesh octahedron() {
  std::vector<Vec3> p = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  std::vector<Vec3> n = p;
  std::vector<phong::Triangle> t = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
                                    {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
  return phong::ControlMesh(p, n, t);
}

// Octahedron with jittered vertices and random unit normals near the radial
// direction: a closed mesh without symmetries.
inline phong::ControlMesh jittered_octahedron(std::mt19937_64& rng) {
  const phong::ControlMesh base = octahedron();
  std::uniform_real_distribution<double> jitter(-0.15, 0.15);
  std::vector<Vec3> p, n;
  for (const Vec3& q : base.positions()) {
    const Vec3 x = q + Vec3(jitter(rng), jitter(rng), jitter(rng));
    p.push_back(x);
    n.push_back((x.normalized() + 0.3 * random_unit(rng)).normalized());
  }
  return phong::ControlMesh(p, n, base.triangles());
}

}  // namespace testing
