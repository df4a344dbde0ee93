#include <cmath>
#include <numbers>

#include "phong/bench.hpp"
#include "phong/surfaces.hpp"

namespace phong::bench {

std::string_view to_string(NoiseMode mode) {
  return mode == NoiseMode::positive ? "positive" : "symmetric";
}

NoiseMode parse_noise_mode(std::string_view name) {
  if (name == "positive") return NoiseMode::positive;
  if (name == "symmetric") return NoiseMode::symmetric;
  throw ConfigError("unknown noise mode '" + std::string(name) + "' (expected positive or symmetric)");
}

std::vector<double> triangle_weights(const ControlMesh& mesh, const PosedControlData& posed,
                                     bool visible_only) {
  std::vector<double> weights(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Triangle& tri = mesh.triangles()[t];
    const Vec3 n = (posed.positions[tri[1]] - posed.positions[tri[0]])
                       .cross(posed.positions[tri[2]] - posed.positions[tri[0]]);
    weights[t] = visible_only && !(n.z() > 0.0) ? 0.0 : 0.5 * n.norm();
  }
  return weights;
}

SurfaceCoordinate uniform_coordinate(int patch, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double s = std::sqrt(unit(rng));
  const double r = unit(rng);
  return {patch, s * (1.0 - r), s * r};
}

std::vector<Sample> sample_observations(const PoseModel& model, const Eigen::VectorXd& theta,
                                        const SamplingSpec& spec, std::mt19937_64& rng) {
  if (spec.count < 1) throw ConfigError("sample count must be at least 1");
  if (!(spec.noise >= 0.0)) throw ConfigError("noise range must be nonnegative");

  const ControlMesh& mesh = model.mesh();
  const PosedControlData posed = model.pose(theta, false);
  const std::vector<double> weights = triangle_weights(mesh, posed, spec.visible_only);
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw Error("no visible triangles to sample from");

  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  const double lo = spec.noise_mode == NoiseMode::positive ? 0.0 : -spec.noise;
  std::uniform_real_distribution<double> noise(lo, spec.noise);
  const EvalFlags flags{false, false};

  std::vector<Sample> out;
  out.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) {
    Sample s;
    s.coord = uniform_coordinate(pick(rng), rng);
    const SurfaceEvaluation ev = eval_phong(mesh, posed, s.coord, flags);
    Vec3 p = ev.position;
    Vec3 n = ev.normal;
    if (spec.noise > 0.0) {
      for (int k = 0; k < 3; ++k) p[k] += noise(rng);
      for (int k = 0; k < 3; ++k) n[k] += noise(rng);
    }
    s.observation.point = p;
    s.observation.normal = n.normalized();
    out.push_back(s);
  }
  return out;
}

std::vector<Observation> observations_of(std::span<const Sample> samples) {
  std::vector<Observation> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) out.push_back(s.observation);
  return out;
}

double rotation_error(const Eigen::VectorXd& theta_fit, const Eigen::VectorXd& theta_gt) {
  const Mat3 r_fit = rotation_from_axis_angle(theta_fit.segment<3>(3));
  const Mat3 r_gt = rotation_from_axis_angle(theta_gt.segment<3>(3));
  const Vec3 target = r_gt.col(0);
  double best = std::numeric_limits<double>::infinity();
  for (double s : {1.0, -1.0}) {
    const Vec3 a = s * r_fit.col(0);
    const double angle = std::atan2(a.cross(target).norm(), a.dot(target));
    best = std::min(best, angle);
  }
  return best * 180.0 / std::numbers::pi;
}

std::uint64_t trial_seed(std::uint64_t study_seed, int trial) {
  return study_seed ^ static_cast<std::uint64_t>(trial);
}

Eigen::VectorXd random_ellipsoid_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  const double y = angle(rng);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(6);
  theta.tail<3>().setConstant(y);
  return theta;
}

}  // namespace phong::bench
