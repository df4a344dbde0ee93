#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phong/energy.hpp"
#include "phong/kinematics.hpp"

// Synthetic models, data generation and metrics for the benchmark studies.
namespace phong::bench {

inline constexpr double kEllipsoidRadii[3] = {1.0, 2.0, 3.0};

// Subdivided icosahedron (80 * 4^k facets) projected onto the ellipsoid with
// radii (1, 2, 3), normals from the ellipsoid gradient.
ControlMesh ellipsoid_control_mesh(int facets);

// Same mesh with vertex positions and normals replaced by Loop limit values.
// facets must be 320 or 1280.
ControlMesh make_ellipsoid(int facets);

// Three-segment capped cylinder along +x with joints at x = 0, 1, 2.
// Parameters: rigid root (6) + two angles at each of the two inner joints.
SkinnedModel make_chain();

enum class NoiseMode { positive, symmetric };

std::string_view to_string(NoiseMode mode);
NoiseMode parse_noise_mode(std::string_view name);

struct SamplingSpec {
  int count = 200;
  // Per-component noise drawn from [0, noise] (positive) or [-noise, noise].
  double noise = 0.1;
  NoiseMode noise_mode = NoiseMode::positive;
  // Only sample patches whose posed face normal has z > 0.
  bool visible_only = true;
};

struct Sample {
  Observation observation;
  SurfaceCoordinate coord;  // generating coordinate, before noise
};

// Selection probability per triangle: area, zeroed for hidden patches.
std::vector<double> triangle_weights(const ControlMesh& mesh, const PosedControlData& posed,
                                     bool visible_only);

// Uniform point on the unit triangle domain.
SurfaceCoordinate uniform_coordinate(int patch, std::mt19937_64& rng);

// Points and normals from the Phong evaluation of the model at theta.
std::vector<Sample> sample_observations(const PoseModel& model, const Eigen::VectorXd& theta,
                                        const SamplingSpec& spec, std::mt19937_64& rng);

std::vector<Observation> observations_of(std::span<const Sample> samples);

// Angle between R_fit s x and R_gt x minimised over s = +1, -1 (degrees).
// Only the rigid part (first six entries) is used.
double rotation_error(const Eigen::VectorXd& theta_fit, const Eigen::VectorXd& theta_gt);

// Per-trial random stream.
std::uint64_t trial_seed(std::uint64_t study_seed, int trial);

// [0, 0, 0, y, y, y] with y uniform in (-pi, pi).
Eigen::VectorXd random_ellipsoid_pose(std::mt19937_64& rng);

}  // namespace phong::bench
