#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "phong/closest_point.hpp"
#include "phong/energy.hpp"
#include "phong/kinematics.hpp"

namespace phong {

// Multiplication counts of the joint (pose, correspondence) solve beyond
// what a pose-only Levenberg solve performs, per step.
struct FlopCount {
  // Forming the 2x2 correspondence blocks C_i = J_ui^T J_ui (18 per datum)
  // and the eliminator W_i = B_i C_i^-1 (4P per datum).
  std::int64_t correspondence = 0;
  // Coupling blocks B_i = J_thetai^T J_ui (12P per datum).
  std::int64_t coupling = 0;
  // Symmetric rank-2 Schur updates and the reduced right-hand side.
  std::int64_t schur = 0;
  // Correspondence gradients, 2x2 inverses and back-substitution.
  std::int64_t other = 0;

  std::int64_t total() const { return correspondence + coupling + schur + other; }
  FlopCount& operator+=(const FlopCount& o);
};

// Closed form of the counter for D data and P pose parameters.
FlopCount expected_lifted_flops(int num_data, int num_params);

struct LiftedSolution {
  Eigen::VectorXd dtheta;
  std::vector<Vec2> dcoords;
  bool ok = false;
  FlopCount flops;
};

// Solves (J^T J + damping I) [dtheta; dU] = -J^T r by eliminating the 2x2
// correspondence blocks (Schur complement) and back-substituting.
LiftedSolution solve_lifted_system(const ResidualSystem& system, double damping);

// Pose-only damped normal equations with the correspondences held fixed.
// Returns an empty vector when the system cannot be factored.
Eigen::VectorXd solve_pose_system(const ResidualSystem& system, double damping);

struct FitState {
  Eigen::VectorXd theta;
  std::vector<SurfaceCoordinate> coords;
  double damping = 1e-3;
  double energy = 0.0;
};

enum class StepStatus { accepted, rejected, singular };

struct StepOutcome {
  StepStatus status = StepStatus::rejected;
  int rejects = 0;
  double step_norm = 0.0;
  int walk_truncations = 0;
  // For ICP: energy after the correspondence update, before the pose step.
  double energy_after_correspondences = 0.0;
  FlopCount flops;
};

inline constexpr double kMinDamping = 1e-20;

FitState initial_state(const PoseModel& model, std::span<const Observation> data,
                       const Eigen::VectorXd& theta, const FitConfig& config);

// One Levenberg iteration in (theta, U) from an assembled system consistent
// with `state`. Accepts when the energy does not increase, dividing the
// damping by the factor; otherwise multiplies it and retries up to the reject
// cap. Correspondence updates are applied by walking the mesh.
StepOutcome lifted_step(const PoseModel& model, std::span<const Observation> data,
                        const FitConfig& config, FitState& state, const ResidualSystem& system);
StepOutcome lifted_step(const PoseModel& model, std::span<const Observation> data,
                        const FitConfig& config, FitState& state);

// Closest-point correspondences (position metric), then one damped step in
// theta alone on the full data term.
StepOutcome icp_step(const PoseModel& model, std::span<const Observation> data,
                     const FitConfig& config, FitState& state);

struct FitReport {
  Eigen::VectorXd theta;
  std::vector<SurfaceCoordinate> coords;
  int iterations = 0;
  bool converged = false;
  bool aborted = false;
  // Entry k holds the state after k iterations; entry 0 is the start.
  std::vector<double> energy_trace;
  std::vector<Eigen::VectorXd> theta_trace;
  std::vector<double> iteration_seconds;
  std::vector<FlopCount> flops;
  int walk_truncations = 0;
  // Every accepted step left the energy no higher than it was before the
  // step (for ICP: after the correspondence update).
  bool monotone = true;
  double wall_seconds = 0.0;
};

FitReport run_fit(const PoseModel& model, std::span<const Observation> data,
                  const Eigen::VectorXd& initial_theta, const FitConfig& config);

}  // namespace phong
