#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "phong/surfaces.hpp"

namespace phong {

struct Observation {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
};

// Stacked data-term residuals: six rows per datum (three position, three
// normal), already scaled by 1/sqrt(D) and sqrt(lambda_n / D) so that the
// energy is the plain squared norm.
struct ResidualSystem {
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian_pose;                        // 6D x P
  std::vector<Eigen::Matrix<double, 6, 2>> jacobian_coords;  // one 6x2 block per datum
  double energy = 0.0;

  int num_data() const { return static_cast<int>(jacobian_coords.size()); }
};

enum class Optimizer { lifted, icp };

std::string_view to_string(Optimizer opt);
Optimizer parse_optimizer(std::string_view name);

struct FitConfig {
  double lambda_n = 1.0;
  SurfaceType surface = SurfaceType::phong;
  Optimizer optimizer = Optimizer::lifted;
  int max_iterations = 50;
  double initial_damping = 1e-3;
  double damping_factor = 10.0;
  int max_rejects = 10;
  double convergence_tolerance = 1e-9;
  int convergence_window = 3;
  bool stop_on_convergence = true;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
};

ResidualSystem assemble(const ControlMesh& mesh, const PosedControlData& posed,
                        SurfaceType surface, std::span<const SurfaceCoordinate> coords,
                        std::span<const Observation> data, double lambda_n);

double energy_only(const ControlMesh& mesh, const PosedControlData& posed, SurfaceType surface,
                   std::span<const SurfaceCoordinate> coords, std::span<const Observation> data,
                   double lambda_n);

}  // namespace phong
