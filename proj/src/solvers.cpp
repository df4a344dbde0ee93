#include "phong/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

namespace phong {

FlopCount& FlopCount::operator+=(const FlopCount& o) {
  correspondence += o.correspondence;
  coupling += o.coupling;
  schur += o.schur;
  other += o.other;
  return *this;
}

FlopCount expected_lifted_flops(int num_data, int num_params) {
  const std::int64_t d = num_data;
  const std::int64_t p = num_params;
  FlopCount f;
  f.correspondence = d * (18 + 4 * p);
  f.coupling = d * 12 * p;
  f.schur = d * (p * (p + 1) + 2 * p);
  // gradient (12) + damped 2x2 inverse (5) + back-substitution (2P + 4)
  f.other = d * (12 + 5 + 2 * p + 4);
  return f;
}

LiftedSolution solve_lifted_system(const ResidualSystem& system, double damping) {
  const int d = system.num_data();
  const int p = static_cast<int>(system.jacobian_pose.cols());
  const Eigen::MatrixXd& jt = system.jacobian_pose;
  const Eigen::VectorXd& r = system.residuals;

  LiftedSolution sol;
  Eigen::MatrixXd reduced = jt.transpose() * jt;
  reduced.diagonal().array() += damping;
  Eigen::VectorXd rhs = -(jt.transpose() * r);

  std::vector<Eigen::Matrix2d> c_inv(d);
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, 2>> coupling(d);
  std::vector<Vec2> grad(d);
  for (int i = 0; i < d; ++i) {
    const auto& ju = system.jacobian_coords[i];
    const auto jti = jt.middleRows<6>(6 * i);
    Eigen::Matrix2d c = ju.transpose() * ju;
    c.diagonal().array() += damping;
    const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
    if (!(det > 0.0)) return sol;
    Eigen::Matrix2d inv;
    inv << c(1, 1), -c(0, 1), -c(1, 0), c(0, 0);
    c_inv[i] = inv / det;
    coupling[i] = jti.transpose() * ju;  // P x 2
    grad[i] = ju.transpose() * r.segment<6>(6 * i);

    // u v^T + v u^T with halved weight gives B C^-1 B^T on the lower triangle.
    const Eigen::Matrix<double, Eigen::Dynamic, 2> elim = coupling[i] * c_inv[i];
    reduced.selfadjointView<Eigen::Lower>().rankUpdate(elim.col(0), coupling[i].col(0), -0.5);
    reduced.selfadjointView<Eigen::Lower>().rankUpdate(elim.col(1), coupling[i].col(1), -0.5);
    rhs += elim * grad[i];
  }

  const Eigen::LDLT<Eigen::MatrixXd> ldlt(reduced.selfadjointView<Eigen::Lower>());
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return sol;
  sol.dtheta = ldlt.solve(rhs);
  if (!sol.dtheta.allFinite()) return sol;

  sol.dcoords.resize(d);
  for (int i = 0; i < d; ++i) {
    sol.dcoords[i] = c_inv[i] * (-grad[i] - coupling[i].transpose() * sol.dtheta);
  }
  sol.ok = true;
  sol.flops = expected_lifted_flops(d, p);
  return sol;
}

Eigen::VectorXd solve_pose_system(const ResidualSystem& system, double damping) {
  const Eigen::MatrixXd& jt = system.jacobian_pose;
  Eigen::MatrixXd a = jt.transpose() * jt;
  a.diagonal().array() += damping;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return {};
  Eigen::VectorXd dx = ldlt.solve(-(jt.transpose() * system.residuals));
  if (!dx.allFinite()) return {};
  return dx;
}

namespace {

double try_energy(const PoseModel& model, std::span<const Observation> data,
                  const FitConfig& config, const Eigen::VectorXd& theta,
                  std::span<const SurfaceCoordinate> coords) {
  try {
    const PosedControlData posed = model.pose(theta, false);
    return energy_only(model.mesh(), posed, config.surface, coords, data, config.lambda_n);
  } catch (const DegenerateError&) {
    return std::numeric_limits<double>::infinity();
  }
}

void relax_damping(FitState& state, const FitConfig& config) {
  state.damping = std::max(state.damping / config.damping_factor, kMinDamping);
}

}  // namespace

FitState initial_state(const PoseModel& model, std::span<const Observation> data,
                       const Eigen::VectorXd& theta, const FitConfig& config) {
  FitState state;
  state.theta = theta;
  state.damping = config.initial_damping;
  const PosedControlData posed = model.pose(theta, false);
  const ClosestPointIndex index(model.mesh(), posed.positions);
  state.coords.reserve(data.size());
  for (const Observation& obs : data) state.coords.push_back(index.query(obs.point).coord);
  state.energy =
      energy_only(model.mesh(), posed, config.surface, state.coords, data, config.lambda_n);
  return state;
}

StepOutcome lifted_step(const PoseModel& model, std::span<const Observation> data,
                        const FitConfig& config, FitState& state, const ResidualSystem& system) {
  StepOutcome out;
  bool any_solved = false;
  std::vector<SurfaceCoordinate> candidate(state.coords.size());
  for (int attempt = 0; attempt <= config.max_rejects; ++attempt) {
    const LiftedSolution sol = solve_lifted_system(system, state.damping);
    if (!sol.ok) {
      state.damping *= config.damping_factor;
      ++out.rejects;
      continue;
    }
    any_solved = true;
    out.flops = sol.flops;

    const Eigen::VectorXd theta = state.theta + sol.dtheta;
    int truncations = 0;
    double step_sq = sol.dtheta.squaredNorm();
    for (std::size_t i = 0; i < candidate.size(); ++i) {
      const WalkResult wr = walk(model.mesh(), state.coords[i], sol.dcoords[i]);
      candidate[i] = wr.coord;
      truncations += wr.truncated() ? 1 : 0;
      step_sq += sol.dcoords[i].squaredNorm();
    }

    const double e = try_energy(model, data, config, theta, candidate);
    if (e <= state.energy) {
      state.theta = theta;
      state.coords = candidate;
      state.energy = e;
      relax_damping(state, config);
      out.status = StepStatus::accepted;
      out.step_norm = std::sqrt(step_sq);
      out.walk_truncations = truncations;
      return out;
    }
    state.damping *= config.damping_factor;
    ++out.rejects;
  }
  out.status = any_solved ? StepStatus::rejected : StepStatus::singular;
  return out;
}

StepOutcome lifted_step(const PoseModel& model, std::span<const Observation> data,
                        const FitConfig& config, FitState& state) {
  const PosedControlData posed = model.pose(state.theta, true);
  const ResidualSystem system =
      assemble(model.mesh(), posed, config.surface, state.coords, data, config.lambda_n);
  return lifted_step(model, data, config, state, system);
}

StepOutcome icp_step(const PoseModel& model, std::span<const Observation> data,
                     const FitConfig& config, FitState& state) {
  StepOutcome out;
  const PosedControlData posed = model.pose(state.theta, true);
  const ClosestPointIndex index(model.mesh(), posed.positions);
  for (std::size_t i = 0; i < data.size(); ++i) state.coords[i] = index.query(data[i].point).coord;
  state.energy =
      energy_only(model.mesh(), posed, config.surface, state.coords, data, config.lambda_n);
  out.energy_after_correspondences = state.energy;

  const ResidualSystem system =
      assemble(model.mesh(), posed, config.surface, state.coords, data, config.lambda_n);
  bool any_solved = false;
  for (int attempt = 0; attempt <= config.max_rejects; ++attempt) {
    const Eigen::VectorXd dtheta = solve_pose_system(system, state.damping);
    if (dtheta.size() == 0) {
      state.damping *= config.damping_factor;
      ++out.rejects;
      continue;
    }
    any_solved = true;
    const Eigen::VectorXd theta = state.theta + dtheta;
    const double e = try_energy(model, data, config, theta, state.coords);
    if (e <= state.energy) {
      state.theta = theta;
      state.energy = e;
      relax_damping(state, config);
      out.status = StepStatus::accepted;
      out.step_norm = dtheta.norm();
      return out;
    }
    state.damping *= config.damping_factor;
    ++out.rejects;
  }
  out.status = any_solved ? StepStatus::rejected : StepStatus::singular;
  return out;
}

FitReport run_fit(const PoseModel& model, std::span<const Observation> data,
                  const Eigen::VectorXd& initial_theta, const FitConfig& config) {
  config.validate();
  if (initial_theta.size() != model.num_params()) {
    throw Error("initial pose has the wrong number of parameters");
  }
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();

  FitState state = initial_state(model, data, initial_theta, config);
  FitReport report;
  report.energy_trace.push_back(state.energy);
  report.theta_trace.push_back(state.theta);

  for (int it = 1; it <= config.max_iterations; ++it) {
    const auto t_iter = clock::now();
    const double e_before = state.energy;
    const StepOutcome step = config.optimizer == Optimizer::lifted
                                 ? lifted_step(model, data, config, state)
                                 : icp_step(model, data, config, state);
    report.iteration_seconds.push_back(
        std::chrono::duration<double>(clock::now() - t_iter).count());
    report.flops.push_back(step.flops);
    report.walk_truncations += step.walk_truncations;
    const double reference = config.optimizer == Optimizer::icp
                                 ? step.energy_after_correspondences
                                 : e_before;
    if (step.status == StepStatus::accepted && state.energy > reference) report.monotone = false;
    report.iterations = it;
    report.energy_trace.push_back(state.energy);
    report.theta_trace.push_back(state.theta);

    if (step.status == StepStatus::singular) {
      report.aborted = true;
      break;
    }
    const int w = config.convergence_window;
    const double e = state.energy;
    // Exact fits never show a relative decrease; treat them as converged.
    bool converged = e <= 1e-24;
    if (!converged && it >= w) {
      const double before = report.energy_trace[it - w];
      converged = before - e < config.convergence_tolerance * before;
    }
    report.converged = converged;
    if (converged && config.stop_on_convergence) break;
  }

  report.theta = state.theta;
  report.coords = state.coords;
  report.wall_seconds = std::chrono::duration<double>(clock::now() - t_start).count();
  return report;
}

}  // namespace phong
