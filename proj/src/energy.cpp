#include "phong/energy.hpp"

#include <cmath>
#include <string>

namespace phong {

namespace {

void check_sizes(std::span<const SurfaceCoordinate> coords, std::span<const Observation> data,
                 double lambda_n) {
  if (coords.size() != data.size()) {
    throw Error("correspondence count " + std::to_string(coords.size()) +
                " does not match data count " + std::to_string(data.size()));
  }
  if (data.empty()) throw Error("data term needs at least one observation");
  if (!(lambda_n >= 0.0)) throw Error("lambda_n must be nonnegative");
}

}  // namespace

std::string_view to_string(Optimizer opt) {
  return opt == Optimizer::lifted ? "lifted" : "icp";
}

Optimizer parse_optimizer(std::string_view name) {
  if (name == "lifted") return Optimizer::lifted;
  if (name == "icp") return Optimizer::icp;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

void FitConfig::validate() const {
  if (!(lambda_n >= 0.0)) throw ConfigError("lambda_n must be nonnegative");
  if (max_iterations < 0) throw ConfigError("iteration cap must be nonnegative");
  if (!(initial_damping > 0.0)) throw ConfigError("initial damping must be positive");
  if (!(damping_factor > 1.0)) throw ConfigError("damping factor must exceed 1");
  if (max_rejects < 1) throw ConfigError("reject cap must be at least 1");
  if (convergence_window < 1) throw ConfigError("convergence window must be at least 1");
}

ResidualSystem assemble(const ControlMesh& mesh, const PosedControlData& posed,
                        SurfaceType surface, std::span<const SurfaceCoordinate> coords,
                        std::span<const Observation> data, double lambda_n) {
  check_sizes(coords, data, lambda_n);
  const int d = static_cast<int>(data.size());
  const int p = posed.num_params;
  const double w_pos = 1.0 / std::sqrt(static_cast<double>(d));
  const double w_nrm = std::sqrt(lambda_n / d);

  ResidualSystem sys;
  sys.residuals.resize(6 * d);
  sys.jacobian_pose.resize(6 * d, p);
  sys.jacobian_coords.resize(d);

  const EvalFlags flags{true, true};
  for (int i = 0; i < d; ++i) {
    const SurfaceEvaluation ev = evaluate(surface, mesh, posed, coords[i], flags);
    sys.residuals.segment<3>(6 * i) = w_pos * (ev.position - data[i].point);
    sys.residuals.segment<3>(6 * i + 3) = w_nrm * (ev.normal - data[i].normal);
    sys.jacobian_pose.middleRows<3>(6 * i) = w_pos * ev.dposition_dtheta;
    sys.jacobian_pose.middleRows<3>(6 * i + 3) = w_nrm * ev.dnormal_dtheta;
    auto& ju = sys.jacobian_coords[i];
    ju.block<3, 1>(0, 0) = w_pos * ev.dposition_dv;
    ju.block<3, 1>(0, 1) = w_pos * ev.dposition_dw;
    ju.block<3, 1>(3, 0) = w_nrm * ev.dnormal_dv;
    ju.block<3, 1>(3, 1) = w_nrm * ev.dnormal_dw;
  }
  sys.energy = sys.residuals.squaredNorm();
  return sys;
}

double energy_only(const ControlMesh& mesh, const PosedControlData& posed, SurfaceType surface,
                   std::span<const SurfaceCoordinate> coords, std::span<const Observation> data,
                   double lambda_n) {
  check_sizes(coords, data, lambda_n);
  const int d = static_cast<int>(data.size());
  const double w_pos = 1.0 / std::sqrt(static_cast<double>(d));
  const double w_nrm = std::sqrt(lambda_n / d);
  const EvalFlags flags{false, false};
  double e = 0.0;
  for (int i = 0; i < d; ++i) {
    const SurfaceEvaluation ev = evaluate(surface, mesh, posed, coords[i], flags);
    e += (w_pos * (ev.position - data[i].point)).squaredNorm();
    e += (w_nrm * (ev.normal - data[i].normal)).squaredNorm();
  }
  return e;
}

}  // namespace phong
