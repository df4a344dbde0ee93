#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "phong/bench.hpp"
#include "phong/solvers.hpp"

namespace phong::bench {

enum class ModelId { ellipsoid_320, ellipsoid_1280, chain3 };

std::string_view to_string(ModelId id);
ModelId parse_model_id(std::string_view name);
std::unique_ptr<PoseModel> make_model(ModelId id);

struct RunSpec {
  ModelId model = ModelId::ellipsoid_320;
  SurfaceType surface = SurfaceType::phong;
  Optimizer optimizer = Optimizer::lifted;
  double lambda_n = 1.0;
  int iterations = 50;
};

struct StudyConfig {
  std::uint64_t seed = 1;
  int trials = 400;
  int iterations = 50;  // default cap for runs that do not set one
  std::vector<int> snapshots = {10, 50};
  SamplingSpec sampling;
  std::vector<RunSpec> runs;
};

// Accepts {"seed", "trials", "iterations", "snapshots", "data": {"count",
// "noise", "noise_mode", "visible_only"}, "runs": [{"model", "surface",
// "optimizer", "lambda_n", "iterations"}], "grid": {"models", "surfaces",
// "optimizers", "lambda_n"}}. Runs from "runs" come first, then the grid in
// model, surface, optimizer, lambda_n order. Throws ConfigError naming the
// offending field.
StudyConfig parse_study_config(const nlohmann::json& doc);
StudyConfig load_study_config(const std::filesystem::path& path);
nlohmann::json to_json(const StudyConfig& config);

// 0, 0.05, ..., 1.0
std::vector<double> sweep_lambdas();

struct TrialResult {
  int trial = 0;
  Eigen::VectorXd truth;
  double truth_angle_deg = 0.0;  // signed ground-truth rotation parameter
  std::vector<double> errors;    // rotation error per iteration, [0] = start
  std::vector<double> energies;
  std::vector<double> seconds;  // cumulative wall time per iteration
  int iterations = 0;
  bool converged = false;
  bool aborted = false;
  bool monotone = true;
  int walk_truncations = 0;
};

struct RunResult {
  RunSpec spec;
  std::vector<TrialResult> trials;
};

struct StudyResult {
  StudyConfig config;
  std::vector<RunResult> runs;
};

// Ground truth, start pose and data for one trial of a model.
struct TrialSetup {
  Eigen::VectorXd truth;
  Eigen::VectorXd start;
  std::vector<Sample> samples;
};
TrialSetup make_trial(const PoseModel& model, ModelId id, const SamplingSpec& sampling,
                      std::uint64_t study_seed, int trial);

TrialResult run_trial(const PoseModel& model, const RunSpec& spec, const TrialSetup& setup,
                      int trial);

// Trials run on `jobs` threads; results are ordered by run then trial.
StudyResult run_study(const StudyConfig& config, int jobs = 1);

struct Stats {
  int count = 0;
  double mean = 0.0;
  double stdev = 0.0;  // sample standard deviation (n - 1)
  double stderr_mean = 0.0;
};
Stats summarize(std::span<const double> values);

inline constexpr int kAngleBins = 24;
int angle_bin(double angle_deg);

// Errors of every trial at iteration k (traces are padded after early stops).
std::vector<double> errors_at(const RunResult& run, int iteration);

// First iteration whose mean error drops below the threshold, or -1.
int first_iteration_below(const RunResult& run, double threshold_deg);

// Writes trials.csv, per_iteration.csv, aggregate_iterations.csv,
// aggregate_angle_bins.csv, ablation.csv, timings.csv and manifest.json.
// Everything except timings.csv and manifest.json is deterministic.
void write_study(const StudyResult& result, const std::filesystem::path& out_dir);

std::string version_string();

}  // namespace phong::bench
