// Command-line front end: single fits, studies, lambda_n sweeps and the
// surface evaluation timing probe.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "phong/csv.hpp"
#include "phong/mesh_io.hpp"
#include "phong/probe.hpp"
#include "phong/skinned_io.hpp"
#include "phong/study.hpp"

namespace fs = std::filesystem;
using namespace phong;

namespace {

struct Common {
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string out_dir = "phongfit-out";
  std::string model = "ellipsoid-320";
  std::string surface = "phong";
  std::string optimizer = "lifted";
  double lambda_n = 1.0;
  int iters = 50;
  int trials = 400;
  double noise = 0.1;
  bool visible_only = false;
};

std::vector<Observation> read_observations(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open data file " + path.string());
  const csv::Table table = csv::read(in);
  std::vector<Observation> out;
  for (std::size_t r = 0; r < table.size(); ++r) {
    const auto& row = table[r];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != 6) {
      throw Error(path.string() + ":" + std::to_string(r + 1) + ": expected x,y,z,nx,ny,nz");
    }
    double v[6];
    try {
      for (int k = 0; k < 6; ++k) v[k] = std::stod(row[k]);
    } catch (const std::exception&) {
      if (r == 0) continue;  // header
      throw Error(path.string() + ":" + std::to_string(r + 1) + ": not a number");
    }
    Observation obs;
    obs.point = Vec3(v[0], v[1], v[2]);
    obs.normal = Vec3(v[3], v[4], v[5]).normalized();
    out.push_back(obs);
  }
  if (out.empty()) throw Error(path.string() + ": no observations");
  return out;
}

Eigen::VectorXd parse_vector(const std::string& text, int size) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(size);
  if (text.empty()) return v;
  std::stringstream ss(text);
  std::string item;
  int k = 0;
  while (std::getline(ss, item, ',')) {
    if (k >= size) throw ConfigError("initial pose has more than " + std::to_string(size) + " entries");
    v[k++] = std::stod(item);
  }
  if (k != size) throw ConfigError("initial pose needs " + std::to_string(size) + " entries");
  return v;
}

std::unique_ptr<PoseModel> load_model(const std::string& mesh_path, const std::string& model) {
  if (!mesh_path.empty()) return std::make_unique<RigidModel>(load_mesh(mesh_path));
  if (fs::path(model).extension() == ".json") {
    return std::make_unique<SkinnedModel>(load_skinned_model(model));
  }
  return bench::make_model(bench::parse_model_id(model));
}

bench::StudyConfig config_from_flags(const Common& c) {
  bench::StudyConfig cfg;
  cfg.seed = c.seed;
  cfg.trials = c.trials;
  cfg.iterations = c.iters;
  cfg.snapshots = {std::min(10, c.iters), c.iters};
  cfg.sampling.noise = c.noise;
  cfg.sampling.visible_only = c.visible_only;
  cfg.runs.push_back({bench::parse_model_id(c.model), parse_surface_type(c.surface),
                      parse_optimizer(c.optimizer), c.lambda_n, c.iters});
  return cfg;
}

void add_common(CLI::App* app, Common& c, bool fit_flags) {
  app->add_option("--seed", c.seed, "Random seed");
  app->add_option("--out-dir", c.out_dir, "Output directory");
  app->add_option("--model", c.model, "ellipsoid-320, ellipsoid-1280, chain3 or a skinned model JSON");
  app->add_option("--surface", c.surface, "phong or trimesh")->check(CLI::IsMember({"phong", "trimesh"}));
  app->add_option("--optimizer", c.optimizer, "lifted or icp")->check(CLI::IsMember({"lifted", "icp"}));
  app->add_option("--iters", c.iters, "Iteration cap")->check(CLI::NonNegativeNumber);
  app->add_option("--noise", c.noise, "Noise range for synthetic data")->check(CLI::NonNegativeNumber);
  app->add_flag("--visible-only", c.visible_only, "Sample only patches facing +z");
  if (fit_flags) {
    app->add_option("--lambda-n", c.lambda_n, "Normal term weight")->check(CLI::NonNegativeNumber);
  }
  if (app->get_name() != "fit") {
    app->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
    app->add_option("--trials", c.trials, "Trials per run")->check(CLI::PositiveNumber);
  }
}

int run_fit_command(const Common& c, const std::string& mesh_path, const std::string& data_path,
                    const std::string& init, int count) {
  const auto model = load_model(mesh_path, c.model);
  std::vector<Observation> data;
  Eigen::VectorXd truth;
  if (!data_path.empty()) {
    data = read_observations(data_path);
  } else {
    // Synthetic data at a random ellipsoid-style pose.
    std::mt19937_64 rng(c.seed);
    truth = Eigen::VectorXd::Zero(model->num_params());
    truth.head<6>() = bench::random_ellipsoid_pose(rng);
    bench::SamplingSpec spec;
    spec.count = count;
    spec.noise = c.noise;
    spec.visible_only = c.visible_only;
    data = bench::observations_of(bench::sample_observations(*model, truth, spec, rng));
  }

  FitConfig fit;
  fit.lambda_n = c.lambda_n;
  fit.surface = parse_surface_type(c.surface);
  fit.optimizer = parse_optimizer(c.optimizer);
  fit.max_iterations = c.iters;
  const FitReport report = run_fit(*model, data, parse_vector(init, model->num_params()), fit);

  fs::create_directories(c.out_dir);
  std::ofstream out(fs::path(c.out_dir) / "fit_trace.csv", std::ios::binary);
  csv::Writer w(out);
  std::vector<std::string> header = {"iteration", "energy"};
  for (int k = 0; k < model->num_params(); ++k) header.push_back("theta" + std::to_string(k));
  if (truth.size() > 0) header.push_back("rotation_error_deg");
  w.row(header);
  for (std::size_t i = 0; i < report.energy_trace.size(); ++i) {
    std::vector<std::string> row = {std::to_string(i), csv::format(report.energy_trace[i])};
    for (int k = 0; k < model->num_params(); ++k) row.push_back(csv::format(report.theta_trace[i][k]));
    if (truth.size() > 0) row.push_back(csv::format(bench::rotation_error(report.theta_trace[i], truth)));
    w.row(row);
  }

  std::printf("iterations %d  converged %s  energy %.6g -> %.6g\n", report.iterations,
              report.converged ? "yes" : "no", report.energy_trace.front(),
              report.energy_trace.back());
  std::printf("theta");
  for (int k = 0; k < report.theta.size(); ++k) std::printf(" %.9g", report.theta[k]);
  std::printf("\n");
  if (truth.size() > 0) {
    std::printf("rotation error %.4f deg\n", bench::rotation_error(report.theta, truth));
  }
  return 0;
}

void print_run_summary(const bench::StudyResult& result) {
  for (std::size_t r = 0; r < result.runs.size(); ++r) {
    const auto& run = result.runs[r];
    const auto final = bench::summarize(bench::errors_at(run, run.spec.iterations));
    std::printf("run %zu  %s %s %s lambda_n=%g  mean error %.3f deg (stderr %.3f) after %d iterations\n",
                r, std::string(bench::to_string(run.spec.model)).c_str(),
                std::string(to_string(run.spec.surface)).c_str(),
                std::string(to_string(run.spec.optimizer)).c_str(), run.spec.lambda_n, final.mean,
                final.stderr_mean, run.spec.iterations);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model fitting to oriented points with Phong surfaces"};
  app.require_subcommand(1);

  Common common;

  auto* fit = app.add_subcommand("fit", "Fit one model to data");
  std::string mesh_path, data_path, init;
  int count = 200;
  add_common(fit, common, true);
  fit->add_option("--mesh", mesh_path, "Mesh file (v/vn/f text); overrides --model");
  fit->add_option("--data", data_path, "CSV of x,y,z,nx,ny,nz; synthetic data if omitted");
  fit->add_option("--init", init, "Comma-separated initial pose (default zero)");
  fit->add_option("--count", count, "Synthetic datum count")->check(CLI::PositiveNumber);

  auto* study = app.add_subcommand("study", "Run a trial grid and write CSV artifacts");
  std::string config_path;
  add_common(study, common, true);
  study->add_option("--config", config_path, "Study config JSON (flags define one run if omitted)");

  auto* sweep = app.add_subcommand("sweep", "Sweep lambda_n over 0, 0.05, ..., 1");
  add_common(sweep, common, false);

  auto* probe = app.add_subcommand("probe", "Time surface evaluations");
  std::int64_t probe_count = 1000000;
  int repetitions = 3;
  probe->add_option("--count", probe_count, "Evaluations per timing");
  probe->add_option("--repetitions", repetitions, "Timings per mode (minimum reported)");
  probe->add_option("--out-dir", common.out_dir, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) return run_fit_command(common, mesh_path, data_path, init, count);

    if (study->parsed()) {
      bench::StudyConfig cfg;
      if (config_path.empty()) {
        cfg = config_from_flags(common);
      } else {
        cfg = bench::load_study_config(config_path);
        if (study->count("--seed")) cfg.seed = common.seed;
        if (study->count("--trials")) cfg.trials = common.trials;
      }
      const auto result = bench::run_study(cfg, common.jobs);
      bench::write_study(result, common.out_dir);
      print_run_summary(result);
      return 0;
    }

    if (sweep->parsed()) {
      bench::StudyConfig cfg = config_from_flags(common);
      cfg.runs.clear();
      for (double l : bench::sweep_lambdas()) {
        cfg.runs.push_back({bench::parse_model_id(common.model), parse_surface_type(common.surface),
                            parse_optimizer(common.optimizer), l, common.iters});
      }
      const auto result = bench::run_study(cfg, common.jobs);
      bench::write_study(result, common.out_dir);
      print_run_summary(result);
      double best = std::numeric_limits<double>::infinity();
      double best_lambda = 0.0;
      for (const auto& run : result.runs) {
        const double m = bench::summarize(bench::errors_at(run, run.spec.iterations)).mean;
        if (m < best) {
          best = m;
          best_lambda = run.spec.lambda_n;
        }
      }
      std::printf("best lambda_n %g (mean error %.3f deg)\n", best_lambda, best);
      return 0;
    }

    if (probe->parsed()) {
      const auto phong = bench::timing_probe(SurfaceType::phong, probe_count, repetitions);
      const auto tri = bench::timing_probe(SurfaceType::trimesh, probe_count, repetitions);
      fs::create_directories(common.out_dir);
      std::ofstream out(fs::path(common.out_dir) / "probe.csv", std::ios::binary);
      csv::Writer w(out);
      w.row({"surface", "count", "eval_seconds", "derivative_seconds", "eval_flops",
             "derivative_flops"});
      for (const auto& p : {phong, tri}) {
        w.row({std::string(to_string(p.surface)), std::to_string(p.count),
               csv::format(p.eval_seconds), csv::format(p.derivative_seconds),
               std::to_string(p.eval_flops), std::to_string(p.derivative_flops)});
        std::printf("%-8s eval %.4fs  with d/du %.4fs\n", std::string(to_string(p.surface)).c_str(),
                    p.eval_seconds, p.derivative_seconds);
      }
      std::printf("ratio phong/trimesh: eval %.3f  with d/du %.3f\n",
                  phong.eval_seconds / tri.eval_seconds,
                  phong.derivative_seconds / tri.derivative_seconds);
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
