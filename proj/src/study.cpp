#include "phong/study.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numbers>
#include <thread>

#include <unistd.h>

#include "phong/csv.hpp"

#ifndef PHONGFIT_VERSION
#define PHONGFIT_VERSION "unknown"
#endif

namespace phong::bench {

using nlohmann::json;

std::string_view to_string(ModelId id) {
  switch (id) {
    case ModelId::ellipsoid_320:
      return "ellipsoid-320";
    case ModelId::ellipsoid_1280:
      return "ellipsoid-1280";
    case ModelId::chain3:
      return "chain3";
  }
  return "unknown";
}

ModelId parse_model_id(std::string_view name) {
  if (name == "ellipsoid-320") return ModelId::ellipsoid_320;
  if (name == "ellipsoid-1280") return ModelId::ellipsoid_1280;
  if (name == "chain3") return ModelId::chain3;
  throw ConfigError("unknown model '" + std::string(name) +
                    "' (expected ellipsoid-320, ellipsoid-1280 or chain3)");
}

std::unique_ptr<PoseModel> make_model(ModelId id) {
  switch (id) {
    case ModelId::ellipsoid_320:
      return std::make_unique<RigidModel>(make_ellipsoid(320));
    case ModelId::ellipsoid_1280:
      return std::make_unique<RigidModel>(make_ellipsoid(1280));
    case ModelId::chain3:
      return std::make_unique<SkinnedModel>(make_chain());
  }
  throw ConfigError("unknown model");
}

std::vector<double> sweep_lambdas() {
  std::vector<double> out;
  for (int k = 0; k <= 20; ++k) out.push_back(k / 20.0);
  return out;
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw ConfigError("study config: field '" + field + "': " + what);
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) field_error(where.empty() ? "<root>" : where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (std::string_view a : allowed) ok = ok || key == a;
    if (!ok) field_error(where.empty() ? key : where + "." + key, "unknown field");
  }
}

int get_int(const json& obj, const std::string& key, const std::string& path, int fallback,
            int min_value) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) field_error(path, "expected an integer");
  const auto x = v.get<std::int64_t>();
  if (x < min_value || x > std::numeric_limits<int>::max()) {
    field_error(path, "must be at least " + std::to_string(min_value));
  }
  return static_cast<int>(x);
}

double get_double(const json& obj, const std::string& key, const std::string& path,
                  double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) field_error(path, "expected a number");
  return v.get<double>();
}

std::string get_string(const json& v, const std::string& path) {
  if (!v.is_string()) field_error(path, "expected a string");
  return v.get<std::string>();
}

template <typename F>
auto parse_field(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind("study config:", 0) == 0) throw;
    field_error(path, msg);
  }
}

const json& get_array(const json& obj, const std::string& key, const std::string& path) {
  const json& v = obj.at(key);
  if (!v.is_array() || v.empty()) field_error(path, "expected a nonempty array");
  return v;
}

}  // namespace

StudyConfig parse_study_config(const json& doc) {
  check_keys(doc, "", {"seed", "trials", "iterations", "snapshots", "data", "runs", "grid"});
  StudyConfig cfg;
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) field_error("seed", "expected a nonnegative integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }
  cfg.trials = get_int(doc, "trials", "trials", cfg.trials, 1);
  cfg.iterations = get_int(doc, "iterations", "iterations", cfg.iterations, 0);
  if (doc.contains("snapshots")) {
    const json& s = doc["snapshots"];
    if (!s.is_array()) field_error("snapshots", "expected an array of iteration counts");
    cfg.snapshots.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::string path = "snapshots[" + std::to_string(i) + "]";
      if (!s[i].is_number_integer() || s[i].get<std::int64_t>() < 0) {
        field_error(path, "expected a nonnegative integer");
      }
      cfg.snapshots.push_back(s[i].get<int>());
    }
  }
  if (doc.contains("data")) {
    const json& d = doc["data"];
    check_keys(d, "data", {"count", "noise", "noise_mode", "visible_only"});
    cfg.sampling.count = get_int(d, "count", "data.count", cfg.sampling.count, 1);
    cfg.sampling.noise = get_double(d, "noise", "data.noise", cfg.sampling.noise);
    if (!(cfg.sampling.noise >= 0.0)) field_error("data.noise", "must be nonnegative");
    if (d.contains("noise_mode")) {
      const std::string mode = get_string(d["noise_mode"], "data.noise_mode");
      cfg.sampling.noise_mode = parse_field("data.noise_mode", [&] { return parse_noise_mode(mode); });
    }
    if (d.contains("visible_only")) {
      if (!d["visible_only"].is_boolean()) field_error("data.visible_only", "expected true or false");
      cfg.sampling.visible_only = d["visible_only"].get<bool>();
    }
  }

  auto parse_lambda = [](const json& v, const std::string& path) {
    if (!v.is_number()) field_error(path, "expected a number");
    const double x = v.get<double>();
    if (!(x >= 0.0)) field_error(path, "must be nonnegative");
    return x;
  };

  if (doc.contains("runs")) {
    const json& runs = doc["runs"];
    if (!runs.is_array()) field_error("runs", "expected an array");
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const std::string base = "runs[" + std::to_string(i) + "]";
      const json& r = runs[i];
      check_keys(r, base, {"model", "surface", "optimizer", "lambda_n", "iterations"});
      RunSpec spec;
      spec.iterations = cfg.iterations;
      for (const char* key : {"model", "surface", "optimizer"}) {
        if (!r.contains(key)) field_error(base + "." + key, "missing");
      }
      const std::string model = get_string(r["model"], base + ".model");
      spec.model = parse_field(base + ".model", [&] { return parse_model_id(model); });
      const std::string surface = get_string(r["surface"], base + ".surface");
      spec.surface = parse_field(base + ".surface", [&] { return parse_surface_type(surface); });
      const std::string opt = get_string(r["optimizer"], base + ".optimizer");
      spec.optimizer = parse_field(base + ".optimizer", [&] { return parse_optimizer(opt); });
      if (r.contains("lambda_n")) spec.lambda_n = parse_lambda(r["lambda_n"], base + ".lambda_n");
      spec.iterations = get_int(r, "iterations", base + ".iterations", spec.iterations, 0);
      cfg.runs.push_back(spec);
    }
  }

  if (doc.contains("grid")) {
    const json& g = doc["grid"];
    check_keys(g, "grid", {"models", "surfaces", "optimizers", "lambda_n"});
    for (const char* key : {"models", "surfaces", "optimizers", "lambda_n"}) {
      if (!g.contains(key)) field_error(std::string("grid.") + key, "missing");
    }
    std::vector<ModelId> models;
    std::vector<SurfaceType> surfaces;
    std::vector<Optimizer> optimizers;
    std::vector<double> lambdas;
    const json& gm = get_array(g, "models", "grid.models");
    for (std::size_t i = 0; i < gm.size(); ++i) {
      const std::string path = "grid.models[" + std::to_string(i) + "]";
      const std::string s = get_string(gm[i], path);
      models.push_back(parse_field(path, [&] { return parse_model_id(s); }));
    }
    const json& gs = get_array(g, "surfaces", "grid.surfaces");
    for (std::size_t i = 0; i < gs.size(); ++i) {
      const std::string path = "grid.surfaces[" + std::to_string(i) + "]";
      const std::string s = get_string(gs[i], path);
      surfaces.push_back(parse_field(path, [&] { return parse_surface_type(s); }));
    }
    const json& go = get_array(g, "optimizers", "grid.optimizers");
    for (std::size_t i = 0; i < go.size(); ++i) {
      const std::string path = "grid.optimizers[" + std::to_string(i) + "]";
      const std::string s = get_string(go[i], path);
      optimizers.push_back(parse_field(path, [&] { return parse_optimizer(s); }));
    }
    const json& gl = get_array(g, "lambda_n", "grid.lambda_n");
    for (std::size_t i = 0; i < gl.size(); ++i) {
      lambdas.push_back(parse_lambda(gl[i], "grid.lambda_n[" + std::to_string(i) + "]"));
    }
    for (ModelId m : models) {
      for (SurfaceType s : surfaces) {
        for (Optimizer o : optimizers) {
          for (double l : lambdas) cfg.runs.push_back({m, s, o, l, cfg.iterations});
        }
      }
    }
  }
  if (cfg.runs.empty()) field_error("runs", "the study defines no runs (give 'runs' or 'grid')");
  return cfg;
}

StudyConfig load_study_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open study config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_study_config(doc);
}

json to_json(const StudyConfig& config) {
  json runs = json::array();
  for (const RunSpec& r : config.runs) {
    runs.push_back({{"model", to_string(r.model)},
                    {"surface", to_string(r.surface)},
                    {"optimizer", to_string(r.optimizer)},
                    {"lambda_n", r.lambda_n},
                    {"iterations", r.iterations}});
  }
  return {{"seed", config.seed},
          {"trials", config.trials},
          {"iterations", config.iterations},
          {"snapshots", config.snapshots},
          {"data",
           {{"count", config.sampling.count},
            {"noise", config.sampling.noise},
            {"noise_mode", to_string(config.sampling.noise_mode)},
            {"visible_only", config.sampling.visible_only}}},
          {"runs", runs}};
}

// ---------------------------------------------------------------------------
// Trials

TrialSetup make_trial(const PoseModel& model, ModelId id, const SamplingSpec& sampling,
                      std::uint64_t study_seed, int trial) {
  std::mt19937_64 rng(trial_seed(study_seed, trial));
  TrialSetup setup;
  if (id == ModelId::chain3) {
    const int p = model.num_params();
    auto uniform = [&](double h) { return std::uniform_real_distribution<double>(-h, h)(rng); };
    setup.truth = Eigen::VectorXd::Zero(p);
    for (int k = 0; k < 3; ++k) setup.truth[k] = uniform(0.2);
    for (int k = 3; k < 6; ++k) setup.truth[k] = uniform(0.4);
    for (int k = 6; k < p; ++k) setup.truth[k] = uniform(0.7);
    setup.samples = sample_observations(model, setup.truth, sampling, rng);
    setup.start = setup.truth;
    for (int k = 0; k < 3; ++k) setup.start[k] += uniform(0.1);
    for (int k = 3; k < 6; ++k) setup.start[k] += uniform(0.15);
    for (int k = 6; k < p; ++k) setup.start[k] += uniform(0.3);
  } else {
    setup.truth = random_ellipsoid_pose(rng);
    setup.samples = sample_observations(model, setup.truth, sampling, rng);
    // Every ellipsoid fit starts from the neutral pose.
    setup.start = Eigen::VectorXd::Zero(model.num_params());
  }
  return setup;
}

TrialResult run_trial(const PoseModel& model, const RunSpec& spec, const TrialSetup& setup,
                      int trial) {
  FitConfig fit;
  fit.lambda_n = spec.lambda_n;
  fit.surface = spec.surface;
  fit.optimizer = spec.optimizer;
  fit.max_iterations = spec.iterations;
  fit.stop_on_convergence = false;

  const std::vector<Observation> data = observations_of(setup.samples);
  const FitReport report = run_fit(model, data, setup.start, fit);

  TrialResult r;
  r.trial = trial;
  r.truth = setup.truth;
  r.truth_angle_deg = setup.truth[3] * 180.0 / std::numbers::pi;
  r.iterations = report.iterations;
  r.converged = report.converged;
  r.aborted = report.aborted;
  r.monotone = report.monotone;
  r.walk_truncations = report.walk_truncations;
  double elapsed = 0.0;
  for (std::size_t k = 0; k < report.theta_trace.size(); ++k) {
    r.errors.push_back(rotation_error(report.theta_trace[k], setup.truth));
    r.energies.push_back(report.energy_trace[k]);
    if (k > 0) elapsed += report.iteration_seconds[k - 1];
    r.seconds.push_back(elapsed);
  }
  // An aborted fit keeps its last state for the remaining budget.
  while (static_cast<int>(r.errors.size()) < spec.iterations + 1) {
    r.errors.push_back(r.errors.back());
    r.energies.push_back(r.energies.back());
    r.seconds.push_back(r.seconds.back());
  }
  return r;
}

StudyResult run_study(const StudyConfig& config, int jobs) {
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  StudyResult result;
  result.config = config;

  // One model and one set of trial setups per model id, shared by all runs.
  std::vector<ModelId> ids;
  for (const RunSpec& r : config.runs) {
    if (std::find(ids.begin(), ids.end(), r.model) == ids.end()) ids.push_back(r.model);
  }
  std::vector<std::unique_ptr<PoseModel>> models;
  std::vector<std::vector<TrialSetup>> setups;
  for (ModelId id : ids) {
    models.push_back(make_model(id));
    std::vector<TrialSetup> s;
    for (int t = 0; t < config.trials; ++t) {
      s.push_back(make_trial(*models.back(), id, config.sampling, config.seed, t));
    }
    setups.push_back(std::move(s));
  }

  result.runs.resize(config.runs.size());
  std::vector<std::pair<int, int>> tasks;
  for (std::size_t r = 0; r < config.runs.size(); ++r) {
    result.runs[r].spec = config.runs[r];
    result.runs[r].trials.resize(config.trials);
    for (int t = 0; t < config.trials; ++t) tasks.emplace_back(static_cast<int>(r), t);
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= tasks.size()) return;
      const auto [r, t] = tasks[k];
      const RunSpec& spec = config.runs[r];
      const std::size_t m = std::find(ids.begin(), ids.end(), spec.model) - ids.begin();
      try {
        result.runs[r].trials[t] = run_trial(*models[m], spec, setups[m][t], t);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = tasks.size();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (std::thread& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return result;
}

// ---------------------------------------------------------------------------
// Aggregation and output

Stats summarize(std::span<const double> values) {
  Stats s;
  s.count = static_cast<int>(values.size());
  if (s.count == 0) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / s.count;
  if (s.count > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stdev = std::sqrt(sq / (s.count - 1));
    s.stderr_mean = s.stdev / std::sqrt(static_cast<double>(s.count));
  }
  return s;
}

int angle_bin(double angle_deg) {
  const int b = static_cast<int>(std::floor((angle_deg + 180.0) / (360.0 / kAngleBins)));
  return std::clamp(b, 0, kAngleBins - 1);
}

std::vector<double> errors_at(const RunResult& run, int iteration) {
  std::vector<double> out;
  out.reserve(run.trials.size());
  for (const TrialResult& t : run.trials) out.push_back(t.errors.at(iteration));
  return out;
}

int first_iteration_below(const RunResult& run, double threshold_deg) {
  for (int k = 0; k <= run.spec.iterations; ++k) {
    if (summarize(errors_at(run, k)).mean < threshold_deg) return k;
  }
  return -1;
}

std::string version_string() { return PHONGFIT_VERSION; }

namespace {

std::vector<std::string> run_columns(int index, const RunSpec& s) {
  return {std::to_string(index), std::string(to_string(s.model)), std::string(to_string(s.surface)),
          std::string(to_string(s.optimizer)), csv::format(s.lambda_n)};
}

std::vector<std::string> concat(std::vector<std::string> a, std::initializer_list<std::string> b) {
  a.insert(a.end(), b);
  return a;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::string hostname() {
  char buf[256] = {};
  if (gethostname(buf, sizeof buf - 1) != 0) return "unknown";
  return buf;
}

}  // namespace

void write_study(const StudyResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::vector<std::string> run_header = {"run", "model", "surface", "optimizer", "lambda_n"};

  {
    auto out = open_output(out_dir / "trials.csv");
    csv::Writer w(out);
    w.row(concat(run_header, {"trial", "truth_angle_deg", "initial_error_deg", "final_error_deg",
                              "initial_energy", "final_energy", "iterations", "converged",
                              "aborted", "monotone", "walk_truncations"}));
    for (std::size_t r = 0; r < result.runs.size(); ++r) {
      const RunResult& run = result.runs[r];
      for (const TrialResult& t : run.trials) {
        w.row(concat(run_columns(static_cast<int>(r), run.spec),
                     {std::to_string(t.trial), csv::format(t.truth_angle_deg),
                      csv::format(t.errors.front()), csv::format(t.errors.back()),
                      csv::format(t.energies.front()), csv::format(t.energies.back()),
                      std::to_string(t.iterations), t.converged ? "1" : "0",
                      t.aborted ? "1" : "0", t.monotone ? "1" : "0",
                      std::to_string(t.walk_truncations)}));
      }
    }
  }
  {
    auto out = open_output(out_dir / "per_iteration.csv");
    csv::Writer w(out);
    w.row({"run", "trial", "iteration", "error_deg", "energy"});
    for (std::size_t r = 0; r < result.runs.size(); ++r) {
      for (const TrialResult& t : result.runs[r].trials) {
        for (std::size_t k = 0; k < t.errors.size(); ++k) {
          w.row({std::to_string(r), std::to_string(t.trial), std::to_string(k),
                 csv::format(t.errors[k]), csv::format(t.energies[k])});
        }
      }
    }
  }
  {
    auto out = open_output(out_dir / "aggregate_iterations.csv");
    csv::Writer w(out);
    w.row(concat(run_header, {"iteration", "count", "mean_error_deg", "stdev_error_deg",
                              "stderr_error_deg"}));
    for (std::size_t r = 0; r < result.runs.size(); ++r) {
      const RunResult& run = result.runs[r];
      for (int k = 0; k <= run.spec.iterations; ++k) {
        const Stats s = summarize(errors_at(run, k));
        w.row(concat(run_columns(static_cast<int>(r), run.spec),
                     {std::to_string(k), std::to_string(s.count), csv::format(s.mean),
                      csv::format(s.stdev), csv::format(s.stderr_mean)}));
      }
    }
  }
  {
    auto out = open_output(out_dir / "aggregate_angle_bins.csv");
    csv::Writer w(out);
    w.row(concat(run_header, {"bin", "angle_lo_deg", "angle_hi_deg", "count", "mean_error_deg",
                              "stdev_error_deg", "stderr_error_deg"}));
    const double width = 360.0 / kAngleBins;
    for (std::size_t r = 0; r < result.runs.size(); ++r) {
      const RunResult& run = result.runs[r];
      std::vector<std::vector<double>> bins(kAngleBins);
      for (const TrialResult& t : run.trials) {
        bins[angle_bin(t.truth_angle_deg)].push_back(t.errors.back());
      }
      for (int b = 0; b < kAngleBins; ++b) {
        const Stats s = summarize(bins[b]);
        w.row(concat(run_columns(static_cast<int>(r), run.spec),
                     {std::to_string(b), csv::format(-180.0 + b * width),
                      csv::format(-180.0 + (b + 1) * width), std::to_string(s.count),
                      csv::format(s.mean), csv::format(s.stdev), csv::format(s.stderr_mean)}));
      }
    }
  }
  {
    auto out = open_output(out_dir / "ablation.csv");
    csv::Writer w(out);
    w.row(concat(run_header, {"iteration", "mean_error_deg", "stderr_error_deg"}));
    for (std::size_t r = 0; r < result.runs.size(); ++r) {
      const RunResult& run = result.runs[r];
      for (int k : result.config.snapshots) {
        if (k > run.spec.iterations) continue;
        const Stats s = summarize(errors_at(run, k));
        w.row(concat(run_columns(static_cast<int>(r), run.spec),
                     {std::to_string(k), csv::format(s.mean), csv::format(s.stderr_mean)}));
      }
    }
  }
  {
    auto out = open_output(out_dir / "timings.csv");
    csv::Writer w(out);
    w.row(concat(run_header, {"iteration", "mean_seconds", "mean_error_deg"}));
    for (std::size_t r = 0; r < result.runs.size(); ++r) {
      const RunResult& run = result.runs[r];
      for (int k = 0; k <= run.spec.iterations; ++k) {
        std::vector<double> secs;
        for (const TrialResult& t : run.trials) secs.push_back(t.seconds.at(k));
        w.row(concat(run_columns(static_cast<int>(r), run.spec),
                     {std::to_string(k), csv::format(summarize(secs).mean),
                      csv::format(summarize(errors_at(run, k)).mean)}));
      }
    }
  }
  {
    json manifest = {
        {"version", version_string()},
        {"config", to_json(result.config)},
        {"host",
         {{"hostname", hostname()},
          {"hardware_threads", std::thread::hardware_concurrency()},
          {"compiler", __VERSION__}}},
        {"files",
         {"trials.csv", "per_iteration.csv", "aggregate_iterations.csv",
          "aggregate_angle_bins.csv", "ablation.csv", "timings.csv"}},
        {"deterministic_files",
         {"trials.csv", "per_iteration.csv", "aggregate_iterations.csv",
          "aggregate_angle_bins.csv", "ablation.csv"}}};
    auto out = open_output(out_dir / "manifest.json");
    out << manifest.dump(2) << '\n';
  }
}

}  // namespace phong::bench
