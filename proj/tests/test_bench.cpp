#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "phong/csv.hpp"
#include "phong/probe.hpp"
#include "phong/study.hpp"
#include "support.hpp"

using namespace phong;
using namespace phong::bench;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

csv::Table read_table(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return csv::read(in);
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("phongfit-test-" + name);
  fs::remove_all(p);
  return p;
}

Eigen::VectorXd pose_from(const Mat3& R) {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(6);
  theta.tail<3>() = axis_angle_from_rotation(R);
  return theta;
}

Mat3 about(const Vec3& axis, double degrees) {
  return Eigen::AngleAxisd(degrees * std::numbers::pi / 180.0, axis.normalized()).toRotationMatrix();
}

StudyConfig small_config() {
  StudyConfig cfg;
  cfg.seed = 77;
  cfg.trials = 4;
  cfg.iterations = 6;
  cfg.snapshots = {2, 6};
  cfg.runs = {{ModelId::ellipsoid_320, SurfaceType::phong, Optimizer::lifted, 1.0, 6},
              {ModelId::ellipsoid_320, SurfaceType::trimesh, Optimizer::icp, 0.05, 4},
              {ModelId::chain3, SurfaceType::phong, Optimizer::lifted, 1.0, 3}};
  return cfg;
}

}  // namespace

TEST_CASE("ellipsoid meshes are closed spheres") {
  for (int facets : {320, 1280}) {
    const ControlMesh m = make_ellipsoid(facets);
    CHECK(m.num_triangles() == facets);
    CHECK(m.is_closed());
    CHECK(m.num_vertices() - m.num_interior_edges() + m.num_triangles() == 2);
    // Outward winding: positive signed volume.
    double volume = 0.0;
    for (const Triangle& t : m.triangles()) {
      volume += m.positions()[t[0]].dot(m.positions()[t[1]].cross(m.positions()[t[2]])) / 6.0;
    }
    CHECK(volume > 0.0);
  }
  CHECK_THROWS(make_ellipsoid(640));
}

TEST_CASE("the finer ellipsoid is one subdivision of the coarser") {
  const ControlMesh a = ellipsoid_control_mesh(320);
  const ControlMesh b = ellipsoid_control_mesh(1280);
  CHECK(b.num_triangles() == 4 * a.num_triangles());
  // Each edge gains one midpoint vertex.
  CHECK(b.num_vertices() == a.num_vertices() + a.num_interior_edges());
}

TEST_CASE("ellipsoid radii before and after the limit projection") {
  // Limit positions pull every axis vertex in by the same factor; the
  // factors below were measured once and are frozen.
  const std::map<int, double> shrink = {{320, 0.97734189839570418}, {1280, 0.99430259385785635}};
  for (const auto& [facets, factor] : shrink) {
    for (int limit = 0; limit < 2; ++limit) {
      const ControlMesh m = limit ? make_ellipsoid(facets) : ellipsoid_control_mesh(facets);
      Vec3 extent = Vec3::Zero();
      for (const Vec3& p : m.positions()) extent = extent.cwiseMax(p.cwiseAbs());
      const double s = limit ? factor : 1.0;
      for (int k = 0; k < 3; ++k) CHECK(std::abs(extent[k] - s * kEllipsoidRadii[k]) < 1e-12);
    }
  }
}

TEST_CASE("noise-free sample lies on the surface") {
  const RigidModel model(make_ellipsoid(320));
  std::mt19937_64 rng(1);
  SamplingSpec spec;
  spec.count = 1;
  spec.noise = 0.0;
  spec.visible_only = false;
  const auto samples = sample_observations(model, Eigen::VectorXd::Zero(6), spec, rng);
  REQUIRE(samples.size() == 1);
  const auto e = eval_phong(model.mesh(), rest_pose(model.mesh()), samples[0].coord, {false, false});
  CHECK((samples[0].observation.point - e.position).norm() == 0.0);
  CHECK(std::abs(samples[0].observation.normal.norm() - 1.0) < 1e-15);
}

TEST_CASE("noise stays inside the configured range") {
  const RigidModel model(make_ellipsoid(320));
  std::mt19937_64 rng(2);
  for (NoiseMode mode : {NoiseMode::positive, NoiseMode::symmetric}) {
    SamplingSpec spec;
    spec.count = 500;
    spec.noise_mode = mode;
    const Eigen::VectorXd theta = random_ellipsoid_pose(rng);
    const auto samples = sample_observations(model, theta, spec, rng);
    const auto posed = model.pose(theta, false);
    double lo = 1.0, hi = -1.0;
    for (const Sample& s : samples) {
      const Vec3 d = s.observation.point - eval_phong(model.mesh(), posed, s.coord, {false, false}).position;
      lo = std::min(lo, d.minCoeff());
      hi = std::max(hi, d.maxCoeff());
      CHECK(std::abs(s.observation.normal.norm() - 1.0) < 1e-12);
    }
    CHECK(hi <= 0.1);
    CHECK(lo >= (mode == NoiseMode::positive ? 0.0 : -0.1));
    CHECK(hi > 0.09);
    if (mode == NoiseMode::symmetric) CHECK(lo < -0.09);
  }
}

TEST_CASE("visible-only samples come from patches facing +z") {
  const RigidModel model(make_ellipsoid(320));
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd theta = random_ellipsoid_pose(rng);
    SamplingSpec spec;
    const auto samples = sample_observations(model, theta, spec, rng);
    const auto posed = model.pose(theta, false);
    std::vector<bool> used(model.mesh().num_triangles(), false);
    for (const Sample& s : samples) {
      CHECK(eval_trimesh(model.mesh(), posed, s.coord, {false, false}).normal.z() > 0.0);
      used[s.coord.patch] = true;
    }
    // Only part of the surface is covered.
    CHECK(std::count(used.begin(), used.end(), true) < model.mesh().num_triangles());
  }
}

TEST_CASE("hidden model has no visible triangle") {
  // A single triangle facing -z.
  const RigidModel model(ControlMesh({{0, 0, 0}, {0, 1, 0}, {1, 0, 0}},
                                     {{0, 0, -1}, {0, 0, -1}, {0, 0, -1}}, {{0, 1, 2}}));
  std::mt19937_64 rng(4);
  CHECK_THROWS_AS(sample_observations(model, Eigen::VectorXd::Zero(6), SamplingSpec{}, rng), Error);
}

TEST_CASE("triangle selection frequency follows area") {
  const RigidModel model(make_ellipsoid(320));
  std::mt19937_64 rng(5);
  SamplingSpec spec;
  spec.count = 1000000;
  spec.noise = 0.0;
  spec.visible_only = false;
  const auto samples = sample_observations(model, Eigen::VectorXd::Zero(6), spec, rng);
  const ControlMesh& m = model.mesh();
  std::vector<double> counts(m.num_triangles(), 0.0);
  Eigen::Vector2d mean_vw = Eigen::Vector2d::Zero();
  for (const Sample& s : samples) {
    counts[s.coord.patch] += 1.0;
    mean_vw += Eigen::Vector2d(s.coord.v, s.coord.w) / spec.count;
  }
  double total_area = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) total_area += m.triangle_area(t);
  double chi2 = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) {
    const double expected = spec.count * m.triangle_area(t) / total_area;
    chi2 += (counts[t] - expected) * (counts[t] - expected) / expected;
  }
  const boost::math::chi_squared dist(m.num_triangles() - 1);
  CHECK(chi2 < boost::math::quantile(dist, 0.99));
  // Uniform on the triangle: both barycentric means are 1/3.
  CHECK(std::abs(mean_vw[0] - 1.0 / 3.0) < 2e-3);
  CHECK(std::abs(mean_vw[1] - 1.0 / 3.0) < 2e-3);
}

TEST_CASE("rotation error examples") {
  std::mt19937_64 rng(6);
  const Mat3 gt = about(testing::random_unit(rng), 70);
  CHECK(rotation_error(pose_from(gt), pose_from(gt)) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rotation_error(pose_from(gt * about(Vec3::UnitX(), 180)), pose_from(gt)) < 1e-6);
  CHECK(rotation_error(pose_from(gt * about(Vec3::UnitZ(), 180)), pose_from(gt)) < 1e-6);
  CHECK(rotation_error(pose_from(gt * about(Vec3::UnitZ(), 30)), pose_from(gt)) ==
        doctest::Approx(30.0).epsilon(1e-10));
  CHECK(rotation_error(pose_from(gt * about(Vec3::UnitY(), 120)), pose_from(gt)) ==
        doctest::Approx(60.0).epsilon(1e-10));
}

TEST_CASE("rotation error is invariant to a common rigid motion") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    const Mat3 fit = about(testing::random_unit(rng), 360.0 * std::uniform_real_distribution<double>()(rng));
    const Mat3 gt = about(testing::random_unit(rng), 360.0 * std::uniform_real_distribution<double>()(rng));
    const Mat3 q = about(testing::random_unit(rng), 360.0 * std::uniform_real_distribution<double>()(rng));
    const double before = rotation_error(pose_from(fit), pose_from(gt));
    const double after = rotation_error(pose_from(q * fit), pose_from(q * gt));
    CHECK(std::abs(before - after) < 1e-9);
    CHECK(before >= 0.0);
    CHECK(before <= 90.0 + 1e-9);
  }
}

TEST_CASE("ground truth poses follow the protocol") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd theta = random_ellipsoid_pose(rng);
    CHECK(theta.head<3>().isZero());
    CHECK(theta[3] == theta[4]);
    CHECK(theta[4] == theta[5]);
    CHECK(std::abs(theta[3]) < std::numbers::pi);
  }
  CHECK(trial_seed(5, 3) == (5u ^ 3u));
}

TEST_CASE("chain model layout") {
  const SkinnedModel chain = make_chain();
  CHECK(chain.num_params() == 10);
  CHECK(chain.mesh().is_closed());
  std::vector<double> sums(chain.mesh().num_vertices(), 0.0);
  for (const SkinWeight& w : chain.weights()) {
    CHECK(w.weight >= 0.0);
    sums[w.vertex] += w.weight;
  }
  for (double s : sums) CHECK(std::abs(s - 1.0) < 1e-9);
  const TrialSetup setup = make_trial(chain, ModelId::chain3, SamplingSpec{}, 3, 1);
  CHECK(setup.truth.size() == 10);
  CHECK(setup.samples.size() == 200);
  CHECK((setup.start - setup.truth).cwiseAbs().maxCoeff() <= 0.3);
}

TEST_CASE("study config parsing") {
  using nlohmann::json;
  const StudyConfig cfg = load_study_config(PHONGFIT_TEST_DATA "/ablation_320.json");
  CHECK(cfg.trials == 400);
  REQUIRE(cfg.runs.size() == 4);
  CHECK(cfg.runs[2].surface == SurfaceType::trimesh);
  CHECK(cfg.runs[2].lambda_n == 0.05);
  CHECK(cfg.runs[3].iterations == 100);
  CHECK(cfg.runs[0].iterations == 50);

  // Grid expansion comes after explicit runs.
  const json grid = json::parse(R"({"runs": [{"model": "chain3", "surface": "phong", "optimizer": "lifted"}],
    "grid": {"models": ["ellipsoid-320"], "surfaces": ["phong", "trimesh"], "optimizers": ["icp"], "lambda_n": [0, 1]}})");
  const StudyConfig g = parse_study_config(grid);
  REQUIRE(g.runs.size() == 5);
  CHECK(g.runs[0].model == ModelId::chain3);
  CHECK(g.runs[4].surface == SurfaceType::trimesh);
  CHECK(g.runs[4].lambda_n == 1.0);

  // Round trip through the manifest echo.
  const StudyConfig again = parse_study_config(to_json(cfg));
  CHECK(to_json(again) == to_json(cfg));

  const auto message = [](const char* text) {
    try {
      parse_study_config(json::parse(text));
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(R"({"runs": [{"model": "cube", "surface": "phong", "optimizer": "lifted"}]})")
            .find("runs[0].model") != std::string::npos);
  CHECK(message(R"({"trials": 0, "runs": []})").find("trials") != std::string::npos);
  CHECK(message(R"({"data": {"noise": -1}, "runs": []})").find("data.noise") != std::string::npos);
  CHECK(message(R"({"colour": 1})").find("colour") != std::string::npos);
  CHECK(message(R"({"runs": [{"model": "chain3", "surface": "phong", "optimizer": "lifted", "lambda_n": "x"}]})")
            .find("runs[0].lambda_n") != std::string::npos);
  CHECK(message(R"({"seed": 1})").find("runs") != std::string::npos);
}

TEST_CASE("lambda sweep grid") {
  const auto l = sweep_lambdas();
  REQUIRE(l.size() == 21);
  CHECK(l.front() == 0.0);
  CHECK(l[1] == 0.05);
  CHECK(l.back() == 1.0);
}

TEST_CASE("angle bins cover the full circle") {
  CHECK(angle_bin(-180.0) == 0);
  CHECK(angle_bin(-165.0) == 1);
  CHECK(angle_bin(179.999) == kAngleBins - 1);
  CHECK(angle_bin(180.0) == kAngleBins - 1);
  CHECK(angle_bin(0.0) == 12);
}

TEST_CASE("summary statistics") {
  const std::vector<double> v = {1, 2, 3, 4};
  const Stats s = summarize(v);
  CHECK(s.mean == 2.5);
  CHECK(s.stdev == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(s.stderr_mean == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
  CHECK(summarize(std::vector<double>{}).count == 0);
}

TEST_CASE("csv round trip") {
  std::stringstream ss;
  csv::Writer w(ss);
  w.row({"a", "b,c", "say \"hi\"", "line\nbreak"});
  w.row({csv::format(0.1), csv::format(-1e-300), csv::format(1.0 / 3.0), ""});
  const csv::Table t = csv::read(ss);
  REQUIRE(t.size() == 2);
  CHECK(t[0][1] == "b,c");
  CHECK(t[0][2] == "say \"hi\"");
  CHECK(t[0][3] == "line\nbreak");
  CHECK(std::stod(t[1][0]) == 0.1);
  CHECK(std::stod(t[1][2]) == 1.0 / 3.0);
  CHECK(t[1][3].empty());
}

TEST_CASE("study with a zero iteration cap reports the initial error") {
  StudyConfig cfg;
  cfg.trials = 1;
  cfg.iterations = 0;
  cfg.snapshots = {0};
  cfg.runs = {{ModelId::ellipsoid_320, SurfaceType::phong, Optimizer::lifted, 1.0, 0}};
  const StudyResult result = run_study(cfg);
  const fs::path dir = scratch("cap0");
  write_study(result, dir);
  const csv::Table rows = read_table(dir / "per_iteration.csv");
  REQUIRE(rows.size() == 2);
  const TrialSetup setup = make_trial(*make_model(ModelId::ellipsoid_320), ModelId::ellipsoid_320,
                                      cfg.sampling, cfg.seed, 0);
  CHECK(std::stod(rows[1][3]) == rotation_error(Eigen::VectorXd::Zero(6), setup.truth));
  fs::remove_all(dir);
}

TEST_CASE("study output is deterministic across reruns and thread counts") {
  const StudyConfig cfg = small_config();
  const fs::path a = scratch("det-a"), b = scratch("det-b");
  write_study(run_study(cfg, 1), a);
  write_study(run_study(cfg, 2), b);
  for (const char* f : {"trials.csv", "per_iteration.csv", "aggregate_iterations.csv",
                        "aggregate_angle_bins.csv", "ablation.csv"}) {
    const std::string x = slurp(a / f);
    CHECK(!x.empty());
    CHECK_MESSAGE(x == slurp(b / f), f);
  }
  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  CHECK(manifest["config"]["seed"] == 77);
  CHECK(manifest.contains("version"));
  CHECK(manifest["host"].contains("hostname"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("aggregates recomputed from the per-trial rows match exactly") {
  const StudyConfig cfg = small_config();
  const fs::path dir = scratch("agg");
  write_study(run_study(cfg, 1), dir);

  // errors[run][iteration] in trial order, read back from text.
  std::map<int, std::map<int, std::vector<double>>> errors;
  for (const auto& row : [&] { auto t = read_table(dir / "per_iteration.csv"); t.erase(t.begin()); return t; }()) {
    errors[std::stoi(row[0])][std::stoi(row[2])].push_back(std::stod(row[3]));
  }
  const auto mean_of = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const auto stdev_of = [&](const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  };

  const csv::Table agg = read_table(dir / "aggregate_iterations.csv");
  REQUIRE(agg.size() == 1 + 7 + 5 + 4);
  for (std::size_t i = 1; i < agg.size(); ++i) {
    const auto& v = errors[std::stoi(agg[i][0])][std::stoi(agg[i][5])];
    CHECK(std::stoi(agg[i][6]) == static_cast<int>(v.size()));
    CHECK(std::stod(agg[i][7]) == mean_of(v));
    CHECK(std::stod(agg[i][8]) == stdev_of(v));
  }

  // Angle bins from trials.csv.
  std::map<int, std::map<int, std::vector<double>>> bins;
  for (const auto& row : [&] { auto t = read_table(dir / "trials.csv"); t.erase(t.begin()); return t; }()) {
    const double angle = std::stod(row[6]);
    const int b = static_cast<int>(std::floor((angle + 180.0) / 15.0));
    bins[std::stoi(row[0])][std::min(b, 23)].push_back(std::stod(row[8]));
  }
  const csv::Table ab = read_table(dir / "aggregate_angle_bins.csv");
  REQUIRE(ab.size() == 1 + 3 * 24);
  for (std::size_t i = 1; i < ab.size(); ++i) {
    const auto& v = bins[std::stoi(ab[i][0])][std::stoi(ab[i][5])];
    CHECK(std::stoi(ab[i][8]) == static_cast<int>(v.size()));
    if (!v.empty()) CHECK(std::stod(ab[i][9]) == mean_of(v));
  }

  const csv::Table abl = read_table(dir / "ablation.csv");
  for (std::size_t i = 1; i < abl.size(); ++i) {
    CHECK(std::stod(abl[i][6]) == mean_of(errors[std::stoi(abl[i][0])][std::stoi(abl[i][5])]));
  }
  fs::remove_all(dir);
}

TEST_CASE("every accepted step in a study is monotone") {
  const StudyResult result = run_study(small_config());
  for (const RunResult& run : result.runs) {
    for (const TrialResult& t : run.trials) {
      CHECK(t.monotone);
      CHECK(t.errors.size() == static_cast<std::size_t>(run.spec.iterations + 1));
      for (double e : t.errors) CHECK(e >= 0.0);
    }
  }
}

TEST_CASE("timing probe") {
  CHECK_THROWS_AS(timing_probe(SurfaceType::phong, 0), ConfigError);
  const ProbeResult p = timing_probe(SurfaceType::trimesh, 1000, 1);
  CHECK(p.count == 1000);
  CHECK(p.eval_seconds > 0.0);
  CHECK(p.derivative_seconds > 0.0);
  CHECK(p.eval_flops > 0);
}
