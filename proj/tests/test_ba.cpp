#include <cmath>
#include <numbers>

#include "doctest.h"
#include "splatba/ba.hpp"
#include "splatba/errors.hpp"
#include "splatba/experiment.hpp"
#include "splatba/harness.hpp"
#include "splatba/metrics.hpp"
#include "test_util.hpp"

using namespace splatba;

namespace {

GeneratedScene small_scene(int frames = 3) {
  SceneSpec s;
  s.primitives = 80;
  s.width = 24;
  s.height = 24;
  s.frames = frames;
  s.near = 0.5;
  s.far = 4.0;
  return generate_scene(s, 21);
}

Experiment pose_experiment(const GeneratedScene& gt, double rot = 3.0) {
  ExperimentSetup e;
  e.geometry = "gt-world";
  e.fov_init = "gt";
  e.pose_init = "gt";
  e.context_frames = {0};
  e.target_frames = {2};
  e.rot_perturb_deg = rot;
  e.trans_perturb = 0.03;
  e.perturb_seed = 4;
  return build_experiment(gt, e);
}

BAConfig pose_config(int steps) {
  BAConfig c;
  c.max_steps = steps;
  c.lr_scale.pose = 30.0;
  c.freeze.set(ParamClass::kGaussian, true);
  c.freeze.set(ParamClass::kFov, true);
  return c;
}

}  // namespace

TEST_CASE("BA config JSON") {
  BAConfig c;
  c.lr = 3e-4;
  c.freeze.set(ParamClass::kFov, true);
  c.lr_scale.pose = 7;
  c.perceptual = "ssim";
  const BAConfig b = ba_config_from_json(ba_config_to_json(c));
  CHECK(ba_config_to_json(b) == ba_config_to_json(c));
  CHECK(b.freeze.fov);
  CHECK_THROWS_AS(ba_config_from_json({{"learning_rate", 1}}), ArgumentError);
  CHECK_THROWS_AS(ba_config_from_json({{"freeze", {{"camera", true}}}}), ArgumentError);
  CHECK_THROWS_AS(ba_config_from_json({{"lr", -1}}), ArgumentError);
  CHECK_THROWS_AS(ba_config_from_json({{"schema_version", 9}}), ArgumentError);
  CHECK_THROWS_AS(ba_config_from_json({{"perceptual", "lpips"}}), ArgumentError);
  for (ParamClass p : kAllParamClasses) CHECK(param_class_from_name(param_class_name(p)) == p);
  CHECK_THROWS_AS(param_class_from_name("camera"), ArgumentError);
}

TEST_CASE("parameter initialization") {
  const std::vector<Image> grey{Image(224, 8, 3, 0.5)};
  const SceneParameters s = init_scene_parameters(grey, 2);
  CHECK(s.intrinsics(0).focal() == doctest::Approx(224.0).epsilon(1e-12));
  CHECK(s.fov_rad * 180.0 / std::numbers::pi == doctest::Approx(53.130102354).epsilon(1e-9));
  CHECK(s.view_count() == 3);
  for (std::size_t v = 0; v < 3; ++v) CHECK(rotation_angle_between(s.pose(v).rotation, Mat3::Identity()) == 0.0);
  for (double c : s.context[0].sh) CHECK(c == 0.0);
  CHECK_THROWS_AS(init_scene_parameters({}, 1), ArgumentError);
  CHECK_THROWS_AS(init_scene_parameters({Image(4, 4, 3), Image(5, 4, 3)}, 1), ArgumentError);
}

TEST_CASE("perturb_pose moves by exactly the requested amounts") {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const CameraPose p = testutil::random_pose(rng);
    const CameraPose q = perturb_pose(p, 5.0, 0.2, rng);
    CHECK(rotation_angle_between(p.rotation, q.rotation) * 180.0 / std::numbers::pi == doctest::Approx(5.0).epsilon(1e-9));
    CHECK((q.translation - p.translation).norm() == doctest::Approx(0.2).epsilon(1e-12));
  }
}

TEST_CASE("already-optimal problems are a no-op") {
  const GeneratedScene gt = small_scene();
  ExperimentSetup e;
  e.context_frames = {0};
  e.target_frames = {1, 2};
  e.targets = "initial-render";
  const Experiment ex = build_experiment(gt, e);
  const BAResult r = run_photometric_ba(ex.problem, BAConfig{});
  CHECK(r.history.front().loss == 0.0);
  CHECK(r.updates == 0);
  CHECK(r.converged);
  CHECK(r.params.fov_rad == ex.problem.init.fov_rad);
  CHECK(r.params.context[0].depth.raw == ex.problem.init.context[0].depth.raw);
}

TEST_CASE("pose recovery reduces the error") {
  const GeneratedScene gt = small_scene();
  const Experiment ex = pose_experiment(gt);
  const BAResult r = run_photometric_ba(ex.problem, pose_config(400));
  CHECK(r.history.size() == 401);
  CHECK(r.history.front().rot_err_deg == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(r.final_loss < 0.01 * r.initial_loss);
  const auto e = worst_pair_error({r.params.pose(0), r.params.pose(1)}, *ex.problem.gt_poses);
  CHECK(e.rot_deg < 0.5);
  // Frozen classes are untouched bit for bit.
  CHECK(r.params.fov_rad == ex.problem.init.fov_rad);
  CHECK(r.params.world.centers == ex.problem.init.world.centers);
  for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i].step == r.history[i - 1].step + 1);
}

TEST_CASE("history is independent of the thread count") {
  const GeneratedScene gt = small_scene();
  const Experiment ex = pose_experiment(gt);
  BAConfig c = pose_config(30);
  c.threads = 1;
  const std::string one = history_csv(run_photometric_ba(ex.problem, c).history);
  c.threads = 4;
  CHECK(history_csv(run_photometric_ba(ex.problem, c).history) == one);
  CHECK(one.rfind("step,loss,psnr,rot_err_deg,trans_err_deg,fov_deg\n", 0) == 0);
}

TEST_CASE("divergence names the parameter class") {
  const GeneratedScene gt = small_scene();
  ExperimentSetup e;
  e.context_frames = {0};
  e.target_frames = {1};
  const Experiment ex = build_experiment(gt, e);
  BAConfig c;
  c.lr = 1e6;
  c.max_steps = 50;
  c.grad_clip = 0.0;
  try {
    run_photometric_ba(ex.problem, c);
    FAIL("expected divergence");
  } catch (const DivergenceError& err) {
    CHECK_FALSE(err.parameter_class().empty());
  }
}

TEST_CASE("observer sees every row") {
  const GeneratedScene gt = small_scene();
  const Experiment ex = pose_experiment(gt);
  int rows = 0;
  const BAResult r = run_photometric_ba(ex.problem, pose_config(5), [&](const BAHistoryRow& row, const SceneParameters& p) {
    CHECK(row.step == rows);
    CHECK(p.view_count() == 2);
    ++rows;
  });
  CHECK(rows == static_cast<int>(r.history.size()));
}

TEST_CASE("objective gradient is the rendering gradient averaged over views") {
  const GeneratedScene gt = small_scene();
  const Experiment ex = pose_experiment(gt);
  const BAConfig c = pose_config(1);
  const LossAndGradients a = evaluate_objective(ex.problem, ex.problem.init, c);
  CHECK(a.renders.size() == 1);
  double mse = 0;
  for (std::size_t i = 0; i < a.renders[0].data.size(); ++i) {
    const double d = a.renders[0].data[i] - ex.problem.target_images[0].data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.renders[0].data.size());
  CHECK(a.loss == doctest::Approx(mse).epsilon(1e-12));
  CHECK(a.psnr == doctest::Approx(psnr(a.renders[0], ex.problem.target_images[0])).epsilon(1e-12));
}
