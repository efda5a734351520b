#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "splatba/image.hpp"
#include "splatba/losses.hpp"
#include "splatba/render.hpp"
#include "splatba/rng.hpp"
#include "splatba/scene.hpp"

namespace splatba {

inline constexpr int kBAConfigVersion = 1;

/// Parameter classes with their own learning-rate multiplier, freeze flag,
/// gradient clip and divergence diagnosis.
enum class ParamClass { kDepth, kGaussian, kPose, kFov };
inline constexpr ParamClass kAllParamClasses[] = {ParamClass::kDepth, ParamClass::kGaussian,
                                                  ParamClass::kPose, ParamClass::kFov};
const char* param_class_name(ParamClass c);
/// Accepts "depth", "gaussian", "pose", "fov"; throws ArgumentError otherwise.
ParamClass param_class_from_name(const std::string& name);

struct PerClass {
  double depth = 1.0;
  double gaussian = 1.0;
  double pose = 1.0;
  double fov = 0.1;

  double& operator[](ParamClass c);
  double operator[](ParamClass c) const;
};

struct Freeze {
  bool depth = false;
  bool gaussian = false;
  bool pose = false;
  bool fov = false;

  bool operator[](ParamClass c) const;
  void set(ParamClass c, bool value);
};

struct BAConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int max_steps = 2000;
  double gamma = 0.05;             // perceptual weight
  std::string perceptual = "none";  // none | ssim
  PerClass lr_scale;
  Freeze freeze;
  double grad_clip = 10.0;          // per-class gradient norm cap, <= 0 disables
  int convergence_window = 100;     // steps without relative improvement > tol
  double convergence_tol = 0.0;     // 0 disables early stopping on stalls
  double loss_floor = 1e-20;        // stop as optimal at or below (about 200 dB PSNR)
  int threads = 1;

  void validate() const;
};

/// Strict parse: unknown fields and wrong schema_version rejected.
BAConfig ba_config_from_json(const nlohmann::json& j);
nlohmann::json ba_config_to_json(const BAConfig& c);

/// One optimization problem: initial parameters, supervised views and
/// evaluation-only ground truth.
struct BAProblem {
  SceneParameters init;
  std::vector<std::size_t> target_views;
  std::vector<Image> target_images;
  Vec3 background = Vec3::Zero();
  RenderConfig render;

  // Evaluation only; never seen by the optimizer.
  std::optional<std::vector<CameraPose>> gt_poses;  // one per view
  std::optional<std::vector<Image>> gt_context_depths;
  std::optional<std::vector<Image>> gt_context_alphas;
};

struct BAHistoryRow {
  int step = 0;
  double loss = 0.0;
  double psnr = 0.0;           // mean over target views
  double rot_err_deg = 0.0;    // worst pair; NaN without GT poses
  double trans_err_deg = 0.0;  // worst pair; NaN without GT poses
  double fov_deg = 0.0;
};

struct BAResult {
  SceneParameters params;  // best parameters seen
  std::vector<BAHistoryRow> history;
  int updates = 0;         // optimizer steps actually applied
  int best_step = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;  // loss of `params`
  bool converged = false;
};

struct LossAndGradients {
  double loss = 0.0;
  double psnr = 0.0;
  RenderGradients grads;
  std::vector<Image> renders;
};

/// Photometric objective over the target views (mean over views) and its
/// gradient w.r.t. every raw parameter.
LossAndGradients evaluate_objective(const BAProblem& problem, const SceneParameters& params,
                                    const BAConfig& config);

/// Per-step observer: (row, current parameters).
using BAObserver = std::function<void(const BAHistoryRow&, const SceneParameters&)>;

/// Adam on every unfrozen class. Throws DivergenceError naming the class
/// whose parameters or gradients went non-finite or undecodable.
BAResult run_photometric_ba(const BAProblem& problem, const BAConfig& config,
                            const BAObserver& observer = {});

/// CSV with header step,loss,psnr,rot_err_deg,trans_err_deg,fov_deg.
std::string history_csv(const std::vector<BAHistoryRow>& history);

enum class FovInit { kFullImage, kGiven };

/// Identity poses, fov = 2 atan(1/2) (focal = image width) unless given,
/// depth logits 0, opacity logits 0, scale = pixel footprint at mid depth,
/// SH degree-0 from the pixel colors. View 0..V_C-1 are the context images,
/// followed by `target_count` target views.
SceneParameters init_scene_parameters(const std::vector<Image>& context_images, int target_count,
                                      FovInit fov_mode = FovInit::kFullImage,
                                      double given_fov_rad = 0.0, double near = 0.1,
                                      double far = 100.0, int sh_degree = 0);

/// Rotates by `rot_deg` about a random axis and shifts by `trans` in a random
/// direction.
CameraPose perturb_pose(const CameraPose& pose, double rot_deg, double trans, Rng& rng);

/// Worst rotation / translation angular error over all view pairs.
PoseAngularError worst_pair_error(const std::vector<CameraPose>& pred,
                                  const std::vector<CameraPose>& gt);

}  // namespace splatba
