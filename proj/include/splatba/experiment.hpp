#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "splatba/ba.hpp"
#include "splatba/harness.hpp"
#include "splatba/metrics.hpp"

namespace splatba {

/// How a BA run is assembled from a ground-truth sequence. Views are the
/// context frames followed by the target frames; the first view must be frame
/// 0, the frame the ground truth is expressed in.
struct ExperimentSetup {
  std::vector<int> context_frames{0};
  std::vector<int> target_frames{1};
  std::vector<int> heldout_frames;
  std::string geometry = "pixel";       // pixel: Gaussians per context pixel; gt-world: GT Gaussians
  std::string depth_init = "flat";      // flat | gt   (pixel geometry)
  std::string fov_init = "full-image";  // full-image | gt
  double fov_offset_deg = 0.0;          // added to the initial fov
  std::string pose_init = "identity";   // identity | gt
  double rot_perturb_deg = 0.0;         // gt pose init only
  double trans_perturb = 0.0;           // fraction of the scene scale
  std::string targets = "frames";       // frames | initial-render
  std::uint64_t perturb_seed = 0;

  void validate() const;
};

ExperimentSetup experiment_setup_from_json(const nlohmann::json& j);
nlohmann::json experiment_setup_to_json(const ExperimentSetup& s);

struct Experiment {
  BAProblem problem;
  std::vector<int> view_frames;  // source frame of every view
  std::vector<int> heldout_frames;
  std::vector<Image> heldout_images;
  std::vector<CameraPose> heldout_poses;  // GT, canonical frame
  double scene_scale = 1.0;
};

/// Throws ArgumentError on frame indices out of range or missing ground truth.
Experiment build_experiment(const GeneratedScene& gt, const ExperimentSetup& setup);

/// Ground truth view of a loaded sequence (needs poses; gaussians optional).
GeneratedScene ground_truth_from_sequence(const Sequence& seq);

/// Renders every held-out frame with the optimized geometry and FOV at its GT
/// pose; returns the mean PSNR (kPsnrExact if all match exactly).
double heldout_psnr(const Experiment& ex, const SceneParameters& params);

/// Median-aligned depth accuracy of the context depth maps against GT, over
/// pixels with GT alpha > 0.5 (GT depth > 0 when alphas are unknown).
DepthMetrics context_depth_metrics(const Experiment& ex, const SceneParameters& params);

}  // namespace splatba
