#include "splatba/experiment.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "splatba/errors.hpp"
#include "splatba/metrics.hpp"

namespace splatba {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void check_frames(const std::vector<int>& frames, std::size_t count, const char* what) {
  for (int f : frames) {
    if (f < 0 || static_cast<std::size_t>(f) >= count) {
      throw ArgumentError(std::string("experiment: ") + what + " frame " + std::to_string(f) + " out of range");
    }
  }
}

}  // namespace

void ExperimentSetup::validate() const {
  if (geometry != "pixel" && geometry != "gt-world") throw ArgumentError("experiment: geometry must be pixel or gt-world");
  if (depth_init != "flat" && depth_init != "gt") throw ArgumentError("experiment: depth_init must be flat or gt");
  if (fov_init != "full-image" && fov_init != "gt") throw ArgumentError("experiment: fov_init must be full-image or gt");
  if (pose_init != "identity" && pose_init != "gt") throw ArgumentError("experiment: pose_init must be identity or gt");
  if (targets != "frames" && targets != "initial-render") throw ArgumentError("experiment: targets must be frames or initial-render");
  if (context_frames.empty()) throw ArgumentError("experiment: at least one context frame");
  if (target_frames.empty()) throw ArgumentError("experiment: at least one target frame");
  if (context_frames.front() != 0) throw ArgumentError("experiment: the first context frame must be frame 0");
  std::set<int> seen;
  for (const auto* list : {&context_frames, &target_frames}) {
    for (int f : *list) {
      if (!seen.insert(f).second) throw ArgumentError("experiment: frame " + std::to_string(f) + " used twice");
    }
  }
}

ExperimentSetup experiment_setup_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"context_frames", "target_frames", "heldout_frames", "geometry",
                                           "depth_init", "fov_init", "fov_offset_deg", "pose_init",
                                           "rot_perturb_deg", "trans_perturb", "targets", "perturb_seed"};
  if (!j.is_object()) throw ArgumentError("experiment setup: expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ArgumentError("experiment setup: unknown field '" + key + "'");
  ExperimentSetup s;
  s.context_frames = j.value("context_frames", s.context_frames);
  s.target_frames = j.value("target_frames", s.target_frames);
  s.heldout_frames = j.value("heldout_frames", s.heldout_frames);
  s.geometry = j.value("geometry", s.geometry);
  s.depth_init = j.value("depth_init", s.depth_init);
  s.fov_init = j.value("fov_init", s.fov_init);
  s.fov_offset_deg = j.value("fov_offset_deg", s.fov_offset_deg);
  s.pose_init = j.value("pose_init", s.pose_init);
  s.rot_perturb_deg = j.value("rot_perturb_deg", s.rot_perturb_deg);
  s.trans_perturb = j.value("trans_perturb", s.trans_perturb);
  s.targets = j.value("targets", s.targets);
  s.perturb_seed = j.value("perturb_seed", s.perturb_seed);
  s.validate();
  return s;
}

nlohmann::json experiment_setup_to_json(const ExperimentSetup& s) {
  return {{"context_frames", s.context_frames}, {"target_frames", s.target_frames},
          {"heldout_frames", s.heldout_frames}, {"geometry", s.geometry},
          {"depth_init", s.depth_init},         {"fov_init", s.fov_init},
          {"fov_offset_deg", s.fov_offset_deg}, {"pose_init", s.pose_init},
          {"rot_perturb_deg", s.rot_perturb_deg}, {"trans_perturb", s.trans_perturb},
          {"targets", s.targets},               {"perturb_seed", s.perturb_seed}};
}

Experiment build_experiment(const GeneratedScene& gt, const ExperimentSetup& setup) {
  setup.validate();
  const std::size_t frames = gt.images.size();
  check_frames(setup.context_frames, frames, "context");
  check_frames(setup.target_frames, frames, "target");
  check_frames(setup.heldout_frames, frames, "held-out");
  const bool have_poses = gt.poses.size() == frames;
  if (!have_poses && (setup.pose_init == "gt" || !setup.heldout_frames.empty())) {
    throw ArgumentError("experiment: this setup needs ground-truth poses");
  }
  if (setup.geometry == "gt-world" && gt.gaussians.size() == 0) {
    throw ArgumentError("experiment: gt-world geometry needs ground-truth Gaussians");
  }
  if (setup.depth_init == "gt" && gt.depths.size() != frames) {
    throw ArgumentError("experiment: gt depth init needs ground-truth depth maps");
  }

  Experiment ex;
  ex.scene_scale = gt.scene_scale;
  ex.view_frames = setup.context_frames;
  ex.view_frames.insert(ex.view_frames.end(), setup.target_frames.begin(), setup.target_frames.end());

  const double fov = (setup.fov_init == "gt" ? gt.intrinsics.fov_rad : 2.0 * std::atan(0.5)) +
                     setup.fov_offset_deg * kDegToRad;
  SceneParameters& s = ex.problem.init;
  if (setup.geometry == "pixel") {
    std::vector<Image> ctx;
    for (int f : setup.context_frames) ctx.push_back(gt.images[f]);
    s = init_scene_parameters(ctx, static_cast<int>(setup.target_frames.size()), FovInit::kGiven, fov,
                              gt.near, gt.far, gt.gaussians.sh_degree);
    if (setup.depth_init == "gt") {
      for (std::size_t c = 0; c < setup.context_frames.size(); ++c) {
        const Image& d = gt.depths[setup.context_frames[c]];
        DepthMap& dm = s.context[c].depth;
        for (std::size_t i = 0; i < dm.raw.size(); ++i) {
          const double lo = dm.near + 1e-6 * (dm.far - dm.near);
          const double hi = dm.far - 1e-6 * (dm.far - dm.near);
          dm.raw[i] = d.data[i] > 0.0 ? depth_to_logit(std::clamp(d.data[i], lo, hi), dm.near, dm.far) : 0.0;
        }
      }
    }
  } else {
    s.sh_degree = gt.gaussians.sh_degree;
    s.fov_rad = fov;
    s.world = gt.gaussians;
    s.view_sizes.assign(ex.view_frames.size(), ViewSize{gt.intrinsics.width_px, gt.intrinsics.height_px});
    s.poses.assign(ex.view_frames.size(), PoseParams6D::identity());
  }

  if (have_poses) {
    std::vector<CameraPose> view_gt;
    for (int f : ex.view_frames) view_gt.push_back(gt.poses[f]);
    ex.problem.gt_poses = view_gt;
  }
  if (setup.pose_init == "gt") {
    Rng rng(setup.perturb_seed);
    for (std::size_t v = 1; v < ex.view_frames.size(); ++v) {
      Rng view_rng = rng.split();
      const CameraPose p = perturb_pose(gt.poses[ex.view_frames[v]], setup.rot_perturb_deg,
                                        setup.trans_perturb * gt.scene_scale, view_rng);
      s.poses[v] = PoseParams6D::from_pose(p);
    }
  }

  ex.problem.background = gt.background;
  const std::size_t first_target = setup.context_frames.size();
  for (std::size_t t = 0; t < setup.target_frames.size(); ++t) {
    ex.problem.target_views.push_back(first_target + t);
  }
  if (setup.targets == "frames") {
    for (int f : setup.target_frames) ex.problem.target_images.push_back(gt.images[f]);
  } else {
    const DecodedScene d = decode_scene(s);
    for (std::size_t view : ex.problem.target_views) {
      ex.problem.target_images.push_back(render_scene_view(d, view, gt.background, ex.problem.render).output.color);
    }
  }

  if (setup.geometry == "pixel" && gt.depths.size() == frames) {
    std::vector<Image> depths, alphas;
    for (int f : setup.context_frames) {
      depths.push_back(gt.depths[f]);
      if (gt.alphas.size() == frames) alphas.push_back(gt.alphas[f]);
    }
    ex.problem.gt_context_depths = depths;
    if (!alphas.empty()) ex.problem.gt_context_alphas = alphas;
  }

  ex.heldout_frames = setup.heldout_frames;
  for (int f : setup.heldout_frames) {
    ex.heldout_images.push_back(gt.images[f]);
    ex.heldout_poses.push_back(gt.poses[f]);
  }
  return ex;
}

GeneratedScene ground_truth_from_sequence(const Sequence& seq) {
  GeneratedScene gt;
  gt.images = seq.images;
  if (seq.poses) gt.poses = normalize_poses(*seq.poses);
  if (seq.depths) gt.depths = *seq.depths;
  if (seq.alphas) gt.alphas = *seq.alphas;
  if (seq.gaussians) gt.gaussians = *seq.gaussians;
  gt.intrinsics = seq.intrinsics;
  gt.near = seq.near;
  gt.far = seq.far;
  gt.background = seq.background;
  gt.scene_scale = seq.manifest && seq.manifest->contains("scene_scale") ? seq.manifest->at("scene_scale").get<double>() : 1.0;
  return gt;
}

double heldout_psnr(const Experiment& ex, const SceneParameters& params) {
  if (ex.heldout_images.empty()) throw ArgumentError("heldout_psnr: no held-out frames");
  const DecodedScene d = decode_scene(params);
  double total = 0.0;
  for (std::size_t i = 0; i < ex.heldout_images.size(); ++i) {
    const Image& img = ex.heldout_images[i];
    const Camera cam{CameraIntrinsics::make(params.fov_rad, img.width, img.height), ex.heldout_poses[i]};
    const RenderOutput out = render(d.gaussians, cam, img.width, img.height, ex.problem.background, ex.problem.render);
    total += psnr(out.color, img);
  }
  return total / static_cast<double>(ex.heldout_images.size());
}

DepthMetrics context_depth_metrics(const Experiment& ex, const SceneParameters& params) {
  if (!ex.problem.gt_context_depths) throw ArgumentError("context_depth_metrics: no GT depths");
  const auto& gts = *ex.problem.gt_context_depths;
  Image pred_all(0, 0, 1), gt_all(0, 0, 1);
  std::vector<std::uint8_t> mask;
  for (std::size_t c = 0; c < params.context.size(); ++c) {
    const std::vector<double> act = params.context[c].depth.activated();
    for (std::size_t i = 0; i < act.size(); ++i) {
      const bool valid = ex.problem.gt_context_alphas ? (*ex.problem.gt_context_alphas)[c].data[i] > 0.5
                                                      : gts[c].data[i] > 0.0;
      pred_all.data.push_back(act[i]);
      gt_all.data.push_back(gts[c].data[i]);
      mask.push_back(valid && gts[c].data[i] > 0.0 ? 1 : 0);
    }
  }
  pred_all.width = gt_all.width = static_cast<int>(pred_all.data.size());
  pred_all.height = gt_all.height = 1;
  return depth_metrics(pred_all, gt_all, mask, true);
}

}  // namespace splatba
