#pragma once

#include <vector>

#include "splatba/gaussian.hpp"
#include "splatba/geometry.hpp"
#include "splatba/image.hpp"
#include "splatba/render.hpp"

namespace splatba {

/// Raw per-pixel Gaussian parameters owned by one context view. Quaternions
/// are expressed in the canonical frame.
struct ContextView {
  DepthMap depth;
  std::vector<Vec4> quats;
  std::vector<Vec3> log_scales;
  std::vector<double> opacity_logits;
  std::vector<double> sh;  // pixel-major, 3 * (degree+1)^2 per pixel

  std::size_t pixel_count() const { return depth.raw.size(); }
};

struct ViewSize {
  int width = 0;
  int height = 0;
};

/// Everything photometric bundle adjustment optimizes. Views
/// [0, context.size()) are context views that own pixel-aligned Gaussians; the
/// remaining views only carry a pose. View 0 is the canonical frame and its
/// pose is identity by construction. One FOV is shared by every view.
/// `world` holds optional free Gaussians expressed directly in the canonical
/// frame (e.g. known geometry); they render after the lifted ones.
struct SceneParameters {
  int sh_degree = 0;
  double fov_rad = 0.0;
  std::vector<ViewSize> view_sizes;
  std::vector<PoseParams6D> poses;
  std::vector<ContextView> context;
  GaussianSet world;

  std::size_t view_count() const { return poses.size(); }
  std::size_t context_count() const { return context.size(); }
  std::size_t target_count() const { return poses.size() - context.size(); }

  CameraIntrinsics intrinsics(std::size_t view) const;
  /// Decoded pose; view 0 is always exactly identity.
  CameraPose pose(std::size_t view) const;
  Camera camera(std::size_t view) const { return {intrinsics(view), pose(view)}; }

  /// Throws ArgumentError on inconsistent sizes or when there is no geometry.
  void validate() const;
};

/// Decoded cameras plus the GaussianSet lifted from every context view.
struct DecodedScene {
  std::vector<CameraIntrinsics> intrinsics;
  std::vector<CameraPose> poses;
  GaussianSet gaussians;
  std::vector<std::size_t> context_offset;  // first Gaussian of each context view
  std::size_t world_offset = 0;             // first free Gaussian
};

DecodedScene decode_scene(const SceneParameters& scene);

struct ContextViewGrad {
  std::vector<double> d_depth_raw;
  std::vector<Vec4> d_quat;
  std::vector<Vec3> d_log_scale;
  std::vector<double> d_opacity_logit;
  std::vector<double> d_sh;
};

/// Gradients w.r.t. every raw scene parameter.
struct RenderGradients {
  std::vector<Vec3> d_center;  // per lifted Gaussian, before the lifting chain
  std::vector<ContextViewGrad> context;
  std::vector<PoseParamsGrad> d_pose;
  double d_fov = 0.0;
  GaussianGradients world;

  static RenderGradients zeros_like(const SceneParameters& scene);
  RenderGradients& operator+=(const RenderGradients& other);
  bool all_finite() const;
};

RenderState render_scene_view(const DecodedScene& decoded, std::size_t view,
                              const Vec3& background, const RenderConfig& cfg = {});

/// Pulls the color gradient of one rendered view back through projection,
/// lifting, depth activation, pose decoding and focal length, accumulating
/// into `grads`.
void scene_backward(const SceneParameters& scene, const DecodedScene& decoded,
                    const RenderState& state, std::size_t view, const Image& color_grad,
                    RenderGradients& grads);

/// One-shot forward + backward of a single view.
RenderGradients render_backward(const SceneParameters& scene, std::size_t view,
                                const Vec3& background, const Image& color_grad,
                                const RenderConfig& cfg = {});

}  // namespace splatba
