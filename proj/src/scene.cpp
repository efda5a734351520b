#include "splatba/scene.hpp"

#include <cmath>

#include "splatba/errors.hpp"

namespace splatba {

CameraIntrinsics SceneParameters::intrinsics(std::size_t view) const {
  return CameraIntrinsics::make(fov_rad, view_sizes.at(view).width, view_sizes.at(view).height);
}

CameraPose SceneParameters::pose(std::size_t view) const {
  if (view == 0) return CameraPose::identity();
  return poses.at(view).decode();
}

void SceneParameters::validate() const {
  if (poses.empty()) throw ArgumentError("scene needs at least one view");
  if (context.empty() && world.size() == 0) {
    throw ArgumentError("scene needs a context view or free Gaussians");
  }
  if (world.size() > 0 && world.sh_degree != sh_degree) throw ArgumentError("scene: world SH degree mismatch");
  if (view_sizes.size() != poses.size()) throw ArgumentError("scene: view_sizes/poses mismatch");
  if (context.size() > poses.size()) throw ArgumentError("scene: more context views than views");
  const int stride = 3 * sh_coeff_count(sh_degree);
  for (std::size_t c = 0; c < context.size(); ++c) {
    const ContextView& cv = context[c];
    const std::size_t n = cv.pixel_count();
    if (cv.depth.width != view_sizes[c].width || cv.depth.height != view_sizes[c].height) {
      throw ArgumentError("scene: depth map size disagrees with its view");
    }
    if (cv.quats.size() != n || cv.log_scales.size() != n || cv.opacity_logits.size() != n ||
        cv.sh.size() != n * stride) {
      throw ArgumentError("scene: per-pixel parameter arrays have inconsistent sizes");
    }
  }
}

DecodedScene decode_scene(const SceneParameters& scene) {
  scene.validate();
  DecodedScene d;
  d.gaussians = GaussianSet(scene.sh_degree);
  for (std::size_t v = 0; v < scene.view_count(); ++v) {
    d.intrinsics.push_back(scene.intrinsics(v));
    d.poses.push_back(scene.pose(v));
  }
  std::size_t total = 0;
  for (const auto& cv : scene.context) total += cv.pixel_count();
  d.gaussians.reserve(total + scene.world.size());
  const int stride = d.gaussians.sh_stride();
  for (std::size_t c = 0; c < scene.context_count(); ++c) {
    const ContextView& cv = scene.context[c];
    d.context_offset.push_back(d.gaussians.size());
    const std::vector<Vec3> centers = lift_depth_to_centers(cv.depth, d.intrinsics[c], d.poses[c]);
    for (std::size_t i = 0; i < centers.size(); ++i) {
      d.gaussians.push_back(centers[i], cv.quats[i], cv.log_scales[i], cv.opacity_logits[i],
                            std::span<const double>(cv.sh.data() + i * stride, stride));
    }
  }
  d.world_offset = d.gaussians.size();
  const GaussianSet& w = scene.world;
  for (std::size_t i = 0; i < w.size(); ++i) {
    d.gaussians.push_back(w.centers[i], w.quats[i], w.log_scales[i], w.opacity_logits[i], w.sh_of(i));
  }
  return d;
}

RenderGradients RenderGradients::zeros_like(const SceneParameters& scene) {
  RenderGradients g;
  const int stride = 3 * sh_coeff_count(scene.sh_degree);
  std::size_t total = 0;
  for (const auto& cv : scene.context) {
    const std::size_t n = cv.pixel_count();
    total += n;
    ContextViewGrad cg;
    cg.d_depth_raw.assign(n, 0.0);
    cg.d_quat.assign(n, Vec4::Zero());
    cg.d_log_scale.assign(n, Vec3::Zero());
    cg.d_opacity_logit.assign(n, 0.0);
    cg.d_sh.assign(n * stride, 0.0);
    g.context.push_back(std::move(cg));
  }
  g.d_center.assign(total + scene.world.size(), Vec3::Zero());
  g.d_pose.assign(scene.view_count(), PoseParamsGrad{});
  const std::size_t nw = scene.world.size();
  g.world.d_center.assign(nw, Vec3::Zero());
  g.world.d_quat.assign(nw, Vec4::Zero());
  g.world.d_log_scale.assign(nw, Vec3::Zero());
  g.world.d_opacity_logit.assign(nw, 0.0);
  g.world.d_sh.assign(nw * stride, 0.0);
  return g;
}

RenderGradients& RenderGradients::operator+=(const RenderGradients& o) {
  for (std::size_t i = 0; i < d_center.size(); ++i) d_center[i] += o.d_center[i];
  for (std::size_t c = 0; c < context.size(); ++c) {
    auto& a = context[c];
    const auto& b = o.context[c];
    for (std::size_t i = 0; i < a.d_depth_raw.size(); ++i) {
      a.d_depth_raw[i] += b.d_depth_raw[i];
      a.d_quat[i] += b.d_quat[i];
      a.d_log_scale[i] += b.d_log_scale[i];
      a.d_opacity_logit[i] += b.d_opacity_logit[i];
    }
    for (std::size_t i = 0; i < a.d_sh.size(); ++i) a.d_sh[i] += b.d_sh[i];
  }
  for (std::size_t v = 0; v < d_pose.size(); ++v) d_pose[v] += o.d_pose[v];
  d_fov += o.d_fov;
  for (std::size_t i = 0; i < world.d_center.size(); ++i) {
    world.d_center[i] += o.world.d_center[i];
    world.d_quat[i] += o.world.d_quat[i];
    world.d_log_scale[i] += o.world.d_log_scale[i];
    world.d_opacity_logit[i] += o.world.d_opacity_logit[i];
  }
  for (std::size_t i = 0; i < world.d_sh.size(); ++i) world.d_sh[i] += o.world.d_sh[i];
  return *this;
}

bool RenderGradients::all_finite() const {
  auto finite = [](double x) { return std::isfinite(x); };
  if (!std::isfinite(d_fov)) return false;
  for (const auto& v : d_center)
    if (!v.allFinite()) return false;
  for (const auto& cg : context) {
    for (double x : cg.d_depth_raw)
      if (!finite(x)) return false;
    for (const auto& q : cg.d_quat)
      if (!q.allFinite()) return false;
    for (const auto& s : cg.d_log_scale)
      if (!s.allFinite()) return false;
    for (double x : cg.d_opacity_logit)
      if (!finite(x)) return false;
    for (double x : cg.d_sh)
      if (!finite(x)) return false;
  }
  for (std::size_t i = 0; i < world.d_center.size(); ++i) {
    if (!world.d_center[i].allFinite() || !world.d_quat[i].allFinite() ||
        !world.d_log_scale[i].allFinite() || !finite(world.d_opacity_logit[i])) {
      return false;
    }
  }
  for (double x : world.d_sh)
    if (!finite(x)) return false;
  for (const auto& p : d_pose) {
    for (double x : p.rot6)
      if (!finite(x)) return false;
    for (double x : p.trans_h)
      if (!finite(x)) return false;
  }
  return true;
}

RenderState render_scene_view(const DecodedScene& decoded, std::size_t view,
                              const Vec3& background, const RenderConfig& cfg) {
  const Camera cam{decoded.intrinsics.at(view), decoded.poses.at(view)};
  return render_with_state(decoded.gaussians, cam, cam.intrinsics.width_px,
                           cam.intrinsics.height_px, background, cfg);
}

void scene_backward(const SceneParameters& scene, const DecodedScene& decoded,
                    const RenderState& state, std::size_t view, const Image& color_grad,
                    RenderGradients& grads) {
  const SplatGradients sg = render_backward(decoded.gaussians, state, color_grad);
  const int stride = decoded.gaussians.sh_stride();

  // Target camera.
  // View 0 is the canonical frame: its pose is a constant, not a parameter.
  if (view != 0) {
    grads.d_pose[view] +=
        pose_params_backward(scene.poses[view], sg.camera.d_rotation, sg.camera.d_translation);
  }
  grads.d_fov += sg.camera.d_focal *
                 focal_fov_derivative(scene.fov_rad, decoded.intrinsics[view].width_px);

  // Context views through the lifting chain.
  for (std::size_t c = 0; c < scene.context_count(); ++c) {
    const ContextView& cv = scene.context[c];
    ContextViewGrad& cg = grads.context[c];
    const CameraIntrinsics& K = decoded.intrinsics[c];
    const Mat3& R = decoded.poses[c].rotation;
    const double f = K.focal();
    const double cx = K.cx(), cy = K.cy();
    const std::size_t base = decoded.context_offset[c];
    Mat3 d_rot = Mat3::Zero();
    Vec3 d_trans = Vec3::Zero();
    double d_focal = 0.0;
    for (int v = 0; v < cv.depth.height; ++v) {
      for (int u = 0; u < cv.depth.width; ++u) {
        const std::size_t i = static_cast<std::size_t>(v) * cv.depth.width + u;
        const std::size_t gi = base + i;
        cg.d_quat[i] += sg.gaussians.d_quat[gi];
        cg.d_log_scale[i] += sg.gaussians.d_log_scale[gi];
        cg.d_opacity_logit[i] += sg.gaussians.d_opacity_logit[gi];
        for (int k = 0; k < stride; ++k) cg.d_sh[i * stride + k] += sg.gaussians.d_sh[gi * stride + k];

        const Vec3& g = sg.gaussians.d_center[gi];
        grads.d_center[gi] += g;
        if (g.isZero(0.0)) continue;
        // center = R * (depth * ray) + T, ray = ((u - cx) / f, (v - cy) / f, 1)
        const double depth = cv.depth.activated(i);
        const Vec3 ray((u - cx) / f, (v - cy) / f, 1.0);
        const Vec3 g_cam = R.transpose() * g;
        cg.d_depth_raw[i] +=
            g_cam.dot(ray) * activate_depth_derivative(cv.depth.raw[i], cv.depth.near, cv.depth.far);
        d_rot += g * (depth * ray).transpose();
        d_trans += g;
        d_focal += -depth * (g_cam.x() * (u - cx) + g_cam.y() * (v - cy)) / (f * f);
      }
    }
    if (c != 0) grads.d_pose[c] += pose_params_backward(scene.poses[c], d_rot, d_trans);
    grads.d_fov += d_focal * focal_fov_derivative(scene.fov_rad, K.width_px);
  }

  for (std::size_t i = 0; i < scene.world.size(); ++i) {
    const std::size_t gi = decoded.world_offset + i;
    grads.d_center[gi] += sg.gaussians.d_center[gi];
    grads.world.d_center[i] += sg.gaussians.d_center[gi];
    grads.world.d_quat[i] += sg.gaussians.d_quat[gi];
    grads.world.d_log_scale[i] += sg.gaussians.d_log_scale[gi];
    grads.world.d_opacity_logit[i] += sg.gaussians.d_opacity_logit[gi];
    for (int k = 0; k < stride; ++k) grads.world.d_sh[i * stride + k] += sg.gaussians.d_sh[gi * stride + k];
  }
}

RenderGradients render_backward(const SceneParameters& scene, std::size_t view,
                                const Vec3& background, const Image& color_grad,
                                const RenderConfig& cfg) {
  const DecodedScene decoded = decode_scene(scene);
  const RenderState state = render_scene_view(decoded, view, background, cfg);
  RenderGradients grads = RenderGradients::zeros_like(scene);
  scene_backward(scene, decoded, state, view, color_grad, grads);
  return grads;
}

}  // namespace splatba
