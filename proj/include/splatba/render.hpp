#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "splatba/gaussian.hpp"
#include "splatba/geometry.hpp"
#include "splatba/image.hpp"

namespace splatba {

/// Rasterizer constants. Defaults follow common splatting practice.
struct RenderConfig {
  double sigma_cutoff = 3.0;           // Mahalanobis footprint radius
  double min_weight = 1.0 / 255.0;     // alpha * density below this is skipped
  double min_transmittance = 1e-4;     // compositing stops once T drops below
  double blur = 0.3;                   // px^2 added to the 2D covariance diagonal
  double cull_margin = 0.3;            // footprint may extend this fraction past the image
  double near_clip = 0.01;             // camera-frame z at or below is culled
  double alpha_eps = 1e-6;             // depth normalisation floor
  int tile_size = 16;
  int threads = 1;                     // 0 = hardware concurrency (capped by SPLATBA_THREADS)
};

struct Camera {
  CameraIntrinsics intrinsics;
  CameraPose pose;
};

struct ProjectedGaussian {
  Vec2 mean;
  Mat2 cov;
  double depth = 0.0;
};

/// EWA projection of a 3D Gaussian into the target view:
/// cov2d = J W Sigma W^T J^T + blur * I with W the world-to-view rotation and
/// J the perspective Jacobian at the mean. Returns std::nullopt when culled.
std::optional<ProjectedGaussian> project_gaussian(const Vec3& mean, const Mat3& sigma,
                                                  const CameraIntrinsics& K, const CameraPose& P,
                                                  const RenderConfig& cfg = {});

/// Upper-triangular entries (a, b, c) of the inverse of a symmetric 2x2 matrix.
Vec3 conic_from_cov(const Mat2& cov);
/// Squared Mahalanobis distance of a pixel offset under a conic.
inline double conic_power(const Vec3& conic, double dx, double dy) {
  return conic[0] * dx * dx + 2.0 * conic[1] * dx * dy + conic[2] * dy * dy;
}

/// Screen-space primitive ready for compositing.
struct Splat {
  std::uint32_t index = 0;  // into the GaussianSet
  Vec2 mean;
  Vec3 conic;
  double depth = 0.0;
  double opacity = 0.0;
  Vec3 rgb;
  ShEval sh;
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel bounding box
};

struct RenderOutput {
  Image color;  // H x W x 3
  Image depth;  // alpha-normalised expected camera depth
  Image alpha;
};

/// Everything the backward pass needs from a forward render.
struct RenderState {
  bool valid = false;
  std::size_t gaussian_count = 0;
  Camera camera;
  int width = 0;
  int height = 0;
  Vec3 background = Vec3::Zero();
  RenderConfig config;
  std::vector<Splat> splats;  // front-to-back: (depth, index) ascending
  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<std::vector<std::uint32_t>> tile_lists;  // indices into `splats`
  std::vector<double> final_transmittance;             // per pixel
  std::vector<std::uint32_t> processed;                // list entries visited per pixel
  RenderOutput output;
};

/// Deterministic tiled forward pass: bit-identical for any thread count.
RenderState render_with_state(const GaussianSet& gaussians, const Camera& camera, int width,
                              int height, const Vec3& background, const RenderConfig& cfg = {});

inline RenderOutput render(const GaussianSet& gaussians, const Camera& camera, int width,
                           int height, const Vec3& background, const RenderConfig& cfg = {}) {
  return render_with_state(gaussians, camera, width, height, background, cfg).output;
}

Image render_depth_only(const GaussianSet& gaussians, const Camera& camera, int width, int height,
                        const RenderConfig& cfg = {});

struct GaussianGradients {
  std::vector<Vec3> d_center;
  std::vector<Vec4> d_quat;
  std::vector<Vec3> d_log_scale;
  std::vector<double> d_opacity_logit;
  std::vector<double> d_sh;
};

struct CameraGradients {
  Mat3 d_rotation = Mat3::Zero();
  Vec3 d_translation = Vec3::Zero();
  double d_focal = 0.0;
};

struct SplatGradients {
  GaussianGradients gaussians;
  CameraGradients camera;
};

/// Color image evaluated with the compositing structure of `base` held fixed:
/// the same front-to-back order, the same contributing (pixel, splat) pairs
/// and the same termination points, with every splat re-projected from
/// `gaussians` and `camera`. This is the smooth piece of the renderer around
/// the base point; finite differences of it are what the analytic backward
/// pass differentiates. Culling and footprint thresholds are not re-applied.
Image render_replay(const GaussianSet& gaussians, const Camera& camera, const RenderState& base);

/// Gradient of <color_grad, color> w.r.t. every Gaussian parameter and the
/// target camera. Throws UsageError if `state` does not come from a forward
/// render of `gaussians`.
SplatGradients render_backward(const GaussianSet& gaussians, const RenderState& state,
                               const Image& color_grad);

}  // namespace splatba
