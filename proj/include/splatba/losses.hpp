#pragma once

#include <functional>
#include <vector>

#include "splatba/geometry.hpp"
#include "splatba/image.hpp"

namespace splatba {

struct LossValue {
  double value = 0.0;
  Image grad;  // d value / d rendered
};

/// Perceptual term plug-in: (rendered, target) -> (scalar, d/d rendered).
using PerceptualLoss = std::function<LossValue(const Image& rendered, const Image& target)>;

/// Mean squared error over all pixels and channels.
LossValue mse_loss(const Image& rendered, const Image& target);

/// mse + gamma * perceptual (perceptual skipped when empty or gamma == 0).
LossValue rendering_loss(const Image& rendered, const Image& target, double gamma,
                         const PerceptualLoss& perceptual = {});

/// 1 - SSIM, the built-in perceptual plug-in.
LossValue ssim_loss(const Image& rendered, const Image& target);

struct PoseLoss {
  double value = 0.0;
  PoseParamsGrad grad;
};

inline constexpr double kPoseRotationWeight = 0.1;
inline constexpr double kPoseTranslationWeight = 0.01;

/// 0.1 * geodesic(R_pred, R_gt) [rad] + 0.01 * |T_pred - T_gt|, with the
/// gradient w.r.t. the raw parameters of `pred`.
PoseLoss pose_supervision_loss(const PoseParams6D& pred, const CameraPose& gt);

struct ScaleNormalized {
  std::vector<Image> depths;
  std::vector<Vec3> translations;
  double factor = 1.0;
};

/// Divides depths and translations by the median of all valid (finite,
/// positive) depths. Throws ArgumentError when there are none.
ScaleNormalized normalize_scale(const std::vector<Image>& depths,
                                const std::vector<Vec3>& translations);

/// mean |pred / median(pred) - gt / median(gt)| over valid pixels, with the
/// gradient w.r.t. pred (including the path through median(pred)). An empty
/// mask selects every pixel with gt > 0.
LossValue depth_l1_loss(const Image& pred, const Image& gt, std::span<const std::uint8_t> valid);

}  // namespace splatba
