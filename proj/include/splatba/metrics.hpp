#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "splatba/geometry.hpp"
#include "splatba/image.hpp"

namespace splatba {

/// Returned by psnr for identical images.
inline constexpr double kPsnrExact = std::numeric_limits<double>::infinity();

/// 10 log10(1 / MSE) over all pixels and channels; kPsnrExact when MSE = 0.
double psnr(const Image& a, const Image& b);

struct SsimConfig {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Mean local SSIM over the "valid" window positions, per channel, averaged.
double ssim(const Image& a, const Image& b, const SsimConfig& cfg = {});

/// SSIM together with d SSIM / d a.
struct SsimWithGrad {
  double value = 0.0;
  Image grad;
};
SsimWithGrad ssim_with_grad(const Image& a, const Image& b, const SsimConfig& cfg = {});

/// Normalized 1D Gaussian window used by ssim.
std::vector<double> gaussian_window(int size, double sigma);

struct PoseErrorSample {
  double rot_err_deg = 0.0;
  double trans_err_deg = 0.0;
  double overall_deg = 0.0;  // max of the two

  static PoseErrorSample from(const PoseAngularError& e);
};

/// Area under the recall-vs-error curve up to each threshold, divided by the
/// threshold. Integrated exactly from the step function.
std::vector<double> pose_auc(std::span<const PoseErrorSample> samples,
                             std::span<const double> thresholds_deg);

/// Errors of every ordered pair i < j of relative poses inv(P_i) ∘ P_j.
std::vector<PoseErrorSample> relative_pose_errors(std::span<const CameraPose> pred,
                                                  std::span<const CameraPose> gt);

struct DepthMetrics {
  double rel = 0.0;
  double tau = 0.0;
  double scale = 1.0;  // applied to pred before scoring
};

/// rel = mean |pred - gt| / gt, tau = fraction with max(pred/gt, gt/pred) < 1.25,
/// over pixels where `valid` is nonzero. With `align`, pred is first scaled by
/// median(gt) / median(pred). An empty `valid` selects every pixel with gt > 0.
DepthMetrics depth_metrics(const Image& pred, const Image& gt,
                           std::span<const std::uint8_t> valid, bool align = true);

/// Median; the mean of the two middle values for even counts.
double median(std::vector<double> values);

}  // namespace splatba
