#include "splatba/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "splatba/errors.hpp"
#include "splatba/kernels.hpp"
#include "splatba/metrics.hpp"

namespace splatba {

LossValue mse_loss(const Image& rendered, const Image& target) {
  if (!rendered.same_shape(target)) throw ArgumentError("rendering_loss: image shapes differ");
  if (rendered.data.empty()) throw ArgumentError("rendering_loss: empty images");
  const double n = static_cast<double>(rendered.data.size());
  LossValue out;
  out.grad = Image(rendered.width, rendered.height, rendered.channels);
  out.value = kernels::squared_error(rendered.data, target.data, out.grad.data, 2.0 / n) / n;
  return out;
}

LossValue rendering_loss(const Image& rendered, const Image& target, double gamma,
                         const PerceptualLoss& perceptual) {
  if (gamma < 0.0) throw ArgumentError("rendering_loss: gamma must be >= 0");
  LossValue out = mse_loss(rendered, target);
  if (perceptual && gamma > 0.0) {
    const LossValue p = perceptual(rendered, target);
    out.value += gamma * p.value;
    kernels::axpy(gamma, p.grad.data, out.grad.data);
  }
  return out;
}

LossValue ssim_loss(const Image& rendered, const Image& target) {
  SsimWithGrad s = ssim_with_grad(rendered, target);
  LossValue out;
  out.value = 1.0 - s.value;
  out.grad = std::move(s.grad);
  for (double& g : out.grad.data) g = -g;
  return out;
}

PoseLoss pose_supervision_loss(const PoseParams6D& pred, const CameraPose& gt) {
  const CameraPose p = pred.decode();
  PoseLoss out;

  // theta = atan2(|w| / 2, (tr(M) - 1) / 2) with M = R_gt^T R_pred and w the
  // skew part of M.
  const Mat3 m = gt.rotation.transpose() * p.rotation;
  const Vec3 w(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  const double s = 0.5 * w.norm();
  const double c = 0.5 * (m.trace() - 1.0);
  const double theta = std::atan2(s, c);
  Mat3 d_m = Mat3::Zero();
  const double r2 = s * s + c * c;
  if (s > 1e-12 && r2 > 0.0) {
    const double dth_ds = c / r2;
    const double dth_dc = -s / r2;
    const Vec3 ds_dw = w / (4.0 * s);  // d(|w|/2)/dw = w / (2|w|)
    d_m(2, 1) += dth_ds * ds_dw.x();
    d_m(1, 2) -= dth_ds * ds_dw.x();
    d_m(0, 2) += dth_ds * ds_dw.y();
    d_m(2, 0) -= dth_ds * ds_dw.y();
    d_m(1, 0) += dth_ds * ds_dw.z();
    d_m(0, 1) -= dth_ds * ds_dw.z();
    d_m.diagonal().array() += 0.5 * dth_dc;
  }
  const Mat3 d_rot = kPoseRotationWeight * (gt.rotation * d_m);

  const Vec3 dt = p.translation - gt.translation;
  const double dist = dt.norm();
  const Vec3 d_trans = dist > 0.0 ? Vec3(kPoseTranslationWeight * dt / dist) : Vec3::Zero();

  out.value = kPoseRotationWeight * theta + kPoseTranslationWeight * dist;
  out.grad = pose_params_backward(pred, d_rot, d_trans);
  return out;
}

ScaleNormalized normalize_scale(const std::vector<Image>& depths,
                                const std::vector<Vec3>& translations) {
  std::vector<double> valid;
  for (const Image& d : depths)
    for (double x : d.data)
      if (std::isfinite(x) && x > 0.0) valid.push_back(x);
  if (valid.empty()) throw ArgumentError("normalize_scale: no valid depth values");
  ScaleNormalized out;
  out.factor = median(std::move(valid));
  out.depths = depths;
  for (Image& d : out.depths)
    for (double& x : d.data) x /= out.factor;
  for (const Vec3& t : translations) out.translations.push_back(t / out.factor);
  return out;
}

LossValue depth_l1_loss(const Image& pred, const Image& gt, std::span<const std::uint8_t> valid) {
  if (!pred.same_shape(gt) || pred.channels != 1) throw ArgumentError("depth_l1_loss: shape mismatch");
  if (!valid.empty() && valid.size() != gt.data.size()) throw ArgumentError("depth_l1_loss: mask size");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    if (valid.empty() ? gt.data[i] > 0.0 : valid[i] != 0) idx.push_back(i);
  }
  if (idx.empty()) throw ArgumentError("depth_l1_loss: no valid pixels");

  // Positions (within idx) of the element(s) defining median(pred).
  std::vector<std::size_t> order(idx.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double pa = pred.data[idx[a]], pb = pred.data[idx[b]];
    return pa != pb ? pa < pb : a < b;
  });
  const std::size_t n = idx.size();
  std::vector<std::pair<std::size_t, double>> median_terms;
  if (n % 2 == 1) {
    median_terms = {{order[n / 2], 1.0}};
  } else {
    median_terms = {{order[n / 2 - 1], 0.5}, {order[n / 2], 0.5}};
  }
  double mp = 0.0;
  for (auto [k, w] : median_terms) mp += w * pred.data[idx[k]];
  std::vector<double> g;
  for (std::size_t i : idx) g.push_back(gt.data[i]);
  const double mg = median(g);
  if (!(mp > 0.0) || !(mg > 0.0)) throw ArgumentError("depth_l1_loss: non-positive median");

  LossValue out;
  out.grad = Image(pred.width, pred.height, 1);
  const double inv_n = 1.0 / static_cast<double>(n);
  double through_median = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double p = pred.data[idx[k]];
    const double r = p / mp - gt.data[idx[k]] / mg;
    out.value += std::abs(r) * inv_n;
    const double sign = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
    out.grad.data[idx[k]] += sign * inv_n / mp;
    through_median -= sign * inv_n * p / (mp * mp);
  }
  for (auto [k, w] : median_terms) out.grad.data[idx[k]] += w * through_median;
  return out;
}

}  // namespace splatba
