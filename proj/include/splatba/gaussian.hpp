#pragma once

#include <span>
#include <vector>

#include "splatba/geometry.hpp"

namespace splatba {

inline constexpr int kMaxShDegree = 2;

/// Number of SH coefficients per color channel for a degree.
constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

double sigmoid(double x);

/// Pixel-aligned or free-floating 3D Gaussians in the canonical frame, stored
/// structure-of-arrays. Activations: scale = exp(log_scale),
/// opacity = sigmoid(opacity_logit). SH coefficients are laid out
/// [primitive][coefficient][channel].
struct GaussianSet {
  int sh_degree = 0;
  std::vector<Vec3> centers;
  std::vector<Vec4> quats;  // (w, x, y, z)
  std::vector<Vec3> log_scales;
  std::vector<double> opacity_logits;
  std::vector<double> sh;

  explicit GaussianSet(int degree = 0);

  std::size_t size() const { return centers.size(); }
  int coeffs_per_channel() const { return sh_coeff_count(sh_degree); }
  int sh_stride() const { return 3 * coeffs_per_channel(); }

  std::span<const double> sh_of(std::size_t i) const {
    return {sh.data() + i * sh_stride(), static_cast<std::size_t>(sh_stride())};
  }
  std::span<double> sh_of(std::size_t i) {
    return {sh.data() + i * sh_stride(), static_cast<std::size_t>(sh_stride())};
  }

  void reserve(std::size_t n);
  /// Appends one primitive; `coeffs` must hold sh_stride() values.
  void push_back(const Vec3& center, const Vec4& quat, const Vec3& log_scale,
                 double opacity_logit, std::span<const double> coeffs);
};

/// Per-pixel raw depth logits and the near/far planes they map into.
struct DepthMap {
  int width = 0;
  int height = 0;
  double near = 0.1;
  double far = 100.0;
  std::vector<double> raw;

  DepthMap() = default;
  DepthMap(int width, int height, double near, double far, double fill = 0.0);

  double activated(std::size_t i) const;
  std::vector<double> activated() const;
};

/// near + sigmoid(raw) * (far - near). Throws ArgumentError unless 0 < near < far.
double activate_depth(double raw, double near, double far);
/// d activate_depth / d raw.
double activate_depth_derivative(double raw, double near, double far);
/// Logit whose activation is `depth`; depth must lie strictly inside (near, far).
double depth_to_logit(double depth, double near, double far);

/// Gaussian centers for every pixel of `depth`, row-major (index = v * W + u).
std::vector<Vec3> lift_depth_to_centers(const DepthMap& depth, const CameraIntrinsics& K,
                                        const CameraPose& P);

/// Sigma = R S S^T R^T with S = diag(exp(log_scale)).
Mat3 build_covariance(const Vec4& quat, const Vec3& log_scale);

struct CovarianceGrad {
  Vec4 quat = Vec4::Zero();
  Vec3 log_scale = Vec3::Zero();
};

/// Pulls back dL/dSigma (treated as a symmetric full-matrix gradient).
CovarianceGrad build_covariance_backward(const Vec4& quat, const Vec3& log_scale,
                                         const Mat3& d_sigma);

/// Real spherical-harmonic basis (Condon-Shortley phase) for degree <= 2,
/// written into `out` (size (degree+1)^2).
void sh_basis(int degree, const Vec3& dir, std::span<double> out);

struct ShEval {
  Vec3 raw = Vec3::Zero();  // 0.5 + sum c * Y, before clamping
  Vec3 rgb = Vec3::Zero();  // clamped to [0, 1]
};

/// Color seen along unit `view_dir`. Throws ArgumentError on a coefficient
/// count mismatch.
ShEval eval_sh_full(std::span<const double> coeffs, const Vec3& view_dir, int degree);
inline Vec3 eval_sh(std::span<const double> coeffs, const Vec3& view_dir, int degree) {
  return eval_sh_full(coeffs, view_dir, degree).rgb;
}

/// Gradients of eval_sh: accumulates into d_coeffs and returns dL/d(view_dir).
/// Channels clamped in the forward pass pass no gradient.
Vec3 eval_sh_backward(std::span<const double> coeffs, const Vec3& view_dir, int degree,
                      const ShEval& forward, const Vec3& d_rgb, std::span<double> d_coeffs);

/// SH degree-0 coefficient for which eval_sh returns `color`.
double color_to_sh0(double color);

}  // namespace splatba
