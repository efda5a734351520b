#include "splatba/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "splatba/errors.hpp"

namespace splatba {

namespace {

constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                           -1.0925484305920792, 0.5462742152960396};

void check_planes(double near, double far) {
  if (!(near > 0.0 && near < far)) {
    throw ArgumentError("depth planes require 0 < near < far");
  }
}

}  // namespace

double sigmoid(double x) {
  // Branches keep exp() from overflowing for large |x|.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

GaussianSet::GaussianSet(int degree) : sh_degree(degree) {
  if (degree < 0 || degree > kMaxShDegree) {
    throw ArgumentError("SH degree must be in [0, 2], got " + std::to_string(degree));
  }
}

void GaussianSet::reserve(std::size_t n) {
  centers.reserve(n);
  quats.reserve(n);
  log_scales.reserve(n);
  opacity_logits.reserve(n);
  sh.reserve(n * sh_stride());
}

void GaussianSet::push_back(const Vec3& center, const Vec4& quat, const Vec3& log_scale,
                            double opacity_logit, std::span<const double> coeffs) {
  if (coeffs.size() != static_cast<std::size_t>(sh_stride())) {
    throw ArgumentError("GaussianSet::push_back: wrong SH coefficient count");
  }
  centers.push_back(center);
  quats.push_back(quat);
  log_scales.push_back(log_scale);
  opacity_logits.push_back(opacity_logit);
  sh.insert(sh.end(), coeffs.begin(), coeffs.end());
}

DepthMap::DepthMap(int w, int h, double n, double f, double fill)
    : width(w), height(h), near(n), far(f), raw(static_cast<std::size_t>(w) * h, fill) {
  check_planes(n, f);
  if (w < 1 || h < 1) throw ArgumentError("DepthMap dimensions must be >= 1");
}

double DepthMap::activated(std::size_t i) const { return activate_depth(raw[i], near, far); }

std::vector<double> DepthMap::activated() const {
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = activated(i);
  return out;
}

double activate_depth(double raw, double near, double far) {
  check_planes(near, far);
  return near + sigmoid(raw) * (far - near);
}

double activate_depth_derivative(double raw, double near, double far) {
  const double s = sigmoid(raw);
  return s * (1.0 - s) * (far - near);
}

double depth_to_logit(double depth, double near, double far) {
  check_planes(near, far);
  if (!(depth > near && depth < far)) throw DomainError("depth outside (near, far)");
  const double t = (depth - near) / (far - near);
  return std::log(t / (1.0 - t));
}

std::vector<Vec3> lift_depth_to_centers(const DepthMap& depth, const CameraIntrinsics& K,
                                        const CameraPose& P) {
  if (depth.width != K.width_px || depth.height != K.height_px) {
    throw ArgumentError("lift_depth_to_centers: depth map and intrinsics disagree on size");
  }
  std::vector<Vec3> centers;
  centers.reserve(depth.raw.size());
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      const std::size_t i = static_cast<std::size_t>(v) * depth.width + u;
      centers.push_back(unproject(Vec2(u, v), depth.activated(i), K, P));
    }
  }
  return centers;
}

Mat3 build_covariance(const Vec4& quat, const Vec3& log_scale) {
  const Mat3 R = quat_to_matrix(quat);
  const Mat3 N = R * log_scale.array().exp().matrix().asDiagonal();
  return N * N.transpose();
}

CovarianceGrad build_covariance_backward(const Vec4& quat, const Vec3& log_scale,
                                         const Mat3& d_sigma) {
  const Mat3 R = quat_to_matrix(quat);
  const Vec3 s = log_scale.array().exp();
  const Mat3 N = R * s.asDiagonal();
  const Mat3 dN = (d_sigma + d_sigma.transpose()) * N;
  const Mat3 dR = dN * s.asDiagonal();
  CovarianceGrad g;
  for (int j = 0; j < 3; ++j) g.log_scale[j] = dN.col(j).dot(R.col(j)) * s[j];
  g.quat = quat_backward(quat, dR);
  return g;
}

void sh_basis(int degree, const Vec3& d, std::span<double> out) {
  out[0] = kC0;
  if (degree < 1) return;
  const double x = d.x(), y = d.y(), z = d.z();
  out[1] = -kC1 * y;
  out[2] = kC1 * z;
  out[3] = -kC1 * x;
  if (degree < 2) return;
  out[4] = kC2[0] * x * y;
  out[5] = kC2[1] * y * z;
  out[6] = kC2[2] * (2.0 * z * z - x * x - y * y);
  out[7] = kC2[3] * x * z;
  out[8] = kC2[4] * (x * x - y * y);
}

ShEval eval_sh_full(std::span<const double> coeffs, const Vec3& view_dir, int degree) {
  if (degree < 0 || degree > kMaxShDegree) throw ArgumentError("SH degree must be in [0, 2]");
  const int k = sh_coeff_count(degree);
  if (coeffs.size() != static_cast<std::size_t>(3 * k)) {
    throw ArgumentError("eval_sh: expected " + std::to_string(3 * k) + " coefficients, got " +
                        std::to_string(coeffs.size()));
  }
  double basis[9];
  sh_basis(degree, view_dir, basis);
  ShEval e;
  for (int c = 0; c < 3; ++c) {
    double acc = 0.5;
    for (int j = 0; j < k; ++j) acc += coeffs[3 * j + c] * basis[j];
    e.raw[c] = acc;
    e.rgb[c] = std::clamp(acc, 0.0, 1.0);
  }
  return e;
}

Vec3 eval_sh_backward(std::span<const double> coeffs, const Vec3& view_dir, int degree,
                      const ShEval& forward, const Vec3& d_rgb, std::span<double> d_coeffs) {
  const int k = sh_coeff_count(degree);
  double basis[9];
  sh_basis(degree, view_dir, basis);
  Vec3 g = d_rgb;
  for (int c = 0; c < 3; ++c) {
    if (forward.raw[c] < 0.0 || forward.raw[c] > 1.0) g[c] = 0.0;
  }
  for (int j = 0; j < k; ++j) {
    for (int c = 0; c < 3; ++c) d_coeffs[3 * j + c] += g[c] * basis[j];
  }
  Vec3 d_dir = Vec3::Zero();
  if (degree < 1) return d_dir;

  // dot of each basis gradient with the per-basis upstream sum_c g_c * coeff_jc
  double w[9];
  for (int j = 0; j < k; ++j) {
    w[j] = g[0] * coeffs[3 * j] + g[1] * coeffs[3 * j + 1] + g[2] * coeffs[3 * j + 2];
  }
  const double x = view_dir.x(), y = view_dir.y(), z = view_dir.z();
  d_dir.x() += -kC1 * w[3];
  d_dir.y() += -kC1 * w[1];
  d_dir.z() += kC1 * w[2];
  if (degree >= 2) {
    d_dir.x() += kC2[0] * y * w[4] - 2.0 * kC2[2] * x * w[6] + kC2[3] * z * w[7] +
                 2.0 * kC2[4] * x * w[8];
    d_dir.y() += kC2[0] * x * w[4] + kC2[1] * z * w[5] - 2.0 * kC2[2] * y * w[6] -
                 2.0 * kC2[4] * y * w[8];
    d_dir.z() += kC2[1] * y * w[5] + 4.0 * kC2[2] * z * w[6] + kC2[3] * x * w[7];
  }
  return d_dir;
}

double color_to_sh0(double color) { return (color - 0.5) / kC0; }

}  // namespace splatba
