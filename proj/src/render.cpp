#include "splatba/render.hpp"

#include <algorithm>
#include <cmath>

#include "splatba/errors.hpp"
#include "splatba/parallel.hpp"

namespace splatba {

namespace {

double max_eigenvalue(const Mat2& m) {
  const double mid = 0.5 * (m(0, 0) + m(1, 1));
  const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  return mid + std::sqrt(std::max(mid * mid - det, 0.0));
}

// Perspective Jacobian of (f x / z, f y / z) at a view-frame point.
Eigen::Matrix<double, 2, 3> projection_jacobian(const Vec3& p, double f) {
  const double iz = 1.0 / p.z();
  Eigen::Matrix<double, 2, 3> J;
  J << f * iz, 0.0, -f * p.x() * iz * iz, 0.0, f * iz, -f * p.y() * iz * iz;
  return J;
}

struct PixelRange {
  int x0, x1, y0, y1;
};

// Inclusive pixel range covering the footprint, padded by one pixel so the
// per-pixel Mahalanobis test is always the binding one.
PixelRange footprint_range(const Vec2& mean, double radius, int width, int height) {
  return {std::max(0, static_cast<int>(std::ceil(mean.x() - radius)) - 1),
          std::min(width - 1, static_cast<int>(std::floor(mean.x() + radius)) + 1),
          std::max(0, static_cast<int>(std::ceil(mean.y() - radius)) - 1),
          std::min(height - 1, static_cast<int>(std::floor(mean.y() + radius)) + 1)};
}

struct Contribution {
  std::uint32_t entry;  // position in the tile list
  double alpha;
  double density;
  double transmittance;  // before this splat
  double dx, dy;
};

}  // namespace

std::optional<ProjectedGaussian> project_gaussian(const Vec3& mean, const Mat3& sigma,
                                                  const CameraIntrinsics& K, const CameraPose& P,
                                                  const RenderConfig& cfg) {
  const Vec3 p = P.to_view(mean);
  if (!(p.z() > cfg.near_clip)) return std::nullopt;
  const double f = K.focal();
  const Eigen::Matrix<double, 2, 3> M = projection_jacobian(p, f) * P.rotation.transpose();
  ProjectedGaussian out;
  out.mean = Vec2(f * p.x() / p.z() + K.cx(), f * p.y() / p.z() + K.cy());
  out.cov = M * sigma * M.transpose();
  out.cov(0, 1) = out.cov(1, 0) = 0.5 * (out.cov(0, 1) + out.cov(1, 0));
  out.cov(0, 0) += cfg.blur;
  out.cov(1, 1) += cfg.blur;
  out.depth = p.z();

  const double r = cfg.sigma_cutoff * std::sqrt(max_eigenvalue(out.cov));
  const double mx = cfg.cull_margin * K.width_px;
  const double my = cfg.cull_margin * K.height_px;
  if (!std::isfinite(r) || out.mean.x() + r < -mx || out.mean.x() - r > K.width_px - 1 + mx ||
      out.mean.y() + r < -my || out.mean.y() - r > K.height_px - 1 + my) {
    return std::nullopt;
  }
  return out;
}

Vec3 conic_from_cov(const Mat2& cov) {
  const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(0, 1);
  const double inv = 1.0 / det;
  return Vec3(cov(1, 1) * inv, -cov(0, 1) * inv, cov(0, 0) * inv);
}

RenderState render_with_state(const GaussianSet& gaussians, const Camera& camera, int width,
                              int height, const Vec3& background, const RenderConfig& cfg) {
  if (width < 1 || height < 1) throw ArgumentError("render: image size must be >= 1");
  if (camera.intrinsics.width_px != width || camera.intrinsics.height_px != height) {
    throw ArgumentError("render: intrinsics and output size disagree");
  }
  if (cfg.tile_size < 1) throw ArgumentError("render: tile size must be >= 1");

  RenderState st;
  st.gaussian_count = gaussians.size();
  st.camera = camera;
  st.width = width;
  st.height = height;
  st.background = background;
  st.config = cfg;

  const CameraIntrinsics& K = camera.intrinsics;
  const Vec3 eye = camera.pose.translation;
  for (std::size_t i = 0; i < gaussians.size(); ++i) {
    const Mat3 sigma = build_covariance(gaussians.quats[i], gaussians.log_scales[i]);
    const auto proj = project_gaussian(gaussians.centers[i], sigma, K, camera.pose, cfg);
    if (!proj) continue;
    const double radius = cfg.sigma_cutoff * std::sqrt(max_eigenvalue(proj->cov));
    const PixelRange range = footprint_range(proj->mean, radius, width, height);
    if (range.x0 > range.x1 || range.y0 > range.y1) continue;

    Splat s;
    s.index = static_cast<std::uint32_t>(i);
    s.mean = proj->mean;
    s.conic = conic_from_cov(proj->cov);
    s.depth = proj->depth;
    s.opacity = sigmoid(gaussians.opacity_logits[i]);
    s.sh = eval_sh_full(gaussians.sh_of(i), (gaussians.centers[i] - eye).normalized(),
                        gaussians.sh_degree);
    s.rgb = s.sh.rgb;
    s.x0 = range.x0;
    s.x1 = range.x1;
    s.y0 = range.y0;
    s.y1 = range.y1;
    st.splats.push_back(s);
  }
  std::sort(st.splats.begin(), st.splats.end(), [](const Splat& a, const Splat& b) {
    return a.depth != b.depth ? a.depth < b.depth : a.index < b.index;
  });

  const int ts = cfg.tile_size;
  st.tiles_x = (width + ts - 1) / ts;
  st.tiles_y = (height + ts - 1) / ts;
  st.tile_lists.assign(static_cast<std::size_t>(st.tiles_x) * st.tiles_y, {});
  for (std::size_t k = 0; k < st.splats.size(); ++k) {
    const Splat& s = st.splats[k];
    for (int ty = s.y0 / ts; ty <= s.y1 / ts; ++ty) {
      for (int tx = s.x0 / ts; tx <= s.x1 / ts; ++tx) {
        st.tile_lists[static_cast<std::size_t>(ty) * st.tiles_x + tx].push_back(
            static_cast<std::uint32_t>(k));
      }
    }
  }

  st.output.color = Image(width, height, 3);
  st.output.depth = Image(width, height, 1);
  st.output.alpha = Image(width, height, 1);
  st.final_transmittance.assign(st.output.alpha.pixel_count(), 1.0);
  st.processed.assign(st.output.alpha.pixel_count(), 0);

  const double cutoff2 = cfg.sigma_cutoff * cfg.sigma_cutoff;
  parallel_for(st.tile_lists.size(), resolve_thread_count(cfg.threads), [&](std::size_t tile) {
    const auto& list = st.tile_lists[tile];
    const int tx = static_cast<int>(tile % st.tiles_x);
    const int ty = static_cast<int>(tile / st.tiles_x);
    for (int y = ty * ts; y < std::min(height, (ty + 1) * ts); ++y) {
      for (int x = tx * ts; x < std::min(width, (tx + 1) * ts); ++x) {
        double T = 1.0;
        double acc_alpha = 0.0;
        double acc_depth = 0.0;
        Vec3 acc_color = Vec3::Zero();
        std::uint32_t visited = static_cast<std::uint32_t>(list.size());
        for (std::uint32_t e = 0; e < list.size(); ++e) {
          const Splat& s = st.splats[list[e]];
          const double dx = x - s.mean.x();
          const double dy = y - s.mean.y();
          const double q = conic_power(s.conic, dx, dy);
          if (q > cutoff2) continue;
          const double a = s.opacity * std::exp(-0.5 * q);
          if (a < cfg.min_weight) continue;
          const double w = T * a;
          acc_color += w * s.rgb;
          acc_depth += w * s.depth;
          acc_alpha += w;
          T *= 1.0 - a;
          if (T < cfg.min_transmittance) {
            visited = e + 1;
            break;
          }
        }
        const std::size_t p = static_cast<std::size_t>(y) * width + x;
        st.final_transmittance[p] = T;
        st.processed[p] = visited;
        for (int c = 0; c < 3; ++c) st.output.color.at(x, y, c) = acc_color[c] + T * background[c];
        st.output.alpha.at(x, y) = acc_alpha;
        st.output.depth.at(x, y) = acc_depth / std::max(acc_alpha, cfg.alpha_eps);
      }
    }
  });
  st.valid = true;
  return st;
}

Image render_depth_only(const GaussianSet& gaussians, const Camera& camera, int width, int height,
                        const RenderConfig& cfg) {
  return render_with_state(gaussians, camera, width, height, Vec3::Zero(), cfg).output.depth;
}

Image render_replay(const GaussianSet& gaussians, const Camera& camera, const RenderState& base) {
  if (!base.valid || base.gaussian_count != gaussians.size()) {
    throw UsageError("render_replay: base state does not match the GaussianSet");
  }
  const RenderConfig& cfg = base.config;
  const CameraIntrinsics& K = camera.intrinsics;
  const double f = K.focal();
  const Vec3 eye = camera.pose.translation;

  // Re-project every splat of the base pass without culling.
  std::vector<Splat> moved = base.splats;
  for (Splat& s : moved) {
    const std::size_t i = s.index;
    const Vec3 p = camera.pose.to_view(gaussians.centers[i]);
    const Eigen::Matrix<double, 2, 3> M = projection_jacobian(p, f) * camera.pose.rotation.transpose();
    Mat2 cov = M * build_covariance(gaussians.quats[i], gaussians.log_scales[i]) * M.transpose();
    cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
    cov(0, 0) += cfg.blur;
    cov(1, 1) += cfg.blur;
    s.mean = Vec2(f * p.x() / p.z() + K.cx(), f * p.y() / p.z() + K.cy());
    s.conic = conic_from_cov(cov);
    s.depth = p.z();
    s.opacity = sigmoid(gaussians.opacity_logits[i]);
    s.rgb = eval_sh(gaussians.sh_of(i), (gaussians.centers[i] - eye).normalized(), gaussians.sh_degree);
  }

  const int ts = cfg.tile_size;
  const double cutoff2 = cfg.sigma_cutoff * cfg.sigma_cutoff;
  Image color(base.width, base.height, 3);
  for (std::size_t tile = 0; tile < base.tile_lists.size(); ++tile) {
    const auto& list = base.tile_lists[tile];
    const int tx = static_cast<int>(tile % base.tiles_x);
    const int ty = static_cast<int>(tile / base.tiles_x);
    for (int y = ty * ts; y < std::min(base.height, (ty + 1) * ts); ++y) {
      for (int x = tx * ts; x < std::min(base.width, (tx + 1) * ts); ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * base.width + x;
        double T = 1.0;
        Vec3 acc = Vec3::Zero();
        for (std::uint32_t e = 0; e < base.processed[p]; ++e) {
          const Splat& s0 = base.splats[list[e]];
          const double q0 = conic_power(s0.conic, x - s0.mean.x(), y - s0.mean.y());
          if (q0 > cutoff2 || s0.opacity * std::exp(-0.5 * q0) < cfg.min_weight) continue;
          const Splat& s = moved[list[e]];
          const double a = s.opacity * std::exp(-0.5 * conic_power(s.conic, x - s.mean.x(), y - s.mean.y()));
          acc += T * a * s.rgb;
          T *= 1.0 - a;
        }
        for (int c = 0; c < 3; ++c) color.at(x, y, c) = acc[c] + T * base.background[c];
      }
    }
  }
  return color;
}

SplatGradients render_backward(const GaussianSet& gaussians, const RenderState& st,
                               const Image& color_grad) {
  if (!st.valid) throw UsageError("render_backward: no forward intermediates");
  if (st.gaussian_count != gaussians.size()) {
    throw UsageError("render_backward: state was produced for a different GaussianSet");
  }
  if (color_grad.width != st.width || color_grad.height != st.height || color_grad.channels != 3) {
    throw ArgumentError("render_backward: gradient image has the wrong shape");
  }
  const RenderConfig& cfg = st.config;
  const int ts = cfg.tile_size;
  const double cutoff2 = cfg.sigma_cutoff * cfg.sigma_cutoff;

  // Screen-space gradients per tile-list entry: mean(2), conic(3), rgb(3), opacity(1).
  constexpr int kSlots = 9;
  std::vector<std::vector<double>> tile_grads(st.tile_lists.size());
  parallel_for(st.tile_lists.size(), resolve_thread_count(cfg.threads), [&](std::size_t tile) {
    const auto& list = st.tile_lists[tile];
    auto& buf = tile_grads[tile];
    buf.assign(list.size() * kSlots, 0.0);
    const int tx = static_cast<int>(tile % st.tiles_x);
    const int ty = static_cast<int>(tile / st.tiles_x);
    std::vector<Contribution> contribs;
    for (int y = ty * ts; y < std::min(st.height, (ty + 1) * ts); ++y) {
      for (int x = tx * ts; x < std::min(st.width, (tx + 1) * ts); ++x) {
        const Vec3 G(color_grad.at(x, y, 0), color_grad.at(x, y, 1), color_grad.at(x, y, 2));
        if (G.isZero(0.0)) continue;
        const std::size_t p = static_cast<std::size_t>(y) * st.width + x;
        // Replay the forward compositing to recover per-splat transmittance.
        contribs.clear();
        double T = 1.0;
        for (std::uint32_t e = 0; e < st.processed[p]; ++e) {
          const Splat& s = st.splats[list[e]];
          const double dx = x - s.mean.x();
          const double dy = y - s.mean.y();
          const double q = conic_power(s.conic, dx, dy);
          if (q > cutoff2) continue;
          const double g = std::exp(-0.5 * q);
          const double a = s.opacity * g;
          if (a < cfg.min_weight) continue;
          contribs.push_back({e, a, g, T, dx, dy});
          T *= 1.0 - a;
        }
        Vec3 behind = st.background;  // normalised color of everything behind
        for (auto it = contribs.rbegin(); it != contribs.rend(); ++it) {
          const Splat& s = st.splats[list[it->entry]];
          double* gslot = buf.data() + static_cast<std::size_t>(it->entry) * kSlots;
          const double w = it->transmittance * it->alpha;
          gslot[5] += w * G[0];
          gslot[6] += w * G[1];
          gslot[7] += w * G[2];
          const double d_alpha = it->transmittance * G.dot(s.rgb - behind);
          behind = it->alpha * s.rgb + (1.0 - it->alpha) * behind;
          gslot[8] += d_alpha * it->density;
          const double d_density = d_alpha * s.opacity;
          const double d_q = -0.5 * it->density * d_density;
          const double dx = it->dx, dy = it->dy;
          gslot[2] += d_q * dx * dx;
          gslot[3] += d_q * 2.0 * dx * dy;
          gslot[4] += d_q * dy * dy;
          gslot[0] += -2.0 * d_q * (s.conic[0] * dx + s.conic[1] * dy);
          gslot[1] += -2.0 * d_q * (s.conic[1] * dx + s.conic[2] * dy);
        }
      }
    }
  });

  // Merge in fixed tile order.
  std::vector<double> splat_grads(st.splats.size() * kSlots, 0.0);
  for (std::size_t tile = 0; tile < st.tile_lists.size(); ++tile) {
    const auto& list = st.tile_lists[tile];
    for (std::size_t e = 0; e < list.size(); ++e) {
      for (int k = 0; k < kSlots; ++k) {
        splat_grads[list[e] * kSlots + k] += tile_grads[tile][e * kSlots + k];
      }
    }
  }

  SplatGradients out;
  GaussianGradients& gg = out.gaussians;
  const std::size_t n = gaussians.size();
  gg.d_center.assign(n, Vec3::Zero());
  gg.d_quat.assign(n, Vec4::Zero());
  gg.d_log_scale.assign(n, Vec3::Zero());
  gg.d_opacity_logit.assign(n, 0.0);
  gg.d_sh.assign(gaussians.sh.size(), 0.0);

  const CameraIntrinsics& K = st.camera.intrinsics;
  const Mat3& R = st.camera.pose.rotation;
  const Mat3 W = R.transpose();
  const Vec3& eye = st.camera.pose.translation;
  const double f = K.focal();
  CameraGradients& cam = out.camera;
  Mat3 d_W = Mat3::Zero();

  for (std::size_t k = 0; k < st.splats.size(); ++k) {
    const Splat& s = st.splats[k];
    const double* sg = splat_grads.data() + k * kSlots;
    const std::size_t i = s.index;

    const double op = s.opacity;
    gg.d_opacity_logit[i] += sg[8] * op * (1.0 - op);

    const Vec3 offset = gaussians.centers[i] - eye;
    const double dist = offset.norm();
    const Vec3 dir = offset / dist;
    const Vec3 d_dir = eval_sh_backward(gaussians.sh_of(i), dir, gaussians.sh_degree, s.sh,
                                        Vec3(sg[5], sg[6], sg[7]),
                                        std::span<double>(gg.d_sh.data() + i * gaussians.sh_stride(),
                                                          gaussians.sh_stride()));
    const Vec3 d_offset = (d_dir - dir * dir.dot(d_dir)) / dist;

    // conic = inverse(cov2d): dCov = -A dA A with dA the full-matrix gradient.
    Mat2 A;
    A << s.conic[0], s.conic[1], s.conic[1], s.conic[2];
    Mat2 dA;
    dA << sg[2], 0.5 * sg[3], 0.5 * sg[3], sg[4];
    const Mat2 d_cov2 = -A * dA * A;

    const Vec3 p = W * offset;
    const Eigen::Matrix<double, 2, 3> J = projection_jacobian(p, f);
    const Eigen::Matrix<double, 2, 3> M = J * W;
    const Mat3 sigma = build_covariance(gaussians.quats[i], gaussians.log_scales[i]);

    const Mat3 d_sigma = M.transpose() * d_cov2 * M;
    const Eigen::Matrix<double, 2, 3> d_M = 2.0 * d_cov2 * M * sigma;
    const Eigen::Matrix<double, 2, 3> d_J = d_M * W.transpose();
    d_W += J.transpose() * d_M;

    const CovarianceGrad cg =
        build_covariance_backward(gaussians.quats[i], gaussians.log_scales[i], d_sigma);
    gg.d_quat[i] += cg.quat;
    gg.d_log_scale[i] += cg.log_scale;

    const double iz = 1.0 / p.z();
    const double x = p.x(), y = p.y();
    const double gu = sg[0], gv = sg[1];
    Vec3 d_p = Vec3::Zero();
    double d_f = 0.0;
    // mean2d = (f x / z + cx, f y / z + cy)
    d_p.x() += gu * f * iz;
    d_p.y() += gv * f * iz;
    d_p.z() += -(gu * x + gv * y) * f * iz * iz;
    d_f += (gu * x + gv * y) * iz;
    // J entries
    d_p.z() += -(d_J(0, 0) + d_J(1, 1)) * f * iz * iz;
    d_f += (d_J(0, 0) + d_J(1, 1)) * iz;
    d_p.x() += -d_J(0, 2) * f * iz * iz;
    d_p.y() += -d_J(1, 2) * f * iz * iz;
    d_p.z() += 2.0 * (d_J(0, 2) * x + d_J(1, 2) * y) * f * iz * iz * iz;
    d_f += -(d_J(0, 2) * x + d_J(1, 2) * y) * iz * iz;

    // p = W * (mu - eye)
    d_W += d_p * offset.transpose();
    const Vec3 d_mu = W.transpose() * d_p + d_offset;
    gg.d_center[i] += d_mu;
    cam.d_translation -= d_mu;
    cam.d_focal += d_f;
  }
  cam.d_rotation = d_W.transpose();
  return out;
}

}  // namespace splatba
