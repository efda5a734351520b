#include "splatba/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "splatba/errors.hpp"
#include "splatba/kernels.hpp"

namespace splatba {

namespace {

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) throw ArgumentError(std::string(what) + ": image shapes differ");
}

// Row-major plane of one channel.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> v;

  Plane(int w, int h) : width(w), height(h), v(static_cast<std::size_t>(w) * h, 0.0) {}
  double* row(int y) { return v.data() + static_cast<std::size_t>(y) * width; }
  const double* row(int y) const { return v.data() + static_cast<std::size_t>(y) * width; }
};

Plane channel_plane(const Image& img, int c) {
  Plane p(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) p.row(y)[x] = img.at(x, y, c);
  return p;
}

// Separable "valid" filtering with a symmetric window.
Plane filter_valid(const Plane& in, const std::vector<double>& taps) {
  const int n = static_cast<int>(taps.size());
  const int ow = in.width - n + 1;
  const int oh = in.height - n + 1;
  const auto& k = kernels::active();
  Plane horiz(ow, in.height);
  for (int y = 0; y < in.height; ++y) k.correlate_valid(in.row(y), taps.data(), n, horiz.row(y), ow);
  Plane out(ow, oh);
  for (int y = 0; y < oh; ++y)
    for (int t = 0; t < n; ++t) k.axpy(taps[t], horiz.row(y + t), out.row(y), ow);
  return out;
}

// Adjoint of filter_valid: scatters a valid-grid map back onto the full grid.
Plane spread_full(const Plane& in, const std::vector<double>& taps, int width, int height) {
  const int n = static_cast<int>(taps.size());
  const auto& k = kernels::active();
  Plane vert(in.width, height);
  for (int y = 0; y < in.height; ++y)
    for (int t = 0; t < n; ++t) k.axpy(taps[t], in.row(y), vert.row(y + t), in.width);
  Plane out(width, height);
  for (int y = 0; y < height; ++y)
    for (int t = 0; t < n; ++t) k.axpy(taps[t], vert.row(y), out.row(y) + t, in.width);
  return out;
}

Plane product(const Plane& a, const Plane& b) {
  Plane p(a.width, a.height);
  for (std::size_t i = 0; i < p.v.size(); ++i) p.v[i] = a.v[i] * b.v[i];
  return p;
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  require_same_shape(a, b, "psnr");
  if (a.data.empty()) throw ArgumentError("psnr: empty images");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  if (acc == 0.0) return kPsnrExact;
  return -10.0 * std::log10(acc / static_cast<double>(a.data.size()));
}

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(size);
  const double mid = 0.5 * (size - 1);
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    w[i] = std::exp(-(i - mid) * (i - mid) / (2.0 * sigma * sigma));
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

SsimWithGrad ssim_with_grad(const Image& a, const Image& b, const SsimConfig& cfg) {
  require_same_shape(a, b, "ssim");
  if (a.width < cfg.window || a.height < cfg.window) {
    throw ArgumentError("ssim: image smaller than the window");
  }
  const std::vector<double> taps = gaussian_window(cfg.window, cfg.sigma);
  const double c1 = (cfg.k1 * cfg.dynamic_range) * (cfg.k1 * cfg.dynamic_range);
  const double c2 = (cfg.k2 * cfg.dynamic_range) * (cfg.k2 * cfg.dynamic_range);
  const int vw = a.width - cfg.window + 1;
  const int vh = a.height - cfg.window + 1;
  const double norm = 1.0 / (static_cast<double>(vw) * vh * a.channels);

  SsimWithGrad out;
  out.grad = Image(a.width, a.height, a.channels);
  double total = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    const Plane pa = channel_plane(a, c);
    const Plane pb = channel_plane(b, c);
    const Plane mu_a = filter_valid(pa, taps);
    const Plane mu_b = filter_valid(pb, taps);
    const Plane e_aa = filter_valid(product(pa, pa), taps);
    const Plane e_bb = filter_valid(product(pb, pb), taps);
    const Plane e_ab = filter_valid(product(pa, pb), taps);

    // Per-position sensitivities to mu_a, E[a^2] and E[ab].
    Plane d_mu(vw, vh), d_aa(vw, vh), d_ab(vw, vh);
    for (std::size_t i = 0; i < mu_a.v.size(); ++i) {
      const double ma = mu_a.v[i], mb = mu_b.v[i];
      const double var_a = e_aa.v[i] - ma * ma;
      const double var_b = e_bb.v[i] - mb * mb;
      const double cov = e_ab.v[i] - ma * mb;
      const double n1 = 2.0 * ma * mb + c1;
      const double n2 = 2.0 * cov + c2;
      const double m1 = ma * ma + mb * mb + c1;
      const double m2 = var_a + var_b + c2;
      const double s = (n1 * n2) / (m1 * m2);
      total += s;
      d_mu.v[i] = s * (2.0 * mb / n1 - 2.0 * mb / n2 - 2.0 * ma / m1 + 2.0 * ma / m2) * norm;
      d_aa.v[i] = -s / m2 * norm;
      d_ab.v[i] = 2.0 * s / n2 * norm;
    }
    const Plane g_mu = spread_full(d_mu, taps, a.width, a.height);
    const Plane g_aa = spread_full(d_aa, taps, a.width, a.height);
    const Plane g_ab = spread_full(d_ab, taps, a.width, a.height);
    for (int y = 0; y < a.height; ++y) {
      for (int x = 0; x < a.width; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * a.width + x;
        out.grad.at(x, y, c) = g_mu.v[i] + 2.0 * pa.v[i] * g_aa.v[i] + pb.v[i] * g_ab.v[i];
      }
    }
  }
  out.value = total * norm;
  return out;
}

double ssim(const Image& a, const Image& b, const SsimConfig& cfg) {
  return ssim_with_grad(a, b, cfg).value;
}

PoseErrorSample PoseErrorSample::from(const PoseAngularError& e) {
  return {e.rot_deg, e.trans_deg, std::max(e.rot_deg, e.trans_deg)};
}

std::vector<double> pose_auc(std::span<const PoseErrorSample> samples,
                             std::span<const double> thresholds_deg) {
  if (samples.empty()) throw ArgumentError("pose_auc: no samples");
  std::vector<double> errors;
  errors.reserve(samples.size());
  for (const auto& s : samples) errors.push_back(s.overall_deg);
  std::sort(errors.begin(), errors.end());
  std::vector<double> out;
  for (double t : thresholds_deg) {
    if (!(t > 0.0)) throw ArgumentError("pose_auc: thresholds must be positive");
    // Integral of the recall step function over [0, t]: each sample with error
    // e < t contributes (t - e) / n.
    double area = 0.0;
    for (double e : errors) {
      if (e >= t) break;
      area += t - e;
    }
    out.push_back(area / (static_cast<double>(errors.size()) * t));
  }
  return out;
}

std::vector<PoseErrorSample> relative_pose_errors(std::span<const CameraPose> pred,
                                                  std::span<const CameraPose> gt) {
  if (pred.size() != gt.size()) throw ArgumentError("relative_pose_errors: count mismatch");
  std::vector<PoseErrorSample> out;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = i + 1; j < pred.size(); ++j) {
      const CameraPose rp = pred[i].inverse() * pred[j];
      const CameraPose rg = gt[i].inverse() * gt[j];
      out.push_back(PoseErrorSample::from(pose_angular_errors(rp, rg)));
    }
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ArgumentError("median: no values");
  const std::size_t n = values.size();
  const std::size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

DepthMetrics depth_metrics(const Image& pred, const Image& gt,
                           std::span<const std::uint8_t> valid, bool align) {
  require_same_shape(pred, gt, "depth_metrics");
  if (pred.channels != 1) throw ArgumentError("depth_metrics: expected single-channel depth");
  if (!valid.empty() && valid.size() != gt.data.size()) {
    throw ArgumentError("depth_metrics: mask size mismatch");
  }
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    const bool use = valid.empty() ? gt.data[i] > 0.0 : valid[i] != 0;
    if (!use) continue;
    if (!(gt.data[i] > 0.0)) throw ArgumentError("depth_metrics: gt must be positive on valid pixels");
    idx.push_back(i);
  }
  if (idx.empty()) throw ArgumentError("depth_metrics: empty valid mask");

  DepthMetrics m;
  if (align) {
    std::vector<double> p, g;
    for (std::size_t i : idx) {
      p.push_back(pred.data[i]);
      g.push_back(gt.data[i]);
    }
    const double mp = median(p);
    if (!(mp > 0.0)) throw ArgumentError("depth_metrics: non-positive median prediction");
    m.scale = median(g) / mp;
  }
  double rel = 0.0;
  std::size_t inliers = 0;
  for (std::size_t i : idx) {
    const double p = pred.data[i] * m.scale;
    const double g = gt.data[i];
    rel += std::abs(p - g) / g;
    if (std::max(p / g, g / p) < 1.25) ++inliers;
  }
  m.rel = rel / static_cast<double>(idx.size());
  m.tau = static_cast<double>(inliers) / static_cast<double>(idx.size());
  return m;
}

}  // namespace splatba
