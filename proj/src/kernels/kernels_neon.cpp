#if defined(__aarch64__)
#include <arm_neon.h>

#include <cmath>

#include "splatba/kernels.hpp"

namespace splatba::kernels {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return (vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1)) + tail;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

double squared_error_neon(const double* a, const double* b, double* out, double scale,
                          std::size_t n) {
  const float64x2_t vs = vdupq_n_f64(scale);
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    acc = vaddq_f64(acc, vmulq_f64(d, d));
    vst1q_f64(out + i, vmulq_f64(vs, d));
  }
  double tail = 0.0;
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    tail += d * d;
    out[i] = scale * d;
  }
  return (vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1)) + tail;
}

void adam_neon(double* p, const double* g, double* m, double* v, const AdamStep& s,
               std::size_t n) {
  const double c1 = 1.0 - s.beta1;
  const double c2 = 1.0 - s.beta2;
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t gi = vld1q_f64(g + i);
    const float64x2_t mi = vaddq_f64(vmulq_n_f64(vld1q_f64(m + i), s.beta1), vmulq_n_f64(gi, c1));
    const float64x2_t vi =
        vaddq_f64(vmulq_n_f64(vld1q_f64(v + i), s.beta2), vmulq_n_f64(vmulq_f64(gi, gi), c2));
    vst1q_f64(m + i, mi);
    vst1q_f64(v + i, vi);
    const float64x2_t mhat = vdivq_f64(mi, vdupq_n_f64(s.bias1));
    const float64x2_t vhat = vdivq_f64(vi, vdupq_n_f64(s.bias2));
    const float64x2_t step =
        vdivq_f64(vmulq_n_f64(mhat, s.lr), vaddq_f64(vsqrtq_f64(vhat), vdupq_n_f64(s.eps)));
    vst1q_f64(p + i, vsubq_f64(vld1q_f64(p + i), step));
  }
  for (; i < n; ++i) {
    m[i] = s.beta1 * m[i] + c1 * g[i];
    v[i] = s.beta2 * v[i] + c2 * (g[i] * g[i]);
    const double mhat = m[i] / s.bias1;
    const double vhat = v[i] / s.bias2;
    p[i] = p[i] - s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

void correlate_neon(const double* in, const double* taps, std::size_t n_taps, double* out,
                    std::size_t n_out) {
  std::size_t i = 0;
  for (; i + 2 <= n_out; i += 2) {
    float64x2_t acc = vdupq_n_f64(0.0);
    for (std::size_t k = 0; k < n_taps; ++k) {
      acc = vaddq_f64(acc, vmulq_n_f64(vld1q_f64(in + i + k), taps[k]));
    }
    vst1q_f64(out + i, acc);
  }
  for (; i < n_out; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n_taps; ++k) acc += taps[k] * in[i + k];
    out[i] = acc;
  }
}

}  // namespace

namespace detail {
const KernelTable kNeonTable{Isa::kNeon, dot_neon,  axpy_neon, squared_error_neon,
                             adam_neon,  correlate_neon};
}  // namespace detail

}  // namespace splatba::kernels
#endif
