#pragma once

#include <span>

// Dense array kernels with a scalar reference implementation and SIMD
// variants (AVX2 on x86-64, NEON on AArch64) picked once at runtime.
//
// Elementwise kernels (adam_update, axpy, correlate_valid, and the gradient
// written by squared_error) are bit-identical across variants: each output
// element sees the same IEEE operations in the same order. Reductions (dot and
// the squared_error sum) use lane-wise partial sums and agree with the scalar
// path to rounding.

namespace splatba::kernels {

enum class Isa { kScalar, kAvx2, kNeon };

const char* isa_name(Isa isa);
/// True when the variant is compiled in and the CPU supports it.
bool isa_available(Isa isa);

struct AdamStep {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double bias1 = 1.0;  // 1 - beta1^t
  double bias2 = 1.0;  // 1 - beta2^t
};

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// out[i] = scale * (a[i] - b[i]); returns sum (a[i] - b[i])^2.
  double (*squared_error)(const double* a, const double* b, double* out, double scale,
                          std::size_t n);
  void (*adam_update)(double* param, const double* grad, double* m, double* v,
                      const AdamStep& step, std::size_t n);
  /// out[i] = sum_k taps[k] * in[i + k] for i < n_out ("valid" correlation).
  void (*correlate_valid)(const double* in, const double* taps, std::size_t n_taps, double* out,
                          std::size_t n_out);
};

/// Table of one variant; throws ArgumentError when unavailable.
const KernelTable& table(Isa isa);
/// Best available variant, overridable with SPLATBA_SIMD=scalar|avx2|neon.
const KernelTable& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline double squared_error(std::span<const double> a, std::span<const double> b,
                            std::span<double> grad_out, double grad_scale) {
  return active().squared_error(a.data(), b.data(), grad_out.data(), grad_scale, a.size());
}
inline void adam_update(std::span<double> param, std::span<const double> grad,
                        std::span<double> m, std::span<double> v, const AdamStep& step) {
  active().adam_update(param.data(), grad.data(), m.data(), v.data(), step, param.size());
}
inline void correlate_valid(std::span<const double> in, std::span<const double> taps,
                            std::span<double> out) {
  active().correlate_valid(in.data(), taps.data(), taps.size(), out.data(), out.size());
}

namespace detail {
extern const KernelTable kScalarTable;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable kAvx2Table;
#endif
#if defined(__aarch64__)
extern const KernelTable kNeonTable;
#endif
}  // namespace detail

}  // namespace splatba::kernels
