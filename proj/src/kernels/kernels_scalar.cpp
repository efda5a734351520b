#include <cmath>

#include "splatba/kernels.hpp"

namespace splatba::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

double squared_error_scalar(const double* a, const double* b, double* out, double scale,
                            std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
    out[i] = scale * d;
  }
  return acc;
}

void adam_scalar(double* p, const double* g, double* m, double* v, const AdamStep& s,
                 std::size_t n) {
  const double c1 = 1.0 - s.beta1;
  const double c2 = 1.0 - s.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = s.beta1 * m[i] + c1 * g[i];
    v[i] = s.beta2 * v[i] + c2 * (g[i] * g[i]);
    const double mhat = m[i] / s.bias1;
    const double vhat = v[i] / s.bias2;
    p[i] = p[i] - s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

void correlate_scalar(const double* in, const double* taps, std::size_t n_taps, double* out,
                      std::size_t n_out) {
  for (std::size_t i = 0; i < n_out; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n_taps; ++k) acc += taps[k] * in[i + k];
    out[i] = acc;
  }
}

}  // namespace

namespace detail {
const KernelTable kScalarTable{Isa::kScalar,  dot_scalar,  axpy_scalar, squared_error_scalar,
                               adam_scalar, correlate_scalar};
}  // namespace detail

}  // namespace splatba::kernels
