#include "confattr/kernels.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>
#define CONFATTR_HAVE_NEON 1
#else
#define CONFATTR_HAVE_NEON 0
#endif

namespace confattr::kernels::neon {

#if CONFATTR_HAVE_NEON

void accumulate_squared_diff(const double* column, double q, double* acc, std::size_t n) {
  const float64x2_t vq = vdupq_n_f64(q);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vsubq_f64(vld1q_f64(column + i), vq);
    // vmulq + vaddq rather than vfmaq to match the scalar rounding.
    vst1q_f64(acc + i, vaddq_f64(vld1q_f64(acc + i), vmulq_f64(d, d)));
  }
  for (; i < n; ++i) {
    const double d = column[i] - q;
    acc[i] = acc[i] + d * d;
  }
}

void affine(const double* in, double shift, double scale, double* out, std::size_t n) {
  const float64x2_t vs = vdupq_n_f64(shift);
  const float64x2_t vk = vdupq_n_f64(scale);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_f64(vsubq_f64(vld1q_f64(in + i), vs), vk));
  for (; i < n; ++i) out[i] = (in[i] - shift) * scale;
}

void subtract(const double* lhs, const double* rhs, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vsubq_f64(vld1q_f64(lhs + i), vld1q_f64(rhs + i)));
  for (; i < n; ++i) out[i] = lhs[i] - rhs[i];
}

#else

void accumulate_squared_diff(const double* column, double q, double* acc, std::size_t n) {
  scalar::accumulate_squared_diff(column, q, acc, n);
}
void affine(const double* in, double shift, double scale, double* out, std::size_t n) {
  scalar::affine(in, shift, scale, out, n);
}
void subtract(const double* lhs, const double* rhs, double* out, std::size_t n) { scalar::subtract(lhs, rhs, out, n); }

#endif

}  // namespace confattr::kernels::neon
