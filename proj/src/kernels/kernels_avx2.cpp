#include "confattr/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define CONFATTR_AVX2_TARGET __attribute__((target("avx2")))
#define CONFATTR_HAVE_AVX2 1
#else
#define CONFATTR_HAVE_AVX2 0
#endif

namespace confattr::kernels::avx2 {

#if CONFATTR_HAVE_AVX2

CONFATTR_AVX2_TARGET void accumulate_squared_diff(const double* column, double q, double* acc, std::size_t n) {
  const __m256d vq = _mm256_set1_pd(q);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(column + i), vq);
    const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(column + i + 4), vq);
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), _mm256_mul_pd(d0, d0)));
    _mm256_storeu_pd(acc + i + 4, _mm256_add_pd(_mm256_loadu_pd(acc + i + 4), _mm256_mul_pd(d1, d1)));
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(column + i), vq);
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), _mm256_mul_pd(d, d)));
  }
  for (; i < n; ++i) {
    const double d = column[i] - q;
    acc[i] = acc[i] + d * d;
  }
}

CONFATTR_AVX2_TARGET void affine(const double* in, double shift, double scale, double* out, std::size_t n) {
  const __m256d vs = _mm256_set1_pd(shift);
  const __m256d vk = _mm256_set1_pd(scale);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(in + i), vs), vk));
  }
  for (; i < n; ++i) out[i] = (in[i] - shift) * scale;
}

CONFATTR_AVX2_TARGET void subtract(const double* lhs, const double* rhs, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(lhs + i), _mm256_loadu_pd(rhs + i)));
  }
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

}  // namespace confattr::kernels::avx2
