#include "confattr/kernels.hpp"

namespace confattr::kernels::scalar {

void accumulate_squared_diff(const double* column, double q, double* acc, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double d = column[i] - q;
    acc[i] = acc[i] + d * d;
  }
}

void affine(const double* in, double shift, double scale, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = (in[i] - shift) * scale;
}

void subtract(const double* lhs, const double* rhs, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = lhs[i] - rhs[i];
}

}  // namespace confattr::kernels::scalar
