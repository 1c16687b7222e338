#pragma once

#include <span>
#include <string_view>

// Data-parallel inner loops used by the regression backends. Every variant
// performs the same per-element operation sequence as the scalar reference
// (no FMA, no cross-lane reassociation), so all variants agree bit-for-bit.

namespace confattr::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view to_string(Isa isa);

/// ISA the dispatcher currently routes to. Chosen on first use from CPU
/// support, overridable with CONFATTR_SIMD=scalar|avx2|neon.
Isa active_isa();
/// True when `isa` can run on this machine.
bool isa_supported(Isa isa);
/// Forces a variant; returns false (and changes nothing) if unsupported.
bool set_isa(Isa isa);

/// acc[i] += (column[i] - q)^2
void accumulate_squared_diff(std::span<const double> column, double q, std::span<double> acc);
/// out[i] = (in[i] - shift) * scale
void affine(std::span<const double> in, double shift, double scale, std::span<double> out);
/// out[i] = lhs[i] - rhs[i]
void subtract(std::span<const double> lhs, std::span<const double> rhs, std::span<double> out);

namespace scalar {
void accumulate_squared_diff(const double* column, double q, double* acc, std::size_t n);
void affine(const double* in, double shift, double scale, double* out, std::size_t n);
void subtract(const double* lhs, const double* rhs, double* out, std::size_t n);
}  // namespace scalar

namespace avx2 {
void accumulate_squared_diff(const double* column, double q, double* acc, std::size_t n);
void affine(const double* in, double shift, double scale, double* out, std::size_t n);
void subtract(const double* lhs, const double* rhs, double* out, std::size_t n);
}  // namespace avx2

namespace neon {
void accumulate_squared_diff(const double* column, double q, double* acc, std::size_t n);
void affine(const double* in, double shift, double scale, double* out, std::size_t n);
void subtract(const double* lhs, const double* rhs, double* out, std::size_t n);
}  // namespace neon

}  // namespace confattr::kernels
