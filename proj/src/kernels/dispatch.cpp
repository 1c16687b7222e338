#include <atomic>
#include <cstdlib>
#include <string>

#include "confattr/error.hpp"
#include "confattr/kernels.hpp"

namespace confattr::kernels {

namespace {

using SqDiffFn = void (*)(const double*, double, double*, std::size_t);
using AffineFn = void (*)(const double*, double, double, double*, std::size_t);
using SubFn = void (*)(const double*, const double*, double*, std::size_t);

struct Table {
  Isa isa;
  SqDiffFn sq_diff;
  AffineFn affine;
  SubFn subtract;
};

constexpr Table kScalar{Isa::Scalar, scalar::accumulate_squared_diff, scalar::affine, scalar::subtract};
constexpr Table kAvx2{Isa::Avx2, avx2::accumulate_squared_diff, avx2::affine, avx2::subtract};
constexpr Table kNeon{Isa::Neon, neon::accumulate_squared_diff, neon::affine, neon::subtract};

const Table* table_for(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return &kScalar;
    case Isa::Avx2: return &kAvx2;
    case Isa::Neon: return &kNeon;
  }
  return &kScalar;
}

const Table* detect() {
#ifdef CONFATTR_NO_SIMD
  return &kScalar;
#endif
  if (const char* env = std::getenv("CONFATTR_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return &kScalar;
    if (want == "avx2" && isa_supported(Isa::Avx2)) return &kAvx2;
    if (want == "neon" && isa_supported(Isa::Neon)) return &kNeon;
  }
  if (isa_supported(Isa::Avx2)) return &kAvx2;
  if (isa_supported(Isa::Neon)) return &kNeon;
  return &kScalar;
}

std::atomic<const Table*>& active() {
  static std::atomic<const Table*> table{detect()};
  return table;
}

void check_sizes(std::size_t a, std::size_t b) {
  if (a != b) throw Error(ErrorCode::LengthMismatch, "kernel operand lengths differ");
}

}  // namespace

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "scalar";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() { return active().load()->isa; }

bool set_isa(Isa isa) {
  if (!isa_supported(isa)) return false;
  active().store(table_for(isa));
  return true;
}

void accumulate_squared_diff(std::span<const double> column, double q, std::span<double> acc) {
  check_sizes(column.size(), acc.size());
  active().load()->sq_diff(column.data(), q, acc.data(), acc.size());
}

void affine(std::span<const double> in, double shift, double scale, std::span<double> out) {
  check_sizes(in.size(), out.size());
  active().load()->affine(in.data(), shift, scale, out.data(), out.size());
}

void subtract(std::span<const double> lhs, std::span<const double> rhs, std::span<double> out) {
  check_sizes(lhs.size(), rhs.size());
  check_sizes(lhs.size(), out.size());
  active().load()->subtract(lhs.data(), rhs.data(), out.data(), out.size());
}

}  // namespace confattr::kernels
