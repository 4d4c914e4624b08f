#include "slicewise/simd.hpp"

#if defined(__aarch64__) || defined(_M_ARM64)
#define SLICEWISE_HAVE_NEON_TU 1
#include <arm_neon.h>
#else
#define SLICEWISE_HAVE_NEON_TU 0
#endif

namespace slicewise::simd {

#if SLICEWISE_HAVE_NEON_TU

namespace {

double dot_f64_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

// Narrow each int64 lane to int32 (exact under the contract) and widen-multiply.
std::int64_t dot_i64_narrow_neon(const std::int64_t* a, const std::int64_t* b, std::size_t n) {
  int64x2_t acc0 = vdupq_n_s64(0);
  int64x2_t acc1 = vdupq_n_s64(0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    int32x2_t a0 = vmovn_s64(vld1q_s64(a + i));
    int32x2_t b0 = vmovn_s64(vld1q_s64(b + i));
    int32x2_t a1 = vmovn_s64(vld1q_s64(a + i + 2));
    int32x2_t b1 = vmovn_s64(vld1q_s64(b + i + 2));
    acc0 = vmlal_s32(acc0, a0, b0);
    acc1 = vmlal_s32(acc1, a1, b1);
  }
  std::int64_t acc = vaddvq_s64(vaddq_s64(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

constexpr KernelTable kNeon{"neon", &dot_f64_neon, &dot_i64_narrow_neon};

}  // namespace

const KernelTable* neon_kernels() { return &kNeon; }

#else

const KernelTable* neon_kernels() { return nullptr; }

#endif

}  // namespace slicewise::simd
