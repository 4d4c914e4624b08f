#include "slicewise/simd.hpp"

namespace slicewise::simd {

namespace {

double dot_f64_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

std::int64_t dot_i64_narrow_scalar(const std::int64_t* a, const std::int64_t* b, std::size_t n) {
  std::int64_t acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

constexpr KernelTable kScalar{"scalar", &dot_f64_scalar, &dot_i64_narrow_scalar};

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

}  // namespace slicewise::simd
