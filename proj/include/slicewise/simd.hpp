#pragma once

// Data-parallel inner loops behind the layer kernels. Every variant computes
// the same contraction; the scalar table is the reference the others are
// equivalence-tested against.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace slicewise::simd {

struct KernelTable {
  std::string_view name;

  // Sum of a[i] * b[i]. Variants may reassociate, so results agree with the
  // scalar reference only to rounding.
  double (*dot_f64)(const double* a, const double* b, std::size_t n);

  // Exact integer dot product. Caller guarantees |a[i]|, |b[i]| < 2^31 and
  // n * max|a| * max|b| < 2^62, so no lane can overflow and every variant
  // returns the identical value.
  std::int64_t (*dot_i64_narrow)(const std::int64_t* a, const std::int64_t* b, std::size_t n);
};

const KernelTable& scalar_kernels();

// nullptr when the variant is not compiled in or the CPU lacks the extension.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

// Names of every variant usable on this machine, scalar first.
std::vector<std::string_view> available_variants();

// Active table. Initialised once from SLICEWISE_KERNELS (scalar|avx2|neon) if
// set, otherwise the widest supported variant.
const KernelTable& active();

// Throws slicewise::ValidationError if the variant is unavailable.
void select_variant(std::string_view name);

}  // namespace slicewise::simd
