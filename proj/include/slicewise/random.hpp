#pragma once

#include <cstdint>

#include "slicewise/model.hpp"
#include "slicewise/tensor.hpp"

namespace slicewise {

/// SplitMix64. Portable across standard libraries, unlike <random> distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();
  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

// Elements uniform in [lo, hi], rounded to binary32 so the tensor survives the
// f32 model and input formats bit-exactly.
FloatTensor random_tensor(const Shape& shape, double lo, double hi, Rng& rng);

// Input i of the batch drawn with the given seed: 3x32x32 (or shape) uniform in [0, 1].
FloatTensor random_input(const Shape& shape, std::uint64_t seed, std::size_t index);

// LeNet-5 for 3x32x32 inputs with explicit flatten (12 layers). Each weight
// and bias is uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
ModelGraph random_lenet(std::uint64_t seed);

}  // namespace slicewise
