#pragma once

// Forward kernels for every layer kind, in real and fixed-point arithmetic.
//
// Fixed-point contract for conv2d and linear: input and weights share scale f,
// bias is at scale 2f. Products accumulate exactly at scale 2f, the bias is
// added, and the sum is rescaled to f with round-half-away-from-zero. An
// accumulator whose magnitude reaches 2^62 is a hard OverflowError.

#include <cstddef>
#include <cstdint>
#include <span>

#include "slicewise/tensor.hpp"

namespace slicewise::ops {

// input [C,H,W], weights [O,C,k,k], bias [O] -> [O,(H-k)/stride+1,(W-k)/stride+1]
FloatTensor conv2d(const FloatTensor& input, const FloatTensor& weights, const FloatTensor& bias,
                   std::size_t stride);
FieldTensor conv2d(const FieldTensor& input, const FieldTensor& weights, const FieldTensor& bias,
                   std::size_t stride);

FloatTensor relu(const FloatTensor& input);
FieldTensor relu(const FieldTensor& input);

// Non-overlapping window x window max pooling over [C,H,W]; H and W must be
// multiples of the window.
FloatTensor maxpool2d(const FloatTensor& input, std::size_t window = 2);
FieldTensor maxpool2d(const FieldTensor& input, std::size_t window = 2);

FloatTensor flatten(const FloatTensor& input);
FieldTensor flatten(const FieldTensor& input);

// input [n], weights [m,n], bias [m] -> [m]
FloatTensor linear(const FloatTensor& input, const FloatTensor& weights, const FloatTensor& bias);
FieldTensor linear(const FieldTensor& input, const FieldTensor& weights, const FieldTensor& bias);

// Max-subtracted softmax over a rank-1 tensor.
FloatTensor softmax(const FloatTensor& logits);

// Smallest index attaining the maximum. Precondition: non-empty.
std::size_t argmax(std::span<const double> values);
std::size_t argmax(std::span<const std::int64_t> values);

// value / 2^shift rounded half away from zero; shift == 0 is the identity.
std::int64_t round_shift(__int128 value, int shift);

}  // namespace slicewise::ops
