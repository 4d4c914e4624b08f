#include "slicewise/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "slicewise/error.hpp"
#include "slicewise/simd.hpp"

namespace slicewise::ops {

namespace {

constexpr __int128 kNarrowLimit = __int128{1} << 31;
constexpr __int128 kAccLimit = __int128{1} << 62;
// Partial sums on the wide path stay far inside the 128-bit range.
constexpr __int128 kWideLimit = __int128{1} << 125;

struct ConvGeometry {
  std::size_t channels, height, width, out_channels, kernel, stride, out_h, out_w;
};

ConvGeometry conv_geometry(const Shape& in, const Shape& w, const Shape& b, std::size_t stride) {
  if (in.size() != 3) throw ShapeError("conv2d expects input [C,H,W], got " + shape_string(in));
  if (w.size() != 4 || w[2] != w[3])
    throw ShapeError("conv2d expects weights [O,C,k,k], got " + shape_string(w));
  if (b.size() != 1 || b[0] != w[0])
    throw ShapeError("conv2d bias " + shape_string(b) + " does not match weights " + shape_string(w));
  if (w[1] != in[0])
    throw ShapeError("conv2d channel mismatch: input " + shape_string(in) + ", weights " +
                     shape_string(w));
  if (stride == 0) throw ShapeError("conv2d stride must be positive");
  std::size_t k = w[2];
  if (in[1] < k || in[2] < k)
    throw ShapeError("conv2d input " + shape_string(in) + " smaller than kernel " + std::to_string(k));
  return {in[0], in[1], in[2], w[0], k, stride, (in[1] - k) / stride + 1, (in[2] - k) / stride + 1};
}

void check_linear(const Shape& in, const Shape& w, const Shape& b) {
  if (in.size() != 1) throw ShapeError("linear expects a vector input, got " + shape_string(in));
  if (w.size() != 2 || w[1] != in[0])
    throw ShapeError("linear weights " + shape_string(w) + " do not match input " + shape_string(in));
  if (b.size() != 1 || b[0] != w[0])
    throw ShapeError("linear bias " + shape_string(b) + " does not match weights " + shape_string(w));
}

void check_field_scales(const FieldTensor& in, const FieldTensor& w, const FieldTensor& b,
                        const char* layer) {
  if (in.scale_bits() != w.scale_bits())
    throw ValidationError(std::string(layer) + ": input scale " + std::to_string(in.scale_bits()) +
                          " differs from weight scale " + std::to_string(w.scale_bits()));
  if (b.scale_bits() != 2 * w.scale_bits())
    throw ValidationError(std::string(layer) + ": bias scale must be twice the weight scale");
}

// Decides once per layer whether the narrow SIMD contraction is exact.
bool narrow_ok(std::int64_t max_in, std::int64_t max_w, std::size_t n) {
  if (max_in >= kNarrowLimit || max_w >= kNarrowLimit) return false;
  return static_cast<__int128>(n) * max_in * max_w < kAccLimit;
}

__int128 dot_wide(const std::int64_t* a, const std::int64_t* b, std::size_t n, const char* layer) {
  __int128 acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += static_cast<__int128>(a[i]) * b[i];
    if (acc >= kWideLimit || acc <= -kWideLimit)
      throw OverflowError(std::string(layer) + ": accumulator overflow");
  }
  return acc;
}

std::int64_t finish_accumulator(__int128 acc, std::int64_t bias, int shift, const char* layer) {
  acc += bias;
  if (acc >= kAccLimit || acc <= -kAccLimit)
    throw OverflowError(std::string(layer) + ": accumulator magnitude reaches 2^62");
  return round_shift(acc, shift);
}

void check_pool(const Shape& s, std::size_t window) {
  if (s.size() != 3) throw ShapeError("maxpool2d expects input [C,H,W], got " + shape_string(s));
  if (window == 0) throw ShapeError("maxpool2d window must be positive");
  if (s[1] % window != 0 || s[2] % window != 0)
    throw ShapeError("maxpool2d input " + shape_string(s) + " not divisible by window " +
                     std::to_string(window));
}

template <class T>
std::vector<T> pool(std::span<const T> in, const Shape& s, std::size_t window) {
  std::size_t oh = s[1] / window, ow = s[2] / window;
  std::vector<T> out(s[0] * oh * ow);
  for (std::size_t c = 0; c < s[0]; ++c) {
    const T* plane = in.data() + c * s[1] * s[2];
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        T m = plane[(y * window) * s[2] + x * window];
        for (std::size_t dy = 0; dy < window; ++dy)
          for (std::size_t dx = 0; dx < window; ++dx)
            m = std::max(m, plane[(y * window + dy) * s[2] + x * window + dx]);
        out[(c * oh + y) * ow + x] = m;
      }
    }
  }
  return out;
}

// Copies the receptive field of output pixel (oy, ox) in [C,k,k] order so it
// lines up with one weight row.
template <class T>
void gather_patch(std::span<const T> in, const ConvGeometry& g, std::size_t oy, std::size_t ox,
                  T* patch) {
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      const T* row = in.data() + (c * g.height + oy * g.stride + ky) * g.width + ox * g.stride;
      std::copy(row, row + g.kernel, patch);
      patch += g.kernel;
    }
  }
}

}  // namespace

std::int64_t round_shift(__int128 value, int shift) {
  if (shift <= 0) return static_cast<std::int64_t>(value);
  __int128 half = __int128{1} << (shift - 1);
  if (value >= 0) return static_cast<std::int64_t>((value + half) >> shift);
  return -static_cast<std::int64_t>((-value + half) >> shift);
}

FloatTensor conv2d(const FloatTensor& input, const FloatTensor& weights, const FloatTensor& bias,
                   std::size_t stride) {
  ConvGeometry g = conv_geometry(input.shape(), weights.shape(), bias.shape(), stride);
  const auto& k = simd::active();
  std::size_t patch_len = g.channels * g.kernel * g.kernel;
  std::vector<double> patch(patch_len);
  std::vector<double> out(g.out_channels * g.out_h * g.out_w);
  std::size_t plane = g.out_h * g.out_w;
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      gather_patch(input.data(), g, oy, ox, patch.data());
      for (std::size_t o = 0; o < g.out_channels; ++o) {
        double acc = k.dot_f64(patch.data(), weights.data().data() + o * patch_len, patch_len);
        out[o * plane + oy * g.out_w + ox] = acc + bias[o];
      }
    }
  }
  return FloatTensor({g.out_channels, g.out_h, g.out_w}, std::move(out));
}

FieldTensor conv2d(const FieldTensor& input, const FieldTensor& weights, const FieldTensor& bias,
                   std::size_t stride) {
  ConvGeometry g = conv_geometry(input.shape(), weights.shape(), bias.shape(), stride);
  check_field_scales(input, weights, bias, "conv2d");
  std::size_t patch_len = g.channels * g.kernel * g.kernel;
  bool narrow = narrow_ok(input.max_abs(), weights.max_abs(), patch_len);
  const auto& k = simd::active();
  int shift = input.scale_bits();
  std::vector<std::int64_t> patch(patch_len);
  std::vector<std::int64_t> out(g.out_channels * g.out_h * g.out_w);
  std::size_t plane = g.out_h * g.out_w;
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      gather_patch(input.data(), g, oy, ox, patch.data());
      for (std::size_t o = 0; o < g.out_channels; ++o) {
        const std::int64_t* row = weights.data().data() + o * patch_len;
        __int128 acc = narrow ? __int128{k.dot_i64_narrow(patch.data(), row, patch_len)}
                              : dot_wide(patch.data(), row, patch_len, "conv2d");
        out[o * plane + oy * g.out_w + ox] = finish_accumulator(acc, bias[o], shift, "conv2d");
      }
    }
  }
  return FieldTensor({g.out_channels, g.out_h, g.out_w}, std::move(out), shift);
}

FloatTensor relu(const FloatTensor& input) {
  std::vector<double> out(input.data().begin(), input.data().end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return FloatTensor(input.shape(), std::move(out));
}

FieldTensor relu(const FieldTensor& input) {
  std::vector<std::int64_t> out(input.data().begin(), input.data().end());
  for (std::int64_t& v : out) v = v > 0 ? v : 0;
  return FieldTensor(input.shape(), std::move(out), input.scale_bits());
}

FloatTensor maxpool2d(const FloatTensor& input, std::size_t window) {
  check_pool(input.shape(), window);
  const Shape& s = input.shape();
  return FloatTensor({s[0], s[1] / window, s[2] / window}, pool(input.data(), s, window));
}

FieldTensor maxpool2d(const FieldTensor& input, std::size_t window) {
  check_pool(input.shape(), window);
  const Shape& s = input.shape();
  return FieldTensor({s[0], s[1] / window, s[2] / window}, pool(input.data(), s, window),
                     input.scale_bits());
}

FloatTensor flatten(const FloatTensor& input) { return input.reshaped({input.size()}); }
FieldTensor flatten(const FieldTensor& input) { return input.reshaped({input.size()}); }

FloatTensor linear(const FloatTensor& input, const FloatTensor& weights, const FloatTensor& bias) {
  check_linear(input.shape(), weights.shape(), bias.shape());
  const auto& k = simd::active();
  std::size_t n = input.size(), m = weights.shape()[0];
  std::vector<double> out(m);
  for (std::size_t o = 0; o < m; ++o)
    out[o] = k.dot_f64(input.data().data(), weights.data().data() + o * n, n) + bias[o];
  return FloatTensor({m}, std::move(out));
}

FieldTensor linear(const FieldTensor& input, const FieldTensor& weights, const FieldTensor& bias) {
  check_linear(input.shape(), weights.shape(), bias.shape());
  check_field_scales(input, weights, bias, "linear");
  std::size_t n = input.size(), m = weights.shape()[0];
  bool narrow = narrow_ok(input.max_abs(), weights.max_abs(), n);
  const auto& k = simd::active();
  std::vector<std::int64_t> out(m);
  for (std::size_t o = 0; o < m; ++o) {
    const std::int64_t* row = weights.data().data() + o * n;
    __int128 acc = narrow ? __int128{k.dot_i64_narrow(input.data().data(), row, n)}
                          : dot_wide(input.data().data(), row, n, "linear");
    out[o] = finish_accumulator(acc, bias[o], input.scale_bits(), "linear");
  }
  return FieldTensor({m}, std::move(out), input.scale_bits());
}

FloatTensor softmax(const FloatTensor& logits) {
  if (logits.rank() != 1) throw ShapeError("softmax expects a vector, got " + shape_string(logits.shape()));
  double hi = *std::max_element(logits.data().begin(), logits.data().end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(logits[i] - hi);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return FloatTensor(logits.shape(), std::move(out));
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ShapeError("argmax of an empty vector");
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

std::size_t argmax(std::span<const std::int64_t> values) {
  if (values.empty()) throw ShapeError("argmax of an empty vector");
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace slicewise::ops
