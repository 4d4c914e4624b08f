#pragma once

// Fixed-point ("circuit-adapted") form of a slice and the witness produced by
// executing it.
//
// Witness record (little-endian, no padding):
//   magic "SWWT" | u32 version | u64 body length | body
//   body = u32 slice_id | 32B circuit digest | u32 scale_bits | u32 input_scale_bits
//          | tensor input | u32 trace count | tensor trace... | tensor output
//   tensor = u32 rank | u64 dims[rank] | i64 values[prod(dims)]

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "slicewise/digest.hpp"
#include "slicewise/model.hpp"
#include "slicewise/tensor.hpp"

namespace slicewise {

inline constexpr int kMinScaleBits = 4;
inline constexpr int kMaxScaleBits = 24;

struct AdaptConfig {
  int scale_bits = 16;
  // Per-slice override keyed by slice index; empty means one global scale.
  std::map<std::size_t, int> per_slice_scales;

  int scale_for(std::size_t slice) const;
  void validate() const;  // throws ValidationError outside [4, 24]
};

struct AdaptedLayer {
  LayerSpec spec;
  std::optional<FieldTensor> weight;  // scale f
  std::optional<FieldTensor> bias;    // scale 2f
};

struct AdaptedSlice {
  std::size_t slice_id = 0;
  Shape input_shape;
  // Scale of the incoming activation. Differs from scale_bits only at a
  // boundary between slices quantized at different scales; the slice then
  // rescales its input before the first layer.
  int input_scale_bits = 16;
  int scale_bits = 16;
  std::vector<AdaptedLayer> layers;
  Digest circuit_digest;

  Shape output_shape() const;
};

struct Witness {
  std::size_t slice_id = 0;
  Digest circuit_digest;
  int scale_bits = 0;
  int input_scale_bits = 0;
  FieldTensor input;
  std::vector<FieldTensor> trace;  // one entry per layer
  FieldTensor output;              // equals trace.back()

  friend bool operator==(const Witness&, const Witness&) = default;
};

FieldTensor quantize_tensor(const FloatTensor& t, int scale_bits);
FloatTensor dequantize_tensor(const FieldTensor& q);
FieldTensor rescale_boundary(const FieldTensor& t, int from_bits, int to_bits);

// input_scale_bits defaults to the slice's own scale.
AdaptedSlice adapt_slice(const ModelGraph& slice, const AdaptConfig& cfg, std::size_t slice_id,
                         std::optional<int> input_scale_bits = std::nullopt);

// Adapts every slice of the plan, chaining input scales across boundaries.
std::vector<AdaptedSlice> adapt_plan(const ModelGraph& model, const SlicePlan& plan, const AdaptConfig& cfg);

// Runs one adapted layer; OverflowError messages name the layer.
FieldTensor apply_adapted_layer(const AdaptedLayer& layer, const FieldTensor& x, std::size_t index);

Witness run_adapted(const AdaptedSlice& slice, const FieldTensor& input);

// Canonical circuit bytes; circuit_digest is their SHA-256.
std::vector<std::uint8_t> circuit_bytes(const AdaptedSlice& slice);
Digest compute_circuit_digest(const AdaptedSlice& slice);

// Circuit file: "SWCF" | u32 slice_id | circuit bytes.
std::vector<std::uint8_t> serialize_circuit_file(const AdaptedSlice& slice);
AdaptedSlice parse_circuit_file(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> serialize_witness(const Witness& w);
Witness parse_witness(std::span<const std::uint8_t> bytes);

void write_tensor(ByteWriter& w, const FieldTensor& t);
FieldTensor read_tensor(ByteReader& r, int scale_bits);

// Digest binding a tensor's scale, shape and values; used for slice I/O.
Digest tensor_digest(const FieldTensor& t);

}  // namespace slicewise
