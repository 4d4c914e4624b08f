#include "slicewise/adapt.hpp"

#include <cmath>
#include <string>

#include "slicewise/error.hpp"
#include "slicewise/ops.hpp"

namespace slicewise {

namespace {

constexpr std::uint32_t kCircuitVersion = 1;
constexpr std::uint32_t kWitnessVersion = 1;
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint8_t kWitnessMagic[4] = {'S', 'W', 'W', 'T'};
constexpr std::uint8_t kCircuitMagic[4] = {'S', 'W', 'C', 'F'};

void check_scale(int bits, const char* what) {
  if (bits < kMinScaleBits || bits > kMaxScaleBits)
    throw ValidationError(std::string(what) + " " + std::to_string(bits) + " outside [" +
                          std::to_string(kMinScaleBits) + ", " + std::to_string(kMaxScaleBits) + "]");
}

void expect_magic(ByteReader& r, const std::uint8_t (&magic)[4], const char* what) {
  auto got = r.bytes(4);
  for (int i = 0; i < 4; ++i)
    if (got[i] != magic[i]) throw FormatError(std::string("not a ") + what + " record");
}

Shape read_shape(ByteReader& r) {
  std::uint32_t rank = r.u32();
  if (rank == 0 || rank > kMaxRank) throw FormatError("tensor rank " + std::to_string(rank) + " invalid");
  Shape s(rank);
  for (auto& d : s) {
    std::uint64_t v = r.u64();
    if (v == 0 || v > (std::uint64_t{1} << 32)) throw FormatError("tensor dimension out of range");
    d = static_cast<std::size_t>(v);
  }
  return s;
}

void write_shape(ByteWriter& w, const Shape& s) {
  w.u32(static_cast<std::uint32_t>(s.size()));
  for (std::size_t d : s) w.u64(d);
}

}  // namespace

int AdaptConfig::scale_for(std::size_t slice) const {
  auto it = per_slice_scales.find(slice);
  return it == per_slice_scales.end() ? scale_bits : it->second;
}

void AdaptConfig::validate() const {
  check_scale(scale_bits, "scale_bits");
  for (const auto& [slice, bits] : per_slice_scales) check_scale(bits, "per-slice scale_bits");
}

Shape AdaptedSlice::output_shape() const {
  ModelGraph shell;
  shell.input_shape = input_shape;
  for (const auto& l : layers) shell.layers.push_back(l.spec);
  return infer_shapes(shell).back();
}

FieldTensor quantize_tensor(const FloatTensor& t, int scale_bits) {
  if (scale_bits < 0 || scale_bits > 62) throw ValidationError("scale_bits out of range");
  std::vector<std::int64_t> out(t.size());
  const double limit = std::ldexp(1.0, 62);
  for (std::size_t i = 0; i < t.size(); ++i) {
    double scaled = std::round(std::ldexp(t[i], scale_bits));
    if (!(std::fabs(scaled) < limit))
      throw OverflowError("quantized magnitude reaches 2^62 at element " + std::to_string(i));
    out[i] = static_cast<std::int64_t>(scaled);
  }
  return FieldTensor(t.shape(), std::move(out), scale_bits);
}

FloatTensor dequantize_tensor(const FieldTensor& q) {
  std::vector<double> out(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) out[i] = std::ldexp(static_cast<double>(q[i]), -q.scale_bits());
  return FloatTensor(q.shape(), std::move(out));
}

FieldTensor rescale_boundary(const FieldTensor& t, int from_bits, int to_bits) {
  if (t.scale_bits() != from_bits)
    throw ValidationError("tensor scale " + std::to_string(t.scale_bits()) + " is not the declared " +
                          std::to_string(from_bits));
  if (to_bits < 0 || to_bits > 62) throw ValidationError("target scale out of range");
  if (from_bits == to_bits) return t;
  std::vector<std::int64_t> out(t.size());
  if (to_bits > from_bits) {
    int up = to_bits - from_bits;
    for (std::size_t i = 0; i < t.size(); ++i) {
      __int128 v = static_cast<__int128>(t[i]) << up;
      if (v >= kFieldLimit || v <= -kFieldLimit) throw OverflowError("rescale_boundary: magnitude reaches 2^62");
      out[i] = static_cast<std::int64_t>(v);
    }
  } else {
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = ops::round_shift(t[i], from_bits - to_bits);
  }
  return FieldTensor(t.shape(), std::move(out), to_bits);
}

AdaptedSlice adapt_slice(const ModelGraph& slice, const AdaptConfig& cfg, std::size_t slice_id,
                         std::optional<int> input_scale_bits) {
  cfg.validate();
  check_model(slice);
  AdaptedSlice out;
  out.slice_id = slice_id;
  out.input_shape = slice.input_shape;
  out.scale_bits = cfg.scale_for(slice_id);
  out.input_scale_bits = input_scale_bits.value_or(out.scale_bits);
  check_scale(out.input_scale_bits, "input scale_bits");
  for (const LayerSpec& l : slice.layers) {
    AdaptedLayer a;
    a.spec = l;
    a.spec.weight_ref.reset();
    a.spec.bias_ref.reset();
    if (l.has_parameters()) {
      a.weight = quantize_tensor(slice.weight(*l.weight_ref), out.scale_bits);
      a.bias = quantize_tensor(slice.weight(*l.bias_ref), 2 * out.scale_bits);
    }
    out.layers.push_back(std::move(a));
  }
  out.circuit_digest = compute_circuit_digest(out);
  return out;
}

std::vector<AdaptedSlice> adapt_plan(const ModelGraph& model, const SlicePlan& plan, const AdaptConfig& cfg) {
  std::vector<AdaptedSlice> slices;
  for (std::size_t i = 0; i < plan.slice_count(); ++i) {
    std::optional<int> in_bits;
    if (i > 0) in_bits = slices.back().scale_bits;
    slices.push_back(adapt_slice(extract_slice(model, plan, i), cfg, i, in_bits));
  }
  return slices;
}

FieldTensor apply_adapted_layer(const AdaptedLayer& layer, const FieldTensor& x, std::size_t index) {
  try {
    switch (layer.spec.kind) {
      case LayerKind::conv2d: return ops::conv2d(x, *layer.weight, *layer.bias, layer.spec.stride);
      case LayerKind::relu: return ops::relu(x);
      case LayerKind::maxpool2d: return ops::maxpool2d(x, layer.spec.window);
      case LayerKind::flatten: return ops::flatten(x);
      case LayerKind::linear: return ops::linear(x, *layer.weight, *layer.bias);
    }
  } catch (const OverflowError& e) {
    throw OverflowError("layer " + std::to_string(index) + " " + layer.spec.describe() + ": " + e.what());
  } catch (const ShapeError& e) {
    throw ShapeError("layer " + std::to_string(index) + " " + layer.spec.describe() + ": " + e.what());
  }
  throw ValidationError("unsupported layer kind");
}

Witness run_adapted(const AdaptedSlice& slice, const FieldTensor& input) {
  if (input.scale_bits() != slice.input_scale_bits)
    throw ValidationError("input scale " + std::to_string(input.scale_bits()) + " does not match slice input scale " +
                          std::to_string(slice.input_scale_bits));
  if (input.shape() != slice.input_shape)
    throw ShapeError("input shape " + shape_string(input.shape()) + " does not match slice input " +
                     shape_string(slice.input_shape));
  Witness w;
  w.slice_id = slice.slice_id;
  w.circuit_digest = slice.circuit_digest;
  w.scale_bits = slice.scale_bits;
  w.input_scale_bits = slice.input_scale_bits;
  w.input = input;
  FieldTensor x = rescale_boundary(input, slice.input_scale_bits, slice.scale_bits);
  w.trace.reserve(slice.layers.size());
  for (std::size_t i = 0; i < slice.layers.size(); ++i) {
    x = apply_adapted_layer(slice.layers[i], x, i);
    w.trace.push_back(x);
  }
  w.output = w.trace.back();
  return w;
}

void write_tensor(ByteWriter& w, const FieldTensor& t) {
  write_shape(w, t.shape());
  for (std::int64_t v : t.data()) w.i64(v);
}

FieldTensor read_tensor(ByteReader& r, int scale_bits) {
  Shape s = read_shape(r);
  std::size_t n = element_count(s);
  if (n > r.remaining() / 8) throw FormatError("tensor values truncated");
  std::vector<std::int64_t> data(n);
  for (auto& v : data) v = r.i64();
  try {
    return FieldTensor(std::move(s), std::move(data), scale_bits);
  } catch (const Error& e) {
    throw FormatError(std::string("invalid tensor: ") + e.what());
  }
}

std::vector<std::uint8_t> circuit_bytes(const AdaptedSlice& slice) {
  ByteWriter w;
  w.u32(kCircuitVersion);
  w.u32(static_cast<std::uint32_t>(slice.scale_bits));
  w.u32(static_cast<std::uint32_t>(slice.input_scale_bits));
  write_shape(w, slice.input_shape);
  w.u32(static_cast<std::uint32_t>(slice.layers.size()));
  for (const AdaptedLayer& l : slice.layers) {
    const LayerSpec& s = l.spec;
    w.u32(static_cast<std::uint32_t>(s.kind));
    for (std::size_t p : {s.in_channels, s.out_channels, s.kernel, s.stride, s.window, s.in_features, s.out_features})
      w.u64(p);
    w.u8(l.weight ? 1 : 0);
    if (l.weight) {
      write_tensor(w, *l.weight);
      write_tensor(w, *l.bias);
    }
  }
  return w.take();
}

Digest compute_circuit_digest(const AdaptedSlice& slice) { return sha256(circuit_bytes(slice)); }

std::vector<std::uint8_t> serialize_circuit_file(const AdaptedSlice& slice) {
  ByteWriter w;
  w.bytes(kCircuitMagic);
  w.u32(static_cast<std::uint32_t>(slice.slice_id));
  w.bytes(circuit_bytes(slice));
  return w.take();
}

AdaptedSlice parse_circuit_file(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  expect_magic(r, kCircuitMagic, "circuit");
  AdaptedSlice s;
  s.slice_id = r.u32();
  std::size_t body_start = r.position();
  if (r.u32() != kCircuitVersion) throw FormatError("unsupported circuit version");
  s.scale_bits = static_cast<int>(r.u32());
  s.input_scale_bits = static_cast<int>(r.u32());
  check_scale(s.scale_bits, "circuit scale_bits");
  check_scale(s.input_scale_bits, "circuit input scale_bits");
  s.input_shape = read_shape(r);
  std::uint32_t count = r.u32();
  if (count == 0) throw FormatError("circuit has no layers");
  for (std::uint32_t i = 0; i < count; ++i) {
    AdaptedLayer l;
    std::uint32_t kind = r.u32();
    if (kind > static_cast<std::uint32_t>(LayerKind::linear)) throw FormatError("unknown layer kind in circuit");
    l.spec.kind = static_cast<LayerKind>(kind);
    for (std::size_t* p : {&l.spec.in_channels, &l.spec.out_channels, &l.spec.kernel, &l.spec.stride,
                           &l.spec.window, &l.spec.in_features, &l.spec.out_features})
      *p = static_cast<std::size_t>(r.u64());
    std::uint8_t has = r.u8();
    if (has != (l.spec.has_parameters() ? 1 : 0)) throw FormatError("circuit layer parameter flag mismatch");
    if (has) {
      l.weight = read_tensor(r, s.scale_bits);
      l.bias = read_tensor(r, 2 * s.scale_bits);
    }
    s.layers.push_back(std::move(l));
  }
  r.expect_end();
  try {
    s.output_shape();
  } catch (const ShapeError& e) {
    throw FormatError(std::string("inconsistent circuit: ") + e.what());
  }
  s.circuit_digest = sha256(bytes.subspan(body_start));
  return s;
}

std::vector<std::uint8_t> serialize_witness(const Witness& wit) {
  ByteWriter body;
  body.u32(static_cast<std::uint32_t>(wit.slice_id));
  body.digest(wit.circuit_digest);
  body.u32(static_cast<std::uint32_t>(wit.scale_bits));
  body.u32(static_cast<std::uint32_t>(wit.input_scale_bits));
  write_tensor(body, wit.input);
  body.u32(static_cast<std::uint32_t>(wit.trace.size()));
  for (const FieldTensor& t : wit.trace) write_tensor(body, t);
  write_tensor(body, wit.output);

  ByteWriter w;
  w.bytes(kWitnessMagic);
  w.u32(kWitnessVersion);
  w.u64(body.buffer().size());
  w.bytes(body.buffer());
  return w.take();
}

Witness parse_witness(std::span<const std::uint8_t> bytes) {
  ByteReader outer(bytes);
  expect_magic(outer, kWitnessMagic, "witness");
  if (outer.u32() != kWitnessVersion) throw FormatError("unsupported witness version");
  std::uint64_t len = outer.u64();
  if (len != outer.remaining()) throw FormatError("witness length prefix does not match record size");
  ByteReader r(outer.bytes(static_cast<std::size_t>(len)));

  Witness w;
  w.slice_id = r.u32();
  w.circuit_digest = r.digest();
  w.scale_bits = static_cast<int>(r.u32());
  w.input_scale_bits = static_cast<int>(r.u32());
  if (w.scale_bits < 0 || w.scale_bits > 62 || w.input_scale_bits < 0 || w.input_scale_bits > 62)
    throw FormatError("witness scale out of range");
  w.input = read_tensor(r, w.input_scale_bits);
  std::uint32_t count = r.u32();
  if (count == 0 || count > r.remaining()) throw FormatError("witness trace count invalid");
  for (std::uint32_t i = 0; i < count; ++i) w.trace.push_back(read_tensor(r, w.scale_bits));
  w.output = read_tensor(r, w.scale_bits);
  r.expect_end();
  return w;
}

Digest tensor_digest(const FieldTensor& t) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(t.scale_bits()));
  write_tensor(w, t);
  return sha256(w.buffer());
}

}  // namespace slicewise
