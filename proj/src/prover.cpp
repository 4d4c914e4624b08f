#include "slicewise/prover.hpp"

#include <algorithm>

#include "json.hpp"
#include "slicewise/error.hpp"

namespace slicewise {

using nlohmann::json;

BackendDescriptor ReferenceBackend::descriptor() const {
  return {std::string(kId), /*supports_prime_field=*/false, /*zero_knowledge=*/false};
}

ProofArtifact ReferenceBackend::prove(const AdaptedSlice& slice, const Witness& witness) const {
  if (witness.circuit_digest != slice.circuit_digest)
    throw ValidationError("witness circuit digest " + witness.circuit_digest.hex() +
                          " does not match slice circuit " + slice.circuit_digest.hex());
  if (witness.slice_id != slice.slice_id)
    throw ValidationError("witness belongs to slice " + std::to_string(witness.slice_id) + ", not " +
                          std::to_string(slice.slice_id));
  if (witness.trace.size() != slice.layers.size())
    throw ValidationError("malformed witness: trace has " + std::to_string(witness.trace.size()) +
                          " entries for " + std::to_string(slice.layers.size()) + " layers");
  ProofArtifact p;
  p.backend_id = std::string(kId);
  p.slice_id = slice.slice_id;
  p.circuit_digest = slice.circuit_digest;
  p.input_digest = tensor_digest(witness.input);
  p.output_digest = tensor_digest(witness.output);
  p.payload = serialize_witness(witness);
  return p;
}

Verdict ReferenceBackend::verify(const AdaptedSlice& slice, const ProofArtifact& proof,
                                 const Digest& claimed_input_digest, const Digest& claimed_output_digest) const {
  if (proof.backend_id != kId) return Verdict::reject("backend mismatch: artifact from '" + proof.backend_id + "'");
  if (proof.slice_id != slice.slice_id) return Verdict::reject("slice id mismatch");
  if (proof.circuit_digest != slice.circuit_digest) return Verdict::reject("circuit digest mismatch");
  if (proof.input_digest != claimed_input_digest) return Verdict::reject("input digest mismatch");
  if (proof.output_digest != claimed_output_digest) return Verdict::reject("output digest mismatch");

  Witness w;
  try {
    w = parse_witness(proof.payload);
  } catch (const Error& e) {
    return Verdict::reject(std::string("malformed payload: ") + e.what());
  }
  if (w.slice_id != slice.slice_id) return Verdict::reject("payload slice id mismatch");
  if (w.circuit_digest != slice.circuit_digest) return Verdict::reject("payload circuit digest mismatch");
  if (w.scale_bits != slice.scale_bits || w.input_scale_bits != slice.input_scale_bits)
    return Verdict::reject("payload scale mismatch");
  if (tensor_digest(w.input) != proof.input_digest) return Verdict::reject("input digest mismatch");
  if (tensor_digest(w.output) != proof.output_digest) return Verdict::reject("output digest mismatch");
  if (w.trace.size() != slice.layers.size()) return Verdict::reject("trace length mismatch");
  if (w.input.shape() != slice.input_shape) return Verdict::reject("input shape mismatch");

  try {
    FieldTensor x = rescale_boundary(w.input, slice.input_scale_bits, slice.scale_bits);
    for (std::size_t i = 0; i < slice.layers.size(); ++i) {
      x = apply_adapted_layer(slice.layers[i], x, i);
      if (x != w.trace[i]) return Verdict::reject("trace mismatch at layer " + std::to_string(i));
    }
  } catch (const Error& e) {
    return Verdict::reject(std::string("re-execution failed: ") + e.what());
  }
  if (w.output != w.trace.back()) return Verdict::reject("output does not match final trace entry");
  return Verdict::accept();
}

std::unique_ptr<ProvingBackend> make_backend(std::string_view id) {
  if (id == "reference" || id == ReferenceBackend::kId) return std::make_unique<ReferenceBackend>();
  throw ValidationError("unknown proving backend '" + std::string(id) + "'");
}

std::vector<std::uint8_t> serialize_artifact(const ProofArtifact& proof) {
  json header = {{"backend_id", proof.backend_id},
                 {"slice_id", proof.slice_id},
                 {"circuit_digest", proof.circuit_digest.hex()},
                 {"input_digest", proof.input_digest.hex()},
                 {"output_digest", proof.output_digest.hex()},
                 {"payload_length", proof.payload.size()}};
  std::string line = header.dump() + "\n";
  std::vector<std::uint8_t> out(line.begin(), line.end());
  out.insert(out.end(), proof.payload.begin(), proof.payload.end());
  return out;
}

ProofArtifact parse_artifact(std::span<const std::uint8_t> bytes) {
  auto nl = std::find(bytes.begin(), bytes.end(), std::uint8_t{'\n'});
  if (nl == bytes.end()) throw FormatError("proof artifact lacks a header line");
  std::size_t header_len = static_cast<std::size_t>(nl - bytes.begin());
  json h;
  try {
    h = json::parse(bytes.begin(), nl);
    ProofArtifact p;
    p.backend_id = h.at("backend_id").get<std::string>();
    p.slice_id = h.at("slice_id").get<std::size_t>();
    p.circuit_digest = Digest::from_hex(h.at("circuit_digest").get<std::string>());
    p.input_digest = Digest::from_hex(h.at("input_digest").get<std::string>());
    p.output_digest = Digest::from_hex(h.at("output_digest").get<std::string>());
    std::size_t len = h.at("payload_length").get<std::size_t>();
    if (len != bytes.size() - header_len - 1) throw FormatError("payload length does not match artifact size");
    p.payload.assign(nl + 1, bytes.end());
    return p;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed proof header: ") + e.what());
  }
}

}  // namespace slicewise
