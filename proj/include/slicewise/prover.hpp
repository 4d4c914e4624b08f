#pragma once

// Pluggable proving backends. Callers see only ProvingBackend; a backend's
// payload format is private to it.
//
// Proof artifact file:
//   one line of JSON {"backend_id", "slice_id", "circuit_digest", "input_digest",
//                     "output_digest", "payload_length"} terminated by '\n',
//   followed by exactly payload_length payload bytes.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slicewise/adapt.hpp"
#include "slicewise/digest.hpp"

namespace slicewise {

struct BackendDescriptor {
  std::string backend_id;
  bool supports_prime_field = false;
  bool zero_knowledge = false;
};

struct ProofArtifact {
  std::string backend_id;
  std::size_t slice_id = 0;
  Digest circuit_digest;
  Digest input_digest;
  Digest output_digest;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const ProofArtifact&, const ProofArtifact&) = default;
};

struct Verdict {
  bool accepted = false;
  std::string reason;

  static Verdict accept() { return {true, {}}; }
  static Verdict reject(std::string why) { return {false, std::move(why)}; }
  explicit operator bool() const { return accepted; }
};

class ProvingBackend {
 public:
  virtual ~ProvingBackend() = default;

  virtual BackendDescriptor descriptor() const = 0;

  // Throws ValidationError when the witness does not belong to the slice.
  virtual ProofArtifact prove(const AdaptedSlice& slice, const Witness& witness) const = 0;

  // Never throws; every failure is a structured reject.
  virtual Verdict verify(const AdaptedSlice& slice, const ProofArtifact& proof,
                         const Digest& claimed_input_digest, const Digest& claimed_output_digest) const = 0;
};

/// Transparent stand-in for a ZK system: the payload is the full witness and
/// verification replays every layer against the circuit. Not zero-knowledge.
class ReferenceBackend final : public ProvingBackend {
 public:
  static constexpr std::string_view kId = "reference-reexec-v1";

  BackendDescriptor descriptor() const override;
  ProofArtifact prove(const AdaptedSlice& slice, const Witness& witness) const override;
  Verdict verify(const AdaptedSlice& slice, const ProofArtifact& proof, const Digest& claimed_input_digest,
                 const Digest& claimed_output_digest) const override;
};

// Known ids: "reference" and ReferenceBackend::kId.
std::unique_ptr<ProvingBackend> make_backend(std::string_view id);

std::vector<std::uint8_t> serialize_artifact(const ProofArtifact& proof);
ProofArtifact parse_artifact(std::span<const std::uint8_t> bytes);

}  // namespace slicewise
