#include "doctest.h"
#include "slicewise/error.hpp"
#include "slicewise/prover.hpp"
#include "slicewise/random.hpp"

using namespace slicewise;

namespace {

struct Fixture {
  ModelGraph model = random_lenet(0);
  std::vector<AdaptedSlice> slices = adapt_plan(model, plan_slices(model, "lenet5"), AdaptConfig{});
  ReferenceBackend backend;

  std::vector<Witness> witnesses(std::size_t input) const {
    std::vector<Witness> out;
    FieldTensor x = quantize_tensor(random_input(model.input_shape, 11, input), 16);
    for (const auto& s : slices) {
      out.push_back(run_adapted(s, x));
      x = out.back().output;
    }
    return out;
  }
};

FieldTensor flip(const FieldTensor& t, std::size_t index, int bit) {
  std::vector<std::int64_t> v(t.data().begin(), t.data().end());
  v[index] ^= std::int64_t{1} << bit;
  return FieldTensor(t.shape(), std::move(v), t.scale_bits());
}

bool contains(const std::string& s, std::string_view part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("descriptor") {
  ReferenceBackend b;
  CHECK(b.descriptor().backend_id == "reference-reexec-v1");
  CHECK_FALSE(b.descriptor().zero_knowledge);
  CHECK(make_backend("reference")->descriptor().backend_id == b.descriptor().backend_id);
  CHECK_THROWS_AS(make_backend("halo2"), ValidationError);
}

TEST_CASE("prove binds circuit, input and output") {
  Fixture fx;
  auto ws = fx.witnesses(0);
  ProofArtifact p = fx.backend.prove(fx.slices[4], ws[4]);
  CHECK(p.output_digest == tensor_digest(ws[4].output));
  CHECK(p.input_digest == tensor_digest(ws[4].input));
  CHECK(p.circuit_digest == fx.slices[4].circuit_digest);
  CHECK(p.slice_id == 4);
  CHECK(serialize_artifact(fx.backend.prove(fx.slices[4], ws[4])) == serialize_artifact(p));

  Witness foreign = ws[4];
  foreign.circuit_digest = fx.slices[3].circuit_digest;
  CHECK_THROWS_AS(fx.backend.prove(fx.slices[4], foreign), ValidationError);
  Witness short_trace = ws[4];
  short_trace.trace.clear();
  CHECK_THROWS_AS(fx.backend.prove(fx.slices[4], short_trace), ValidationError);
}

TEST_CASE("completeness over random inputs") {
  Fixture fx;
  for (std::size_t i = 0; i < 10; ++i) {
    auto ws = fx.witnesses(i);
    for (std::size_t k = 0; k < fx.slices.size(); ++k) {
      ProofArtifact p = fx.backend.prove(fx.slices[k], ws[k]);
      Verdict v = fx.backend.verify(fx.slices[k], p, tensor_digest(ws[k].input), tensor_digest(ws[k].output));
      CHECK_MESSAGE(v.accepted, v.reason);
      ProofArtifact back = parse_artifact(serialize_artifact(p));
      CHECK(back == p);
    }
  }
}

TEST_CASE("binding to claimed digests and circuit") {
  Fixture fx;
  auto ws = fx.witnesses(1);
  ProofArtifact p = fx.backend.prove(fx.slices[2], ws[2]);
  Digest in = tensor_digest(ws[2].input), out = tensor_digest(ws[2].output);
  Verdict r = fx.backend.verify(fx.slices[2], p, tensor_digest(ws[1].input), out);
  CHECK_FALSE(r.accepted);
  CHECK(r.reason == "input digest mismatch");
  CHECK(fx.backend.verify(fx.slices[2], p, in, in).reason == "output digest mismatch");
  CHECK_FALSE(fx.backend.verify(fx.slices[3], p, in, out).accepted);

  ProofArtifact other = p;
  other.backend_id = "something-else";
  CHECK(contains(fx.backend.verify(fx.slices[2], other, in, out).reason, "backend"));
}

TEST_CASE("an incremented output element is rejected") {
  Fixture fx;
  auto ws = fx.witnesses(2);
  Witness w = ws[4];
  std::vector<std::int64_t> v(w.output.data().begin(), w.output.data().end());
  v[3] += 1;
  w.output = FieldTensor(w.output.shape(), v, w.output.scale_bits());
  ProofArtifact p = fx.backend.prove(fx.slices[4], w);
  // Against the honest claim the digest differs; against a matching claim the replay catches it.
  Verdict honest_claim = fx.backend.verify(fx.slices[4], p, tensor_digest(ws[4].input), tensor_digest(ws[4].output));
  CHECK(honest_claim.reason == "output digest mismatch");
  w.trace.back() = w.output;
  p = fx.backend.prove(fx.slices[4], w);
  Verdict replay = fx.backend.verify(fx.slices[4], p, p.input_digest, p.output_digest);
  CHECK(replay.reason == "trace mismatch at layer 0");
}

TEST_CASE("soundness against single-element and single-bit tampering") {
  Fixture fx;
  Rng rng(99);
  std::size_t rejected = 0, attempts = 0;
  for (std::size_t input = 0; input < 2; ++input) {
    auto ws = fx.witnesses(input);
    for (std::size_t k = 0; k < fx.slices.size(); ++k) {
      const AdaptedSlice& s = fx.slices[k];
      const Witness& honest = ws[k];
      ProofArtifact good = fx.backend.prove(s, honest);
      Digest in = good.input_digest, out = good.output_digest;
      auto reject = [&](const ProofArtifact& p, const Digest& ci, const Digest& co) {
        ++attempts;
        Verdict v = fx.backend.verify(s, p, ci, co);
        if (!v.accepted) ++rejected;
        return !v.accepted;
      };

      for (int t = 0; t < 60; ++t) {
        Witness w = honest;
        int where = static_cast<int>(rng.next() % 3);
        int bit = static_cast<int>(rng.next() % 40);
        if (where == 0) {
          w.input = flip(w.input, rng.next() % w.input.size(), bit);
        } else if (where == 1) {
          std::size_t layer = rng.next() % w.trace.size();
          w.trace[layer] = flip(w.trace[layer], rng.next() % w.trace[layer].size(), bit);
        } else {
          w.output = flip(w.output, rng.next() % w.output.size(), bit);
        }
        ProofArtifact p = good;
        p.payload = serialize_witness(w);
        CHECK(reject(p, in, out));
        // Adversary also rewrites the header and claims to match the tampered payload.
        // A flipped low input bit can vanish in rescaling; that witness is an honest
        // execution on a different input and must be accepted.
        p.input_digest = tensor_digest(w.input);
        p.output_digest = tensor_digest(w.output);
        Witness replay = run_adapted(s, w.input);
        if (replay.trace == w.trace && replay.output == w.output) {
          CHECK(fx.backend.verify(s, p, p.input_digest, p.output_digest).accepted);
        } else {
          CHECK(reject(p, p.input_digest, p.output_digest));
        }
      }

      for (int t = 0; t < 10; ++t) {
        ProofArtifact p = good;
        std::size_t byte = rng.next() % 32;
        int bit = static_cast<int>(rng.next() % 8);
        switch (t % 3) {
          case 0: p.input_digest.bytes[byte] ^= static_cast<std::uint8_t>(1 << bit); break;
          case 1: p.output_digest.bytes[byte] ^= static_cast<std::uint8_t>(1 << bit); break;
          default: p.circuit_digest.bytes[byte] ^= static_cast<std::uint8_t>(1 << bit); break;
        }
        CHECK(reject(p, in, out));
        CHECK(reject(p, p.input_digest, p.output_digest));
      }

      for (int t = 0; t < 20; ++t) {
        ProofArtifact p = good;
        p.payload[rng.next() % p.payload.size()] ^= static_cast<std::uint8_t>(1 << (rng.next() % 8));
        CHECK(reject(p, in, out));
      }
    }
  }
  CHECK(attempts >= 500);
  CHECK(rejected == attempts);
}

TEST_CASE("malformed artifacts") {
  Fixture fx;
  auto ws = fx.witnesses(3);
  ProofArtifact p = fx.backend.prove(fx.slices[0], ws[0]);
  auto bytes = serialize_artifact(p);
  auto cut = bytes;
  cut.pop_back();
  CHECK_THROWS_AS(parse_artifact(cut), FormatError);
  CHECK_THROWS_AS(parse_artifact(std::vector<std::uint8_t>{'{', '}'}), FormatError);
  ProofArtifact junk = p;
  junk.payload = {1, 2, 3};
  Verdict v = fx.backend.verify(fx.slices[0], junk, p.input_digest, p.output_digest);
  CHECK(contains(v.reason, "malformed payload"));
}
