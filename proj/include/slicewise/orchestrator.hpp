#pragma once

// Per-input pipeline: quantize, run each slice on its assigned node, prove,
// verify, and chain the slice I/O digests.
//
// A verified run is the conjunction "every proved slice accepted" AND "chain
// consistent". It is a set of independent slice proofs, not one end-to-end
// proof; RunRecord::assurance says which kind of coverage was obtained.
//
// Run directory layout: <out>/<input_id>/record.json, slice_<k>.witness,
// slice_<k>.proof (proved slices only), with k the 0-based slice index.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slicewise/adapt.hpp"
#include "slicewise/error.hpp"
#include "slicewise/model.hpp"
#include "slicewise/prover.hpp"

namespace slicewise {

enum class SliceRole { proved, public_pre, private_range, public_post };
enum class Assurance { per_slice_proved, strategically_proved, unproven };

std::string_view to_string(SliceRole role);
std::string_view to_string(Assurance a);

struct ExecutionPlan {
  SlicePlan plan;
  std::vector<SliceRole> roles;  // one per slice

  static ExecutionPlan all_proved(SlicePlan plan);
  bool proves(std::size_t slice) const;
  Assurance assurance() const;
};

// Splits the model around a private layer range. Empty public segments are
// dropped, so the result has one to three slices; only the private one is proved.
ExecutionPlan strategic_split(const ModelGraph& model, SliceRange private_range);

using NodeAssignment = std::map<std::size_t, std::string>;

NodeAssignment assign_round_robin(std::size_t slice_count, std::size_t node_count);

struct SliceDigests {
  Digest input;
  Digest output;
};

struct ChainCheck {
  bool consistent = true;
  // 0-based boundary index b: output of slice b vs input of slice b+1.
  std::optional<std::size_t> broken_at;
};

ChainCheck check_chain(std::span<const SliceDigests> slices);

struct SliceRecord {
  std::size_t slice_id = 0;
  std::string node_id;
  SliceRole role = SliceRole::proved;
  // As declared by the node: from the proof header when proved, else the witness.
  SliceDigests declared;
  Digest witness_digest;
  Witness witness;
  std::optional<ProofArtifact> proof;
  std::optional<Verdict> verdict;
};

struct RunRecord {
  std::string input_id;
  std::string backend_id;
  std::string plan_expression;
  std::vector<SliceRole> roles;
  int scale_bits = 16;
  std::map<std::size_t, int> per_slice_scales;
  Digest model_digest;
  Assurance assurance = Assurance::per_slice_proved;
  std::vector<SliceRecord> slices;
  ChainCheck chain;
  FieldTensor logits;
  FloatTensor logits_float;
  std::size_t predicted_class = 0;

  bool all_accepted() const;
  bool verified() const { return all_accepted() && chain.consistent; }
};

// Test hook standing in for a dishonest node: may rewrite the witness before it
// is proved and the activation forwarded to the next slice.
struct PipelineHooks {
  std::function<void(std::size_t slice, Witness& witness, FieldTensor& forwarded)> tamper;
};

/// Thrown when a slice cannot execute at all (shape, overflow, prover error).
class PipelineError : public Error {
 public:
  PipelineError(std::size_t slice, const std::string& reason)
      : Error("slice " + std::to_string(slice) + ": " + reason), slice_(slice) {}
  std::size_t slice() const { return slice_; }

 private:
  std::size_t slice_;
};

class Pipeline {
 public:
  // Adapts every slice once; run() reuses them read-only and is safe to call
  // from several threads for different inputs.
  Pipeline(const ModelGraph& model, ExecutionPlan plan, AdaptConfig cfg, const ProvingBackend& backend,
           NodeAssignment assignment = {});

  RunRecord run(const FloatTensor& input, std::string input_id, const PipelineHooks& hooks = {}) const;

  const std::vector<AdaptedSlice>& slices() const { return slices_; }
  const ExecutionPlan& plan() const { return plan_; }
  const NodeAssignment& assignment() const { return assignment_; }
  FieldTensor quantize_input(const FloatTensor& input) const;

 private:
  Shape input_shape_;
  Digest model_digest_;
  ExecutionPlan plan_;
  AdaptConfig cfg_;
  const ProvingBackend& backend_;
  NodeAssignment assignment_;
  std::vector<AdaptedSlice> slices_;
};

RunRecord execute_pipeline(const ModelGraph& model, const SlicePlan& plan, const AdaptConfig& cfg,
                           const FloatTensor& input, const NodeAssignment& assignment,
                           const ProvingBackend& backend, std::string input_id = "input");

// Runs inputs as concurrent pipeline instances. Each entry holds a record or
// the error message of a failed input.
struct BatchItem {
  std::optional<RunRecord> record;
  std::string error;
};
std::vector<BatchItem> run_batch(const Pipeline& pipeline, std::span<const FloatTensor> inputs,
                                 std::span<const std::string> ids, std::size_t jobs);

std::string record_to_json(const RunRecord& record);
void write_run_directory(const RunRecord& record, const std::filesystem::path& dir);

struct RunVerification {
  bool ok = true;
  std::vector<std::string> problems;
  ChainCheck chain;
};

// Re-adapts the model from the settings stored in record.json and checks every
// witness file digest, every proof, and the digest chain.
RunVerification verify_run_directory(const ModelGraph& model, const std::filesystem::path& dir,
                                     const ProvingBackend& backend);

}  // namespace slicewise
