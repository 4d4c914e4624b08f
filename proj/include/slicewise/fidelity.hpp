#pragma once

// Batch fidelity of circuit-adapted logits against float inference, for the
// whole model as one circuit ("unsliced") and for a slice plan ("sliced").

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slicewise/adapt.hpp"
#include "slicewise/metrics.hpp"
#include "slicewise/model.hpp"

namespace slicewise {

struct FidelityRow {
  std::string input_id;
  std::optional<metrics::FidelitySample> unsliced;
  std::optional<metrics::FidelitySample> sliced;
  std::string error;  // set when the input could not be evaluated
};

struct MetricSummary {
  std::string name;  // D1, D2, TVD, JSD
  metrics::SummaryStats unsliced;
  metrics::SummaryStats sliced;
};

struct FidelityReport {
  std::string model_digest;
  std::string plan;
  int scale_bits = 16;
  std::map<std::size_t, int> per_slice_scales;
  std::vector<FidelityRow> rows;
  std::vector<MetricSummary> summary;  // empty when every input failed
  double agreement_unsliced = 0.0;
  double agreement_sliced = 0.0;

  std::size_t evaluated() const;
  std::string to_csv() const;
  std::string to_json() const;
  std::string render_tables() const;
};

// Integer logits of the adapted slices applied in sequence.
FieldTensor run_adapted_chain(const std::vector<AdaptedSlice>& slices, const FloatTensor& input);

// Unsliced uses the global scale; sliced uses cfg including per-slice scales.
FidelityReport measure_fidelity_batch(const ModelGraph& model, const SlicePlan& plan, const AdaptConfig& cfg,
                                      const std::vector<FloatTensor>& inputs, const std::vector<std::string>& ids,
                                      std::size_t jobs = 1);

}  // namespace slicewise
