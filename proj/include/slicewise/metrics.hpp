#pragma once

// Fidelity between original (float) and circuit-adapted logits:
//   D_p  = sum_j |z_orig_j - z_circ_j|^p,  p in {1, 2}
//   TVD  = 1/2 sum_i |p_i - q_i|
//   JSD  = 1/2 sum_i p_i log2(2 p_i / (p_i + q_i)) + 1/2 sum_i q_i log2(2 q_i / (p_i + q_i))
// TVD and JSD compare softmax distributions; terms with a zero mass contribute 0.

#include <span>
#include <string>
#include <vector>

namespace slicewise::metrics {

struct SummaryStats {
  double mean = 0.0;
  double std = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
};

double discrepancy(std::span<const double> z_orig, std::span<const double> z_circ, int p,
                   bool normalize = false);
double tvd(std::span<const double> p, std::span<const double> q);
double jsd(std::span<const double> p, std::span<const double> q);

// Compares the argmax of the two softmax vectors; also checks it against the
// raw-logit argmax and throws if softmax ever broke monotonicity.
bool argmax_agreement(std::span<const double> z_orig, std::span<const double> z_circ);

SummaryStats summarize(std::span<const double> values);

struct FidelitySample {
  double d1 = 0.0;
  double d2 = 0.0;
  double tvd = 0.0;
  double jsd = 0.0;
  std::size_t argmax_orig = 0;
  std::size_t argmax_circ = 0;
  bool agree = false;
};

FidelitySample measure_fidelity(std::span<const double> z_orig, std::span<const double> z_circ);

}  // namespace slicewise::metrics
