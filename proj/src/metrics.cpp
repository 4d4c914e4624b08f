#include "slicewise/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "slicewise/error.hpp"
#include "slicewise/ops.hpp"

namespace slicewise::metrics {

namespace {

void same_length(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size())
    throw ShapeError(std::string(what) + ": length mismatch " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  if (a.empty()) throw ShapeError(std::string(what) + ": empty input");
}

void check_distribution(std::span<const double> p, const char* what) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(std::string(what) + ": negative or non-finite mass");
    total += v;
  }
  if (std::fabs(total - 1.0) > 1e-9) throw ValidationError(std::string(what) + ": masses do not sum to 1");
}

std::vector<double> softmax_of(std::span<const double> z) {
  FloatTensor probs = ops::softmax(FloatTensor({z.size()}, {z.begin(), z.end()}));
  return {probs.data().begin(), probs.data().end()};
}

}  // namespace

double discrepancy(std::span<const double> z_orig, std::span<const double> z_circ, int p, bool normalize) {
  same_length(z_orig, z_circ, "discrepancy");
  if (p != 1 && p != 2) throw ValidationError("discrepancy order must be 1 or 2");
  double sum = 0.0;
  for (std::size_t j = 0; j < z_orig.size(); ++j) {
    double d = std::fabs(z_orig[j] - z_circ[j]);
    sum += p == 1 ? d : d * d;
  }
  return normalize ? sum / static_cast<double>(z_orig.size()) : sum;
}

double tvd(std::span<const double> p, std::span<const double> q) {
  same_length(p, q, "tvd");
  check_distribution(p, "tvd");
  check_distribution(q, "tvd");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += std::fabs(p[i] - q[i]);
  return std::clamp(0.5 * sum, 0.0, 1.0);
}

double jsd(std::span<const double> p, std::span<const double> q) {
  same_length(p, q, "jsd");
  check_distribution(p, "jsd");
  check_distribution(q, "jsd");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double m = p[i] + q[i];
    if (p[i] > 0.0) sum += p[i] * std::log2(2.0 * p[i] / m);
    if (q[i] > 0.0) sum += q[i] * std::log2(2.0 * q[i] / m);
  }
  return std::clamp(0.5 * sum, 0.0, 1.0);
}

bool argmax_agreement(std::span<const double> z_orig, std::span<const double> z_circ) {
  same_length(z_orig, z_circ, "argmax_agreement");
  std::vector<double> po = softmax_of(z_orig), pc = softmax_of(z_circ);
  std::size_t a = ops::argmax(po), b = ops::argmax(pc);
  // Softmax is monotone, but exp can merge nearly-equal logits into one double;
  // only a disagreement where the raw logits are not tied is a real violation.
  std::size_t ra = ops::argmax(z_orig), rb = ops::argmax(z_circ);
  if ((a != ra && po[a] != po[ra]) || (b != rb && pc[b] != pc[rb]))
    throw Error("softmax argmax disagrees with logit argmax");
  return a == b;
}

SummaryStats summarize(std::span<const double> values) {
  if (values.empty()) throw ValidationError("summarize: empty list");
  SummaryStats s;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  double total = 0.0;
  for (double v : values) total += v;
  s.mean = std::clamp(total / static_cast<double>(values.size()), s.min, s.max);
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

FidelitySample measure_fidelity(std::span<const double> z_orig, std::span<const double> z_circ) {
  FidelitySample f;
  f.d1 = discrepancy(z_orig, z_circ, 1);
  f.d2 = discrepancy(z_orig, z_circ, 2);
  std::vector<double> po = softmax_of(z_orig), pc = softmax_of(z_circ);
  f.tvd = tvd(po, pc);
  f.jsd = jsd(po, pc);
  f.argmax_orig = ops::argmax(po);
  f.argmax_circ = ops::argmax(pc);
  f.agree = argmax_agreement(z_orig, z_circ);
  return f;
}

}  // namespace slicewise::metrics
