#pragma once

// Measurement harness: per-stage wall-clock timing, peak memory sampling and
// report emission for full-model vs per-slice execution.
//
// Stages run serially per input: witness for every slice, then proof, then
// verification. The sliced "Total" row times the whole stage loop,
// orchestration included.

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "slicewise/adapt.hpp"
#include "slicewise/error.hpp"
#include "slicewise/metrics.hpp"
#include "slicewise/model.hpp"
#include "slicewise/prover.hpp"

namespace slicewise::bench {

enum class Stage { witness, proof, verification };
enum class Config { full, sliced };

std::string_view to_string(Stage s);
std::string_view to_string(Config c);
Config config_from_string(std::string_view s);

inline constexpr Stage kStages[] = {Stage::witness, Stage::proof, Stage::verification};

struct StageTiming {
  Stage stage = Stage::witness;
  Config config = Config::full;
  std::optional<std::size_t> slice_id;  // unset: the whole stage
  std::size_t input_index = 0;
  double seconds = 0.0;
  double start = 0.0;  // seconds since the report epoch
  double end = 0.0;
};

struct MemorySample {
  Stage stage = Stage::witness;
  Config config = Config::full;
  std::optional<std::size_t> slice_id;
  std::size_t input_index = 0;
  bool measured = false;
  std::string warning;
  std::uint64_t peak_rss_bytes = 0;
  std::optional<std::uint64_t> peak_swap_bytes;

  std::optional<std::uint64_t> sum_bytes() const {
    if (!measured || !peak_swap_bytes) return std::nullopt;
    return peak_rss_bytes + *peak_swap_bytes;
  }
};

/// Raised by time_stage when the action throws; carries the elapsed time.
class StageFailure : public Error {
 public:
  StageFailure(StageTiming timing, const std::string& what) : Error(what), timing_(timing) {}
  const StageTiming& timing() const { return timing_; }

 private:
  StageTiming timing_;
};

using Clock = std::chrono::steady_clock;

StageTiming time_stage(const std::function<void()>& action, Clock::time_point epoch = Clock::now());

struct ProcessMemory {
  std::uint64_t rss_bytes = 0;
  std::optional<std::uint64_t> swap_bytes;
  std::optional<std::uint64_t> hwm_bytes;
};
std::optional<ProcessMemory> read_process_memory();

// Background poller of the process RSS and swap. Where the kernel allows it the
// RSS high-water mark is reset on start and folded into the result, so peaks
// shorter than the interval are still seen.
class MemorySampler {
 public:
  explicit MemorySampler(unsigned interval_ms = 50);
  ~MemorySampler();
  MemorySampler(const MemorySampler&) = delete;
  MemorySampler& operator=(const MemorySampler&) = delete;

  void start();
  MemorySample stop();

 private:
  struct State;
  unsigned interval_ms_;
  State* state_;
};

MemorySample sample_memory(const std::function<void()>& action, unsigned interval_ms = 50);

struct BenchOptions {
  std::set<Config> configs{Config::full, Config::sliced};
  unsigned interval_ms = 50;
  std::size_t repeat = 1;
  bool sample_memory = true;
};

struct TimeRow {
  Stage stage;
  Config config;
  std::optional<std::size_t> slice_id;  // unset: full "--" or sliced "Total"
  metrics::SummaryStats seconds;
};

// Sliced memory rows summarize, per input, the largest peak over all slices.
struct MemoryRow {
  Stage stage;
  Config config;
  metrics::SummaryStats rss_mb;
  std::optional<metrics::SummaryStats> swap_mb;
  std::optional<metrics::SummaryStats> sum_mb;
  std::optional<metrics::SummaryStats> allocated_mb;  // no source for the reference backend
};

struct BenchReport {
  std::vector<std::pair<std::string, std::string>> environment;
  std::size_t inputs = 0;
  std::size_t slice_count = 0;
  std::vector<StageTiming> timings;
  std::vector<MemorySample> memory;
  std::vector<TimeRow> time_rows;
  std::vector<MemoryRow> memory_rows;
  std::vector<std::string> failures;

  std::string to_json() const;
  std::string time_csv() const;
  std::string memory_csv() const;
  std::string render_time_table() const;
  std::string render_memory_table() const;
};

BenchReport run_benchmark(const ModelGraph& model, const SlicePlan& sliced_plan, const AdaptConfig& cfg,
                          const std::vector<FloatTensor>& inputs, const ProvingBackend& backend,
                          const BenchOptions& options = {});

}  // namespace slicewise::bench
