#include "slicewise/bench.hpp"

#include <sys/utsname.h>

#include <algorithm>
#include <condition_variable>
#include <fstream>
#include <cctype>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "slicewise/simd.hpp"

namespace slicewise::bench {

using nlohmann::json;

namespace {

constexpr double kMiB = 1024.0 * 1024.0;

double since(Clock::time_point epoch, Clock::time_point t) { return std::chrono::duration<double>(t - epoch).count(); }

bool reset_peak_rss() {
  std::ofstream f("/proc/self/clear_refs");
  if (!f) return false;
  f << "5";
  f.flush();
  return static_cast<bool>(f);
}

std::string first_line_with(const char* path, std::string_view key) {
  std::ifstream f(path);
  std::string line;
  while (std::getline(f, line)) {
    if (line.rfind(key, 0) == 0) {
      auto colon = line.find(':');
      if (colon == std::string::npos) return {};
      auto value = line.substr(colon + 1);
      value.erase(0, value.find_first_not_of(" \t"));
      return value;
    }
  }
  return {};
}

std::string describe_os() {
  utsname u{};
  if (uname(&u) != 0) return "unknown";
  return std::string(u.sysname) + " " + u.release + " " + u.machine;
}

json stats_json(const metrics::SummaryStats& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"max", s.max}};
}

json optional_stats(const std::optional<metrics::SummaryStats>& s) { return s ? stats_json(*s) : json(nullptr); }

std::string slice_label(const TimeRow& r) {
  if (r.config == Config::full) return "--";
  return r.slice_id ? "Slice " + std::to_string(*r.slice_id + 1) : "Total";
}

std::string cfg_stage_label(Config c, Stage s) {
  std::string stage(to_string(s));
  stage[0] = static_cast<char>(std::toupper(stage[0]));
  return (c == Config::full ? "Full Inference " : "Per-slice ") + stage;
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(precision) << v;
  return o.str();
}

std::string table(const std::vector<std::vector<std::string>>& rows, const std::vector<bool>& separators) {
  std::vector<std::size_t> width;
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], r[c].size());
    }
  std::string rule = "+";
  for (std::size_t w : width) rule += std::string(w + 2, '-') + "+";
  std::string out = rule + "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += "|";
    for (std::size_t c = 0; c < width.size(); ++c) {
      std::string cell = c < rows[i].size() ? rows[i][c] : "";
      out += " " + cell + std::string(width[c] - cell.size(), ' ') + " |";
    }
    out += "\n";
    if (i == 0 || separators[i]) out += rule + "\n";
  }
  return out;
}

class Recorder {
 public:
  Recorder(BenchReport& report, Clock::time_point epoch, const BenchOptions& opts)
      : report_(report), epoch_(epoch), opts_(opts) {}

  // Times the action, sampling memory around it when requested.
  void measure(Stage stage, Config config, std::optional<std::size_t> slice, std::size_t input, bool memory,
               const std::function<void()>& action) {
    std::optional<MemorySampler> sampler;
    if (memory && opts_.sample_memory) {
      sampler.emplace(opts_.interval_ms);
      sampler->start();
    }
    StageTiming t;
    std::optional<std::string> failure;
    try {
      t = time_stage(action, epoch_);
    } catch (const StageFailure& e) {
      t = e.timing();
      failure = e.what();
    }
    t.stage = stage;
    t.config = config;
    t.slice_id = slice;
    t.input_index = input;
    if (sampler) {
      MemorySample m = sampler->stop();
      m.stage = stage;
      m.config = config;
      m.slice_id = slice;
      m.input_index = input;
      pending_memory_.push_back(m);
    }
    pending_timings_.push_back(t);
    if (failure) throw Error(*failure);
  }

  void commit() {
    report_.timings.insert(report_.timings.end(), pending_timings_.begin(), pending_timings_.end());
    report_.memory.insert(report_.memory.end(), pending_memory_.begin(), pending_memory_.end());
    discard();
  }
  void discard() {
    pending_timings_.clear();
    pending_memory_.clear();
  }

 private:
  BenchReport& report_;
  Clock::time_point epoch_;
  const BenchOptions& opts_;
  std::vector<StageTiming> pending_timings_;
  std::vector<MemorySample> pending_memory_;
};

void run_config(Recorder& rec, const std::vector<AdaptedSlice>& slices, Config config, const FloatTensor& input,
                std::size_t index, const ProvingBackend& backend) {
  std::size_t n = slices.size();
  std::vector<Witness> witnesses(n);
  std::vector<ProofArtifact> proofs(n);
  std::vector<Digest> delivered(n);
  bool sliced = config == Config::sliced;

  auto for_each_slice = [&](Stage stage, const std::function<void(std::size_t)>& body) {
    if (!sliced) {
      rec.measure(stage, config, std::nullopt, index, true, [&] { body(0); });
      return;
    }
    rec.measure(stage, config, std::nullopt, index, false, [&] {
      for (std::size_t k = 0; k < n; ++k) rec.measure(stage, config, k, index, true, [&] { body(k); });
    });
  };

  for_each_slice(Stage::witness, [&](std::size_t k) {
    FieldTensor x = k == 0 ? quantize_tensor(input, slices[0].input_scale_bits) : witnesses[k - 1].output;
    delivered[k] = tensor_digest(x);
    witnesses[k] = run_adapted(slices[k], x);
    (void)serialize_witness(witnesses[k]);
  });
  for_each_slice(Stage::proof, [&](std::size_t k) { proofs[k] = backend.prove(slices[k], witnesses[k]); });
  for_each_slice(Stage::verification, [&](std::size_t k) {
    Verdict v = backend.verify(slices[k], proofs[k], delivered[k], tensor_digest(witnesses[k].output));
    if (!v) throw Error("slice " + std::to_string(k) + " rejected: " + v.reason);
  });
}

std::optional<metrics::SummaryStats> summarize_if(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return metrics::summarize(v);
}

void aggregate(BenchReport& r, const BenchOptions& opts) {
  for (Stage stage : kStages) {
    for (Config config : {Config::full, Config::sliced}) {
      if (!opts.configs.count(config)) continue;
      std::vector<std::optional<std::size_t>> keys{std::nullopt};
      if (config == Config::sliced)
        for (std::size_t k = 0; k < r.slice_count; ++k) keys.push_back(k);
      for (const auto& key : keys) {
        std::vector<double> secs;
        for (const StageTiming& t : r.timings)
          if (t.stage == stage && t.config == config && t.slice_id == key) secs.push_back(t.seconds);
        if (!secs.empty()) r.time_rows.push_back({stage, config, key, metrics::summarize(secs)});
      }

      // Per input: the stage peak (full) or the largest slice peak (sliced).
      std::map<std::size_t, MemorySample> per_input;
      bool swap_everywhere = true;
      for (const MemorySample& m : r.memory) {
        if (m.stage != stage || m.config != config || !m.measured) continue;
        swap_everywhere = swap_everywhere && m.peak_swap_bytes.has_value();
        auto [it, fresh] = per_input.try_emplace(m.input_index, m);
        if (!fresh) {
          it->second.peak_rss_bytes = std::max(it->second.peak_rss_bytes, m.peak_rss_bytes);
          if (m.peak_swap_bytes && it->second.peak_swap_bytes)
            it->second.peak_swap_bytes = std::max(*it->second.peak_swap_bytes, *m.peak_swap_bytes);
        }
      }
      if (per_input.empty()) continue;
      std::vector<double> rss, swap, sum;
      for (const auto& [idx, m] : per_input) {
        rss.push_back(static_cast<double>(m.peak_rss_bytes) / kMiB);
        if (swap_everywhere) {
          swap.push_back(static_cast<double>(*m.peak_swap_bytes) / kMiB);
          sum.push_back(static_cast<double>(*m.sum_bytes()) / kMiB);
        }
      }
      r.memory_rows.push_back({stage, config, metrics::summarize(rss), summarize_if(swap), summarize_if(sum), {}});
    }
  }
}

}  // namespace

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::witness: return "witness";
    case Stage::proof: return "proof";
    case Stage::verification: return "verification";
  }
  return "unknown";
}

std::string_view to_string(Config c) { return c == Config::full ? "full" : "sliced"; }

Config config_from_string(std::string_view s) {
  if (s == "full" || s == "whole") return Config::full;
  if (s == "sliced") return Config::sliced;
  throw ValidationError("unknown bench config '" + std::string(s) + "' (expected full or sliced)");
}

StageTiming time_stage(const std::function<void()>& action, Clock::time_point epoch) {
  StageTiming t;
  auto begin = Clock::now();
  try {
    action();
  } catch (const std::exception& e) {
    auto end = Clock::now();
    t.start = since(epoch, begin);
    t.end = since(epoch, end);
    t.seconds = t.end - t.start;
    throw StageFailure(t, e.what());
  }
  auto end = Clock::now();
  t.start = since(epoch, begin);
  t.end = since(epoch, end);
  t.seconds = t.end - t.start;
  return t;
}

std::optional<ProcessMemory> read_process_memory() {
  std::ifstream f("/proc/self/status");
  if (!f) return std::nullopt;
  ProcessMemory m;
  bool have_rss = false;
  std::string line;
  while (std::getline(f, line)) {
    auto kb = [&](std::string_view key) -> std::optional<std::uint64_t> {
      if (line.rfind(key, 0) != 0) return std::nullopt;
      return std::stoull(line.substr(key.size())) * 1024;
    };
    if (auto v = kb("VmRSS:")) {
      m.rss_bytes = *v;
      have_rss = true;
    } else if (auto s = kb("VmSwap:")) {
      m.swap_bytes = *s;
    } else if (auto h = kb("VmHWM:")) {
      m.hwm_bytes = *h;
    }
  }
  if (!have_rss) return std::nullopt;
  return m;
}

struct MemorySampler::State {
  std::mutex mu;
  std::condition_variable cv;
  bool stopping = false;
  bool running = false;
  bool hwm_reset = false;
  std::thread thread;
  MemorySample sample;
  std::uint64_t max_rss = 0;
  std::optional<std::uint64_t> max_swap;

  void observe(const ProcessMemory& m) {
    max_rss = std::max(max_rss, m.rss_bytes);
    if (m.swap_bytes) max_swap = std::max(max_swap.value_or(0), *m.swap_bytes);
  }
};

MemorySampler::MemorySampler(unsigned interval_ms) : interval_ms_(std::max(1u, interval_ms)), state_(new State) {}

MemorySampler::~MemorySampler() {
  if (state_->running) stop();
  delete state_;
}

void MemorySampler::start() {
  State& s = *state_;
  if (s.running) throw Error("memory sampler already running");
  s.sample = {};
  s.max_rss = 0;
  s.max_swap.reset();
  s.stopping = false;
  auto first = read_process_memory();
  if (!first) {
    s.sample.warning = "process memory queries unavailable; stage ran unmeasured";
    return;
  }
  s.hwm_reset = reset_peak_rss();
  s.observe(*first);
  s.running = true;
  try {
    s.thread = std::thread([&s, interval = interval_ms_] {
      std::unique_lock lock(s.mu);
      while (!s.cv.wait_for(lock, std::chrono::milliseconds(interval), [&] { return s.stopping; })) {
        if (auto m = read_process_memory()) s.observe(*m);
      }
    });
  } catch (const std::system_error& e) {
    s.running = false;
    s.sample.warning = std::string("sampler thread failed to start: ") + e.what() + "; stage ran unmeasured";
  }
}

MemorySample MemorySampler::stop() {
  State& s = *state_;
  if (!s.running) return s.sample;
  {
    std::lock_guard lock(s.mu);
    s.stopping = true;
  }
  s.cv.notify_all();
  s.thread.join();
  s.running = false;
  if (auto m = read_process_memory()) {
    s.observe(*m);
    if (s.hwm_reset && m->hwm_bytes) s.max_rss = std::max(s.max_rss, *m->hwm_bytes);
  }
  s.sample.measured = true;
  s.sample.peak_rss_bytes = s.max_rss;
  s.sample.peak_swap_bytes = s.max_swap;
  return s.sample;
}

MemorySample sample_memory(const std::function<void()>& action, unsigned interval_ms) {
  MemorySampler sampler(interval_ms);
  sampler.start();
  try {
    action();
  } catch (...) {
    sampler.stop();
    throw;
  }
  return sampler.stop();
}

BenchReport run_benchmark(const ModelGraph& model, const SlicePlan& sliced_plan, const AdaptConfig& cfg,
                          const std::vector<FloatTensor>& inputs, const ProvingBackend& backend,
                          const BenchOptions& options) {
  if (inputs.empty()) throw ValidationError("benchmark batch is empty");
  if (options.configs.empty()) throw ValidationError("no benchmark configuration selected");
  if (options.repeat == 0) throw ValidationError("repeat must be at least 1");

  BenchReport report;
  report.inputs = inputs.size() * options.repeat;
  report.slice_count = sliced_plan.slice_count();
  bool hwm = reset_peak_rss();
  std::string cpu = first_line_with("/proc/cpuinfo", "model name");
  report.environment = {
      {"os", describe_os()},
      {"cpu", cpu.empty() ? "unknown" : cpu},
      {"hardware_threads", std::to_string(std::thread::hardware_concurrency())},
      {"simd_variant", std::string(simd::active().name)},
      {"backend_id", backend.descriptor().backend_id},
      {"sampling_interval_ms", std::to_string(options.interval_ms)},
      {"memory_source", !options.sample_memory ? "disabled"
                        : read_process_memory() ? (hwm ? "VmHWM reset per stage + VmRSS/VmSwap polling"
                                                       : "VmRSS/VmSwap polling")
                                                : "unavailable"},
      {"memory_unit", "MiB"},
      {"time_unit", "s"},
      {"std", "population"},
      {"repeat", std::to_string(options.repeat)},
      {"scale_bits", std::to_string(cfg.scale_bits)},
      {"sliced_plan", sliced_plan.to_string()},
  };

  AdaptConfig full_cfg = cfg;
  full_cfg.per_slice_scales.clear();
  std::vector<AdaptedSlice> full, sliced;
  if (options.configs.count(Config::full)) full = adapt_plan(model, whole_model_plan(model), full_cfg);
  if (options.configs.count(Config::sliced)) sliced = adapt_plan(model, sliced_plan, cfg);

  Recorder rec(report, Clock::now(), options);
  std::size_t index = 0;
  for (std::size_t rep = 0; rep < options.repeat; ++rep) {
    for (const FloatTensor& input : inputs) {
      for (Config config : options.configs) {
        try {
          run_config(rec, config == Config::full ? full : sliced, config, input, index, backend);
          rec.commit();
        } catch (const std::exception& e) {
          rec.discard();
          report.failures.push_back("input " + std::to_string(index) + " (" + std::string(to_string(config)) +
                                    "): " + e.what());
        }
      }
      ++index;
    }
  }
  aggregate(report, options);
  return report;
}

std::string BenchReport::to_json() const {
  json j;
  j["environment"] = json::object();
  for (const auto& [k, v] : environment) j["environment"][k] = v;
  j["inputs"] = inputs;
  j["slice_count"] = slice_count;
  j["time"] = json::array();
  for (const TimeRow& r : time_rows) {
    j["time"].push_back({{"stage", std::string(to_string(r.stage))},
                         {"config", std::string(to_string(r.config))},
                         {"slice", slice_label(r)},
                         {"seconds", stats_json(r.seconds)}});
  }
  j["memory"] = json::array();
  for (const MemoryRow& r : memory_rows) {
    j["memory"].push_back({{"stage", std::string(to_string(r.stage))},
                           {"config", std::string(to_string(r.config))},
                           {"ram", stats_json(r.rss_mb)},
                           {"swap", optional_stats(r.swap_mb)},
                           {"sum", optional_stats(r.sum_mb)},
                           {"allocated", optional_stats(r.allocated_mb)}});
  }
  j["failures"] = failures;
  json raw_t = json::array();
  for (const StageTiming& t : timings) {
    raw_t.push_back({{"input", t.input_index},
                     {"stage", std::string(to_string(t.stage))},
                     {"config", std::string(to_string(t.config))},
                     {"slice", t.slice_id ? json(*t.slice_id) : json(nullptr)},
                     {"seconds", t.seconds},
                     {"start", t.start},
                     {"end", t.end}});
  }
  json raw_m = json::array();
  for (const MemorySample& m : memory) {
    raw_m.push_back({{"input", m.input_index},
                     {"stage", std::string(to_string(m.stage))},
                     {"config", std::string(to_string(m.config))},
                     {"slice", m.slice_id ? json(*m.slice_id) : json(nullptr)},
                     {"measured", m.measured},
                     {"warning", m.warning},
                     {"peak_rss_bytes", m.peak_rss_bytes},
                     {"peak_swap_bytes", m.peak_swap_bytes ? json(*m.peak_swap_bytes) : json(nullptr)}});
  }
  j["samples"] = {{"timings", raw_t}, {"memory", raw_m}};
  return j.dump(2);
}

std::string BenchReport::time_csv() const {
  std::string out = "stage,config,slice,mean,std,min,max\n";
  for (const TimeRow& r : time_rows) {
    out += std::string(to_string(r.stage)) + "," + std::string(to_string(r.config)) + "," + slice_label(r) + "," +
           fmt(r.seconds.mean, 9) + "," + fmt(r.seconds.std, 9) + "," + fmt(r.seconds.min, 9) + "," +
           fmt(r.seconds.max, 9) + "\n";
  }
  return out;
}

std::string BenchReport::memory_csv() const {
  std::string out = "stage,config,stat,ram_mib,swap_mib,sum_mib,allocated_mib\n";
  for (const MemoryRow& r : memory_rows) {
    auto pick = [](const metrics::SummaryStats& s, int which) {
      return which == 0 ? s.mean : which == 1 ? s.std : which == 2 ? s.min : s.max;
    };
    auto cell = [&](const std::optional<metrics::SummaryStats>& s, int w) { return s ? fmt(pick(*s, w), 3) : ""; };
    const char* names[] = {"mean", "std", "min", "max"};
    for (int w = 0; w < 4; ++w) {
      out += std::string(to_string(r.stage)) + "," + std::string(to_string(r.config)) + "," + names[w] + "," +
             fmt(pick(r.rss_mb, w), 3) + "," + cell(r.swap_mb, w) + "," + cell(r.sum_mb, w) + "," +
             cell(r.allocated_mb, w) + "\n";
    }
  }
  return out;
}

std::string BenchReport::render_time_table() const {
  std::vector<std::vector<std::string>> rows{{"Cfg/Stage", "Slice", "mean", "std", "min", "max"}};
  std::vector<bool> sep{true};
  for (std::size_t i = 0; i < time_rows.size(); ++i) {
    const TimeRow& r = time_rows[i];
    bool first = i == 0 || time_rows[i - 1].stage != r.stage || time_rows[i - 1].config != r.config;
    rows.push_back({first ? cfg_stage_label(r.config, r.stage) : "", slice_label(r), fmt(r.seconds.mean),
                    fmt(r.seconds.std), fmt(r.seconds.min), fmt(r.seconds.max)});
    bool last = i + 1 == time_rows.size() || time_rows[i + 1].stage != r.stage || time_rows[i + 1].config != r.config;
    sep.push_back(last);
  }
  return "Runtime (seconds) over " + std::to_string(inputs) + " inputs\n" + table(rows, sep);
}

std::string BenchReport::render_memory_table() const {
  std::vector<std::vector<std::string>> rows{{"Cfg/Stage", "Stat", "RAM", "Swap", "Sum"}};
  std::vector<bool> sep{true};
  for (const MemoryRow& r : memory_rows) {
    const char* names[] = {"mean", "std", "min", "max"};
    auto pick = [](const metrics::SummaryStats& s, int w) {
      return w == 0 ? s.mean : w == 1 ? s.std : w == 2 ? s.min : s.max;
    };
    for (int w = 0; w < 4; ++w) {
      rows.push_back({w == 0 ? cfg_stage_label(r.config, r.stage) : "", names[w], fmt(pick(r.rss_mb, w), 3),
                      r.swap_mb ? fmt(pick(*r.swap_mb, w), 3) : "--", r.sum_mb ? fmt(pick(*r.sum_mb, w), 3) : "--"});
      sep.push_back(w == 3);
    }
  }
  return "Peak memory (MiB) over " + std::to_string(inputs) + " inputs\n" + table(rows, sep);
}

}  // namespace slicewise::bench
