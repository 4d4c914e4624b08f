// Command-line driver: slice | adapt | run | prove | verify | fidelity | bench.

#include <cstring>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "slicewise/bench.hpp"
#include "slicewise/fidelity.hpp"
#include "slicewise/model_io.hpp"
#include "slicewise/orchestrator.hpp"
#include "slicewise/random.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace slicewise;

namespace {

struct Options {
  std::string model;
  std::string plan;
  std::string preset;
  int scale_bits = 16;
  std::string per_slice_scales;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t count = 1;
  std::size_t jobs = 1;
  unsigned interval = 50;
  std::vector<std::string> inputs;
  std::string strategic;
  std::size_t nodes = 0;
  std::string config = "both";
  std::size_t repeat = 1;
  std::string circuit;
  std::string witness;
  std::string proof;
  std::string run_dir;
};

ModelGraph open_model(const Options& o) {
  if (o.model.empty()) throw ValidationError("--model is required");
  if (!fs::exists(o.model)) throw ValidationError("model file not found: " + o.model);
  return load_model(o.model);
}

SlicePlan open_plan(const Options& o, const ModelGraph& m) {
  if (!o.plan.empty() && !o.preset.empty()) throw ValidationError("give either --plan or --preset, not both");
  return plan_slices(m, !o.plan.empty() ? o.plan : !o.preset.empty() ? o.preset : "lenet5");
}

AdaptConfig open_config(const Options& o) {
  AdaptConfig cfg;
  cfg.scale_bits = o.scale_bits;
  std::string spec = o.per_slice_scales;
  std::size_t pos = 0;
  while (pos < spec.size()) {
    std::size_t comma = spec.find(',', pos);
    std::string item = spec.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    std::size_t colon = item.find(':');
    if (colon == std::string::npos) throw ValidationError("per-slice scale '" + item + "' is not slice:bits");
    try {
      cfg.per_slice_scales[std::stoul(item.substr(0, colon))] = std::stoi(item.substr(colon + 1));
    } catch (const std::logic_error&) {
      throw ValidationError("per-slice scale '" + item + "' is not slice:bits");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  cfg.validate();
  return cfg;
}

std::vector<double> flatten_json(const json& j, Shape& shape, std::size_t depth) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array() || j.empty()) throw FormatError("input tensor must be a non-empty numeric array");
  if (shape.size() == depth) shape.push_back(j.size());
  else if (shape[depth] != j.size()) throw FormatError("ragged input array");
  std::vector<double> out;
  for (const auto& e : j) {
    auto part = flatten_json(e, shape, depth + 1);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

// JSON: nested arrays, or {"shape": [...], "data": [...]}. Binary: f32 LE with
// a "<stem>.shape.json" or "<file>.shape.json" sidecar holding the shape array.
FloatTensor load_input(const std::string& path) {
  std::vector<std::uint8_t> bytes = read_file(path);
  if (fs::path(path).extension() == ".bin") {
    fs::path a = fs::path(path).replace_extension(".shape.json"), b = path + ".shape.json";
    fs::path side = fs::exists(a) ? a : b;
    if (!fs::exists(side)) throw FormatError("binary input " + path + " has no shape sidecar");
    auto sb = read_file(side.string());
    Shape shape = json::parse(sb.begin(), sb.end()).get<Shape>();
    if (bytes.size() != element_count(shape) * 4)
      throw FormatError("binary input " + path + " does not match its shape " + shape_string(shape));
    std::vector<double> v(element_count(shape));
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::uint32_t u = 0;
      for (int b2 = 0; b2 < 4; ++b2) u |= static_cast<std::uint32_t>(bytes[4 * i + b2]) << (8 * b2);
      float f;
      std::memcpy(&f, &u, 4);
      v[i] = f;
    }
    return FloatTensor(shape, std::move(v));
  }
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw FormatError("input " + path + " is not valid JSON: " + e.what());
  }
  if (j.is_object()) {
    Shape shape = j.at("shape").get<Shape>();
    return FloatTensor(shape, j.at("data").get<std::vector<double>>());
  }
  Shape shape;
  std::vector<double> v = flatten_json(j, shape, 0);
  if (v.size() != element_count(shape)) throw FormatError("ragged input array");
  return FloatTensor(shape, std::move(v));
}

struct Batch {
  std::vector<FloatTensor> inputs;
  std::vector<std::string> ids;
  std::vector<std::string> errors;  // load failures, by position
};

Batch open_inputs(const Options& o, const ModelGraph& m, bool keep_failures) {
  Batch b;
  if (!o.inputs.empty()) {
    for (const std::string& p : o.inputs) {
      std::string id = fs::path(p).stem().string();
      try {
        b.inputs.push_back(load_input(p));
        b.ids.push_back(id);
      } catch (const Error& e) {
        if (!keep_failures) throw;
        b.errors.push_back(id + ": " + e.what());
      }
    }
    return b;
  }
  if (o.count == 0) throw ValidationError("--count must be positive");
  for (std::size_t i = 0; i < o.count; ++i) {
    b.inputs.push_back(random_input(m.input_shape, o.seed, i));
    b.ids.push_back("input-" + std::to_string(i));
  }
  return b;
}

fs::path out_dir(const Options& o, const char* fallback) {
  fs::path p = o.out.empty() ? fs::path(fallback) : fs::path(o.out);
  fs::create_directories(p);
  return p;
}

json manifest_json(const SliceManifest& s) {
  json w = json::object();
  for (const auto& [k, d] : s.weight_digests) w[k] = d.hex();
  json j = {{"slice_id", s.slice_id},
            {"layers", {s.range.start, s.range.end}},
            {"input_shape", s.input_shape},
            {"output_shape", s.output_shape},
            {"weight_digests", w}};
  if (s.circuit_digest) j["circuit_digest"] = s.circuit_digest->hex();
  return j;
}

void report_violations(const ValidationReport& r) {
  std::cerr << "slice plan violates " << r.violations.size() << " constraint(s):\n";
  for (const auto& v : r.violations) std::cerr << "  - " << v << "\n";
}

int cmd_slice(const Options& o) {
  ModelGraph m = open_model(o);
  SlicePlan plan = open_plan(o, m);
  ValidationReport r = validate_constraints(m, plan);
  if (!r.ok()) {
    report_violations(r);
    return 1;
  }
  fs::path dir = out_dir(o, "slices");
  json manifest = {{"model_digest", model_digest(m).hex()}, {"plan", plan.to_string()}, {"slices", json::array()}};
  std::vector<SliceManifest> ms = build_manifests(m, plan);
  for (std::size_t k = 0; k < plan.slice_count(); ++k) {
    write_file((dir / ("slice_" + std::to_string(k) + ".json")).string(), serialize_model(extract_slice(m, plan, k)));
    manifest["slices"].push_back(manifest_json(ms[k]));
  }
  write_file((dir / "manifest.json").string(), manifest.dump(2));
  std::cout << "wrote " << plan.slice_count() << " slice(s) and manifest.json to " << dir.string() << "\n";
  return 0;
}

int cmd_adapt(const Options& o) {
  ModelGraph m = open_model(o);
  SlicePlan plan = open_plan(o, m);
  ValidationReport r = validate_constraints(m, plan);
  if (!r.ok()) {
    report_violations(r);
    return 1;
  }
  std::vector<AdaptedSlice> slices = adapt_plan(m, plan, open_config(o));
  fs::path dir = out_dir(o, "circuits");
  json index = {{"model_digest", model_digest(m).hex()}, {"plan", plan.to_string()}, {"circuits", json::array()}};
  for (const AdaptedSlice& s : slices) {
    std::string name = "slice_" + std::to_string(s.slice_id) + ".circuit";
    write_file((dir / name).string(), serialize_circuit_file(s));
    index["circuits"].push_back({{"slice_id", s.slice_id},
                                 {"file", name},
                                 {"circuit_digest", s.circuit_digest.hex()},
                                 {"scale_bits", s.scale_bits},
                                 {"input_scale_bits", s.input_scale_bits}});
    std::cout << name << "  " << s.circuit_digest.hex() << "  f=" << s.scale_bits << "\n";
  }
  write_file((dir / "circuits.json").string(), index.dump(2));
  return 0;
}

void print_record(const RunRecord& r) {
  std::cout << r.input_id << ": " << (r.verified() ? "verified" : "NOT verified") << " ("
            << to_string(r.assurance) << "), class " << r.predicted_class << "\n";
  for (const SliceRecord& s : r.slices) {
    std::cout << "  slice " << s.slice_id << " [" << to_string(s.role) << "] on " << s.node_id << ": ";
    if (!s.verdict) std::cout << "not proved\n";
    else if (s.verdict->accepted) std::cout << "accepted\n";
    else std::cout << "rejected: " << s.verdict->reason << "\n";
  }
  if (!r.chain.consistent)
    std::cout << "  chain broken at boundary " << *r.chain.broken_at << "->" << *r.chain.broken_at + 1 << "\n";
}

SliceRange parse_range(const std::string& text) {
  std::size_t dash = text.find('-');
  std::size_t start = 0, end = 0;
  try {
    std::size_t used = 0;
    if (dash == std::string::npos) throw std::invalid_argument(text);
    start = std::stoul(text.substr(0, dash), &used);
    if (used != dash) throw std::invalid_argument(text);
    end = std::stoul(text.substr(dash + 1), &used);
    if (used != text.size() - dash - 1) throw std::invalid_argument(text);
  } catch (const std::logic_error&) {
    throw ValidationError("--strategic takes a single range start-end, got '" + text + "'");
  }
  return {start, end};
}

int cmd_run(const Options& o) {
  ModelGraph m = open_model(o);
  ExecutionPlan plan;
  if (!o.strategic.empty()) {
    if (!o.plan.empty() || !o.preset.empty()) throw ValidationError("--strategic replaces --plan/--preset");
    plan = strategic_split(m, parse_range(o.strategic));
  } else {
    plan = ExecutionPlan::all_proved(open_plan(o, m));
  }
  auto backend = make_backend("reference");
  std::size_t n = plan.plan.slice_count();
  Pipeline pipeline(m, plan, open_config(o), *backend, assign_round_robin(n, o.nodes == 0 ? n : o.nodes));
  Batch batch = open_inputs(o, m, false);
  fs::path dir = out_dir(o, "runs");
  bool all = true;
  for (std::size_t i = 0; i < batch.inputs.size(); ++i) {
    RunRecord r = pipeline.run(batch.inputs[i], batch.ids[i]);
    write_run_directory(r, dir / r.input_id);
    print_record(r);
    all = all && r.verified();
  }
  return all ? 0 : 1;
}

int cmd_prove(const Options& o) {
  if (o.circuit.empty() || o.witness.empty()) throw ValidationError("prove needs --circuit and --witness");
  AdaptedSlice slice = parse_circuit_file(read_file(o.circuit));
  Witness w = parse_witness(read_file(o.witness));
  auto backend = make_backend("reference");
  ProofArtifact p = backend->prove(slice, w);
  std::string out = o.out.empty() ? "slice_" + std::to_string(slice.slice_id) + ".proof" : o.out;
  write_file(out, serialize_artifact(p));
  std::cout << "wrote " << out << " (" << p.backend_id << ", slice " << p.slice_id << ")\n";
  return 0;
}

int cmd_verify(const Options& o) {
  auto backend = make_backend("reference");
  if (!o.run_dir.empty()) {
    RunVerification v = verify_run_directory(open_model(o), o.run_dir, *backend);
    for (const auto& p : v.problems) std::cout << "reject: " << p << "\n";
    std::cout << (v.ok ? "run verified\n" : "run NOT verified\n");
    return v.ok ? 0 : 1;
  }
  if (o.circuit.empty() || o.proof.empty()) throw ValidationError("verify needs --run, or --circuit and --proof");
  AdaptedSlice slice = parse_circuit_file(read_file(o.circuit));
  ProofArtifact p = parse_artifact(read_file(o.proof));
  Verdict v = backend->verify(slice, p, p.input_digest, p.output_digest);
  std::cout << (v ? "accepted\n" : "reject: " + v.reason + "\n");
  return v ? 0 : 1;
}

int cmd_fidelity(const Options& o) {
  ModelGraph m = open_model(o);
  SlicePlan plan = open_plan(o, m);
  Batch batch = open_inputs(o, m, true);
  if (batch.inputs.empty()) throw ValidationError("no input could be loaded");
  FidelityReport rep = measure_fidelity_batch(m, plan, open_config(o), batch.inputs, batch.ids, o.jobs);
  for (const std::string& e : batch.errors) {
    auto colon = e.find(": ");
    rep.rows.push_back({e.substr(0, colon), std::nullopt, std::nullopt, e.substr(colon + 2)});
  }
  fs::path dir = out_dir(o, "fidelity");
  write_file((dir / "fidelity.csv").string(), rep.to_csv());
  write_file((dir / "fidelity.json").string(), rep.to_json());
  std::cout << rep.render_tables();
  for (const FidelityRow& r : rep.rows)
    if (!r.error.empty()) std::cerr << "input " << r.input_id << " failed: " << r.error << "\n";
  return rep.evaluated() == rep.rows.size() ? 0 : 1;
}

int cmd_bench(const Options& o) {
  ModelGraph m = open_model(o);
  SlicePlan plan = open_plan(o, m);
  bench::BenchOptions opts;
  opts.interval_ms = o.interval;
  opts.repeat = o.repeat;
  if (o.config != "both") opts.configs = {bench::config_from_string(o.config)};
  auto backend = make_backend("reference");
  Batch batch = open_inputs(o, m, false);
  bench::BenchReport rep = bench::run_benchmark(m, plan, open_config(o), batch.inputs, *backend, opts);
  fs::path dir = out_dir(o, "bench");
  write_file((dir / "bench.json").string(), rep.to_json());
  write_file((dir / "bench_time.csv").string(), rep.time_csv());
  write_file((dir / "bench_memory.csv").string(), rep.memory_csv());
  std::cout << rep.render_time_table() << "\n" << rep.render_memory_table();
  for (const auto& f : rep.failures) std::cerr << "failure: " << f << "\n";
  return rep.failures.empty() ? 0 : 1;
}

void add_model_options(CLI::App* c, Options& o) {
  c->add_option("--model", o.model, "Model JSON file");
  c->add_option("--plan", o.plan, "Slice boundaries, e.g. 0-3,3-6,6-12");
  c->add_option("--preset", o.preset, "Named plan: lenet5 or whole");
  c->add_option("--out", o.out, "Output path");
}

void add_adapt_options(CLI::App* c, Options& o) {
  c->add_option("--scale-bits", o.scale_bits, "Global fixed-point fraction bits")->capture_default_str();
  c->add_option("--per-slice-scales", o.per_slice_scales, "Overrides as slice:bits,... (0-based slices)");
}

void add_input_options(CLI::App* c, Options& o) {
  c->add_option("--input", o.inputs, "Input tensor file(s): JSON array or f32 .bin with shape sidecar");
  c->add_option("--seed", o.seed, "Seed for generated uniform [0,1] inputs")->capture_default_str();
  c->add_option("--count", o.count, "Number of generated inputs")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slice, adapt, prove and verify feedforward models; measure fidelity and cost."};
  app.require_subcommand(1);
  Options o;

  auto* slice = app.add_subcommand("slice", "Validate a plan and write slice models plus a manifest");
  add_model_options(slice, o);

  auto* adapt = app.add_subcommand("adapt", "Write fixed-point circuit files for each slice");
  add_model_options(adapt, o);
  add_adapt_options(adapt, o);

  auto* run = app.add_subcommand("run", "Run, prove and verify the slice pipeline per input");
  add_model_options(run, o);
  add_adapt_options(run, o);
  add_input_options(run, o);
  run->add_option("--strategic", o.strategic, "Prove only this layer range, e.g. 11-12");
  run->add_option("--nodes", o.nodes, "Logical nodes for round-robin assignment (default: one per slice)");

  auto* prove = app.add_subcommand("prove", "Prove one slice from a circuit file and a witness file");
  prove->add_option("--circuit", o.circuit)->required();
  prove->add_option("--witness", o.witness)->required();
  prove->add_option("--out", o.out, "Proof output path");

  auto* verify = app.add_subcommand("verify", "Verify a run directory or a single proof");
  verify->add_option("--model", o.model, "Model JSON file (with --run)");
  verify->add_option("--run", o.run_dir, "Run directory holding record.json");
  verify->add_option("--circuit", o.circuit);
  verify->add_option("--proof", o.proof);

  auto* fid = app.add_subcommand("fidelity", "Compare adapted and float logits over a batch");
  add_model_options(fid, o);
  add_adapt_options(fid, o);
  add_input_options(fid, o);
  fid->add_option("--jobs", o.jobs, "Concurrent per-input pipelines")->capture_default_str();

  auto* bench = app.add_subcommand("bench", "Time and sample memory per stage, full vs sliced");
  add_model_options(bench, o);
  add_adapt_options(bench, o);
  add_input_options(bench, o);
  bench->add_option("--config", o.config, "full, sliced or both")->capture_default_str();
  bench->add_option("--repeat", o.repeat, "Passes over the batch")->capture_default_str();
  bench->add_option("--interval", o.interval, "Memory sampling interval in ms")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*slice) return cmd_slice(o);
    if (*adapt) return cmd_adapt(o);
    if (*run) return cmd_run(o);
    if (*prove) return cmd_prove(o);
    if (*verify) return cmd_verify(o);
    if (*fid) return cmd_fidelity(o);
    if (*bench) return cmd_bench(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
