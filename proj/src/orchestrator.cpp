#include "slicewise/orchestrator.hpp"

#include <atomic>
#include <thread>

#include "json.hpp"
#include "slicewise/model_io.hpp"
#include "slicewise/ops.hpp"

namespace slicewise {

using nlohmann::json;

namespace {

constexpr std::string_view kSemantics =
    "independent per-slice proofs plus a digest chain; not a single end-to-end proof";

struct NodeResult {
  Witness witness;
  FieldTensor forwarded;
};

// Logical worker executing the slices assigned to it.
class ProverNode {
 public:
  explicit ProverNode(const std::string& id) : id_(id) {}

  NodeResult execute(const AdaptedSlice& slice, const FieldTensor& input, const PipelineHooks& hooks) const {
    NodeResult r{run_adapted(slice, input), {}};
    r.forwarded = r.witness.output;
    if (hooks.tamper) hooks.tamper(slice.slice_id, r.witness, r.forwarded);
    return r;
  }

 private:
  const std::string& id_;
};

SliceRole role_from_string(std::string_view s) {
  for (SliceRole r : {SliceRole::proved, SliceRole::public_pre, SliceRole::private_range, SliceRole::public_post})
    if (to_string(r) == s) return r;
  throw FormatError("unknown slice role '" + std::string(s) + "'");
}

std::string slice_file(std::size_t k, const char* ext) { return "slice_" + std::to_string(k) + "." + ext; }

}  // namespace

std::string_view to_string(SliceRole role) {
  switch (role) {
    case SliceRole::proved: return "proved";
    case SliceRole::public_pre: return "public-pre";
    case SliceRole::private_range: return "private";
    case SliceRole::public_post: return "public-post";
  }
  return "unknown";
}

std::string_view to_string(Assurance a) {
  switch (a) {
    case Assurance::per_slice_proved: return "per-slice-proved";
    case Assurance::strategically_proved: return "strategically-proved";
    case Assurance::unproven: return "unproven";
  }
  return "unknown";
}

ExecutionPlan ExecutionPlan::all_proved(SlicePlan plan) {
  ExecutionPlan e;
  e.roles.assign(plan.slice_count(), SliceRole::proved);
  e.plan = std::move(plan);
  return e;
}

bool ExecutionPlan::proves(std::size_t slice) const {
  return roles.at(slice) == SliceRole::proved || roles.at(slice) == SliceRole::private_range;
}

Assurance ExecutionPlan::assurance() const {
  std::size_t proved = 0;
  for (std::size_t i = 0; i < roles.size(); ++i) proved += proves(i) ? 1 : 0;
  if (proved == 0) return Assurance::unproven;
  return proved == roles.size() && roles.size() > 0 &&
                 std::find(roles.begin(), roles.end(), SliceRole::private_range) == roles.end()
             ? Assurance::per_slice_proved
             : Assurance::strategically_proved;
}

ExecutionPlan strategic_split(const ModelGraph& model, SliceRange private_range) {
  std::size_t n = model.layers.size();
  if (private_range.end <= private_range.start) throw ValidationError("private range is empty");
  if (private_range.end > n) throw ValidationError("private range exceeds the model's " + std::to_string(n) + " layers");
  ExecutionPlan e;
  if (private_range.start > 0) {
    e.plan.ranges.push_back({0, private_range.start});
    e.roles.push_back(SliceRole::public_pre);
  }
  e.plan.ranges.push_back(private_range);
  e.roles.push_back(SliceRole::private_range);
  if (private_range.end < n) {
    e.plan.ranges.push_back({private_range.end, n});
    e.roles.push_back(SliceRole::public_post);
  }
  return e;
}

NodeAssignment assign_round_robin(std::size_t slice_count, std::size_t node_count) {
  if (node_count == 0) throw ValidationError("at least one node is required");
  NodeAssignment a;
  for (std::size_t i = 0; i < slice_count; ++i) a[i] = "node-" + std::to_string(i % node_count);
  return a;
}

ChainCheck check_chain(std::span<const SliceDigests> slices) {
  for (std::size_t b = 0; b + 1 < slices.size(); ++b) {
    if (slices[b].output != slices[b + 1].input) return {false, b};
  }
  return {true, std::nullopt};
}

bool RunRecord::all_accepted() const {
  for (const SliceRecord& s : slices)
    if (s.proof && !(s.verdict && s.verdict->accepted)) return false;
  return true;
}

Pipeline::Pipeline(const ModelGraph& model, ExecutionPlan plan, AdaptConfig cfg, const ProvingBackend& backend,
                   NodeAssignment assignment)
    : input_shape_(model.input_shape),
      model_digest_(model_digest(model)),
      plan_(std::move(plan)),
      cfg_(std::move(cfg)),
      backend_(backend),
      assignment_(std::move(assignment)) {
  if (plan_.roles.size() != plan_.plan.slice_count()) throw ValidationError("every slice needs a role");
  ValidationReport report = validate_constraints(model, plan_.plan);
  if (!report.ok()) {
    std::string msg = "slice plan rejected:";
    for (const auto& v : report.violations) msg += "\n  - " + v;
    throw ValidationError(msg);
  }
  if (assignment_.empty()) assignment_ = assign_round_robin(plan_.plan.slice_count(), plan_.plan.slice_count());
  for (std::size_t i = 0; i < plan_.plan.slice_count(); ++i)
    if (!assignment_.count(i)) throw ValidationError("slice " + std::to_string(i) + " is not assigned to a node");
  if (assignment_.size() != plan_.plan.slice_count()) throw ValidationError("assignment names unknown slices");
  slices_ = adapt_plan(model, plan_.plan, cfg_);
}

FieldTensor Pipeline::quantize_input(const FloatTensor& input) const {
  if (input.shape() != input_shape_)
    throw ShapeError("input shape " + shape_string(input.shape()) + " does not match model input " +
                     shape_string(input_shape_));
  return quantize_tensor(input, slices_.front().input_scale_bits);
}

RunRecord Pipeline::run(const FloatTensor& input, std::string input_id, const PipelineHooks& hooks) const {
  RunRecord rec;
  rec.input_id = std::move(input_id);
  rec.backend_id = backend_.descriptor().backend_id;
  rec.plan_expression = plan_.plan.to_string();
  rec.roles = plan_.roles;
  rec.scale_bits = cfg_.scale_bits;
  rec.per_slice_scales = cfg_.per_slice_scales;
  rec.model_digest = model_digest_;
  rec.assurance = plan_.assurance();

  FieldTensor x = quantize_input(input);
  std::vector<SliceDigests> declared;
  for (std::size_t i = 0; i < slices_.size(); ++i) {
    const AdaptedSlice& slice = slices_[i];
    SliceRecord sr;
    sr.slice_id = i;
    sr.node_id = assignment_.at(i);
    sr.role = plan_.roles[i];
    Digest delivered = tensor_digest(x);
    NodeResult out;
    try {
      out = ProverNode(sr.node_id).execute(slice, x, hooks);
      sr.witness_digest = sha256(serialize_witness(out.witness));
      if (plan_.proves(i)) {
        sr.proof = backend_.prove(slice, out.witness);
        sr.declared = {sr.proof->input_digest, sr.proof->output_digest};
      } else {
        sr.declared = {tensor_digest(out.witness.input), tensor_digest(out.witness.output)};
      }
    } catch (const Error& e) {
      throw PipelineError(i, e.what());
    }
    if (sr.proof) sr.verdict = backend_.verify(slice, *sr.proof, delivered, tensor_digest(out.forwarded));
    sr.witness = std::move(out.witness);
    declared.push_back(sr.declared);
    rec.slices.push_back(std::move(sr));
    x = std::move(out.forwarded);
  }
  rec.chain = check_chain(declared);
  rec.logits = x;
  rec.logits_float = dequantize_tensor(x);
  rec.predicted_class = ops::argmax(x.data());
  return rec;
}

RunRecord execute_pipeline(const ModelGraph& model, const SlicePlan& plan, const AdaptConfig& cfg,
                           const FloatTensor& input, const NodeAssignment& assignment,
                           const ProvingBackend& backend, std::string input_id) {
  Pipeline p(model, ExecutionPlan::all_proved(plan), cfg, backend, assignment);
  return p.run(input, std::move(input_id));
}

std::vector<BatchItem> run_batch(const Pipeline& pipeline, std::span<const FloatTensor> inputs,
                                 std::span<const std::string> ids, std::size_t jobs) {
  if (ids.size() != inputs.size()) throw ValidationError("one id per input is required");
  std::vector<BatchItem> out(inputs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < inputs.size(); i = next++) {
      try {
        out[i].record = pipeline.run(inputs[i], ids[i]);
      } catch (const std::exception& e) {
        out[i].error = e.what();
      }
    }
  };
  std::size_t n = std::max<std::size_t>(1, std::min(jobs, inputs.size()));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  return out;
}

std::string record_to_json(const RunRecord& r) {
  json j;
  j["input_id"] = r.input_id;
  j["backend_id"] = r.backend_id;
  j["model_digest"] = r.model_digest.hex();
  j["plan"] = r.plan_expression;
  j["roles"] = json::array();
  for (SliceRole role : r.roles) j["roles"].push_back(std::string(to_string(role)));
  j["scale_bits"] = r.scale_bits;
  j["per_slice_scales"] = json::object();
  for (const auto& [k, v] : r.per_slice_scales) j["per_slice_scales"][std::to_string(k)] = v;
  j["assurance"] = std::string(to_string(r.assurance));
  j["semantics"] = std::string(kSemantics);
  j["slices"] = json::array();
  for (const SliceRecord& s : r.slices) {
    json e = {{"slice_id", s.slice_id},
              {"node_id", s.node_id},
              {"role", std::string(to_string(s.role))},
              {"proved", s.proof.has_value()},
              {"input_digest", s.declared.input.hex()},
              {"output_digest", s.declared.output.hex()},
              {"witness_digest", s.witness_digest.hex()},
              {"circuit_digest", s.witness.circuit_digest.hex()}};
    if (s.verdict) e["verification"] = {{"accepted", s.verdict->accepted}, {"reason", s.verdict->reason}};
    else e["verification"] = nullptr;
    j["slices"].push_back(e);
  }
  j["boundary_digests"] = json::array();
  for (std::size_t i = 0; i + 1 < r.slices.size(); ++i) j["boundary_digests"].push_back(r.slices[i].declared.output.hex());
  j["chain"] = {{"consistent", r.chain.consistent},
                {"broken_at", r.chain.broken_at ? json(*r.chain.broken_at) : json(nullptr)}};
  json ints = json::array();
  for (std::int64_t v : r.logits.data()) ints.push_back(std::to_string(v));
  j["logits"] = {{"scale_bits", r.logits.scale_bits()},
                 {"integer", ints},
                 {"dequantized", std::vector<double>(r.logits_float.data().begin(), r.logits_float.data().end())}};
  j["predicted_class"] = r.predicted_class;
  j["verified"] = r.verified();
  return j.dump(2);
}

void write_run_directory(const RunRecord& record, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const SliceRecord& s : record.slices) {
    write_file((dir / slice_file(s.slice_id, "witness")).string(), serialize_witness(s.witness));
    if (s.proof) write_file((dir / slice_file(s.slice_id, "proof")).string(), serialize_artifact(*s.proof));
  }
  write_file((dir / "record.json").string(), record_to_json(record));
}

RunVerification verify_run_directory(const ModelGraph& model, const std::filesystem::path& dir,
                                     const ProvingBackend& backend) {
  RunVerification out;
  auto problem = [&](std::string msg) {
    out.ok = false;
    out.problems.push_back(std::move(msg));
  };
  json rec;
  try {
    std::vector<std::uint8_t> bytes = read_file((dir / "record.json").string());
    rec = json::parse(bytes.begin(), bytes.end());
  } catch (const std::exception& e) {
    problem(std::string("cannot read record.json: ") + e.what());
    return out;
  }

  std::vector<AdaptedSlice> slices;
  ExecutionPlan plan;
  try {
    if (rec.at("model_digest").get<std::string>() != model_digest(model).hex()) {
      problem("model digest does not match the run record");
      return out;
    }
    plan.plan = parse_plan(rec.at("plan").get<std::string>(), model.layers.size());
    for (const auto& role : rec.at("roles")) plan.roles.push_back(role_from_string(role.get<std::string>()));
    if (plan.roles.size() != plan.plan.slice_count()) throw FormatError("roles do not match plan");
    AdaptConfig cfg;
    cfg.scale_bits = rec.at("scale_bits").get<int>();
    for (const auto& [k, v] : rec.at("per_slice_scales").items()) cfg.per_slice_scales[std::stoul(k)] = v.get<int>();
    slices = adapt_plan(model, plan.plan, cfg);
  } catch (const std::exception& e) {
    problem(std::string("invalid run record: ") + e.what());
    return out;
  }

  const json& rslices = rec.at("slices");
  if (rslices.size() != slices.size()) {
    problem("run record lists " + std::to_string(rslices.size()) + " slices, plan has " + std::to_string(slices.size()));
    return out;
  }
  std::vector<SliceDigests> declared(slices.size());
  for (std::size_t k = 0; k < slices.size(); ++k) {
    const json& rs = rslices[k];
    std::string tag = "slice " + std::to_string(k) + ": ";
    try {
      Digest rec_in = Digest::from_hex(rs.at("input_digest").get<std::string>());
      Digest rec_out = Digest::from_hex(rs.at("output_digest").get<std::string>());
      declared[k] = {rec_in, rec_out};
      std::vector<std::uint8_t> wbytes = read_file((dir / slice_file(k, "witness")).string());
      if (sha256(wbytes).hex() != rs.at("witness_digest").get<std::string>()) {
        problem(tag + "witness file digest mismatch");
      } else if (!plan.proves(k)) {
        Witness w = parse_witness(wbytes);
        if (tensor_digest(w.input) != rec_in || tensor_digest(w.output) != rec_out)
          problem(tag + "witness does not match recorded digests");
      }
      if (plan.proves(k)) {
        ProofArtifact p = parse_artifact(read_file((dir / slice_file(k, "proof")).string()));
        declared[k] = {p.input_digest, p.output_digest};
        Verdict v = backend.verify(slices[k], p, rec_in, rec_out);
        if (!v) problem(tag + "reject: " + v.reason);
      }
    } catch (const std::exception& e) {
      problem(tag + e.what());
    }
  }
  out.chain = check_chain(declared);
  if (!out.chain.consistent)
    problem("chain broken at boundary " + std::to_string(*out.chain.broken_at) + "->" +
            std::to_string(*out.chain.broken_at + 1));
  return out;
}

}  // namespace slicewise
