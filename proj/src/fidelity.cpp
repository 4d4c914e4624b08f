#include "slicewise/fidelity.hpp"

#include <atomic>
#include <iomanip>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "slicewise/error.hpp"
#include "slicewise/model_io.hpp"

namespace slicewise {

using nlohmann::json;

namespace {

std::string num(double v) {
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

std::string sci(double v) {
  std::ostringstream o;
  o << std::scientific << std::setprecision(6) << v;
  return o.str();
}

double metric_of(const metrics::FidelitySample& s, std::size_t m) {
  switch (m) {
    case 0: return s.d1;
    case 1: return s.d2;
    case 2: return s.tvd;
    default: return s.jsd;
  }
}

constexpr const char* kMetricNames[] = {"D1", "D2", "TVD", "JSD"};

json stats_json(const metrics::SummaryStats& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"max", s.max}};
}

}  // namespace

FieldTensor run_adapted_chain(const std::vector<AdaptedSlice>& slices, const FloatTensor& input) {
  if (slices.empty()) throw ValidationError("no slices to run");
  if (input.shape() != slices.front().input_shape)
    throw ShapeError("input shape " + shape_string(input.shape()) + " does not match model input " +
                     shape_string(slices.front().input_shape));
  FieldTensor x = quantize_tensor(input, slices.front().input_scale_bits);
  for (const AdaptedSlice& s : slices) x = run_adapted(s, x).output;
  return x;
}

std::size_t FidelityReport::evaluated() const {
  std::size_t n = 0;
  for (const FidelityRow& r : rows) n += r.error.empty() ? 1 : 0;
  return n;
}

FidelityReport measure_fidelity_batch(const ModelGraph& model, const SlicePlan& plan, const AdaptConfig& cfg,
                                      const std::vector<FloatTensor>& inputs, const std::vector<std::string>& ids,
                                      std::size_t jobs) {
  if (inputs.empty()) throw ValidationError("fidelity batch is empty");
  if (ids.size() != inputs.size()) throw ValidationError("one id per input is required");
  ValidationReport check = validate_constraints(model, plan);
  if (!check.ok()) throw ValidationError("slice plan rejected: " + check.violations.front());

  AdaptConfig global = cfg;
  global.per_slice_scales.clear();
  std::vector<AdaptedSlice> whole = adapt_plan(model, whole_model_plan(model), global);
  std::vector<AdaptedSlice> sliced = adapt_plan(model, plan, cfg);

  FidelityReport rep;
  rep.model_digest = model_digest(model).hex();
  rep.plan = plan.to_string();
  rep.scale_bits = cfg.scale_bits;
  rep.per_slice_scales = cfg.per_slice_scales;
  rep.rows.resize(inputs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < inputs.size(); i = next++) {
      FidelityRow& row = rep.rows[i];
      row.input_id = ids[i];
      try {
        FloatTensor ref = run_float_inference(model, inputs[i]);
        FloatTensor zu = dequantize_tensor(run_adapted_chain(whole, inputs[i]));
        FloatTensor zs = dequantize_tensor(run_adapted_chain(sliced, inputs[i]));
        row.unsliced = metrics::measure_fidelity(ref.data(), zu.data());
        row.sliced = metrics::measure_fidelity(ref.data(), zs.data());
      } catch (const std::exception& e) {
        row.unsliced.reset();
        row.sliced.reset();
        row.error = e.what();
      }
    }
  };
  std::size_t n = std::max<std::size_t>(1, std::min(jobs, inputs.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::size_t ok = rep.evaluated();
  if (ok == 0) return rep;
  std::size_t agree_u = 0, agree_s = 0;
  for (const FidelityRow& r : rep.rows) {
    if (!r.error.empty()) continue;
    agree_u += r.unsliced->agree ? 1 : 0;
    agree_s += r.sliced->agree ? 1 : 0;
  }
  rep.agreement_unsliced = static_cast<double>(agree_u) / static_cast<double>(ok);
  rep.agreement_sliced = static_cast<double>(agree_s) / static_cast<double>(ok);
  for (std::size_t m = 0; m < 4; ++m) {
    std::vector<double> u, s;
    for (const FidelityRow& r : rep.rows) {
      if (!r.error.empty()) continue;
      u.push_back(metric_of(*r.unsliced, m));
      s.push_back(metric_of(*r.sliced, m));
    }
    rep.summary.push_back({kMetricNames[m], metrics::summarize(u), metrics::summarize(s)});
  }
  return rep;
}

std::string FidelityReport::to_csv() const {
  std::string out =
      "input_id,d1_unsliced,d1_sliced,d2_unsliced,d2_sliced,tvd_unsliced,tvd_sliced,jsd_unsliced,jsd_sliced,"
      "argmax_float,argmax_unsliced,argmax_sliced,agree_unsliced,agree_sliced,error\n";
  for (const FidelityRow& r : rows) {
    out += r.input_id;
    if (r.error.empty()) {
      for (std::size_t m = 0; m < 4; ++m)
        out += "," + num(metric_of(*r.unsliced, m)) + "," + num(metric_of(*r.sliced, m));
      out += "," + std::to_string(r.unsliced->argmax_orig) + "," + std::to_string(r.unsliced->argmax_circ) + "," +
             std::to_string(r.sliced->argmax_circ) + "," + (r.unsliced->agree ? "1" : "0") + "," +
             (r.sliced->agree ? "1" : "0") + ",";
    } else {
      std::string msg = r.error;
      for (char& c : msg)
        if (c == '"' || c == '\n') c = '\'';
      out += std::string(14, ',') + "\"" + msg + "\"";
    }
    out += "\n";
  }
  return out;
}

std::string FidelityReport::to_json() const {
  json j;
  j["metadata"] = {{"model_digest", model_digest},
                   {"plan", plan},
                   {"scale_bits", scale_bits},
                   {"per_slice_scales", json::object()},
                   {"std", "population"},
                   {"discrepancy_normalized", false},
                   {"divergence_base", 2}};
  for (const auto& [k, v] : per_slice_scales) j["metadata"]["per_slice_scales"][std::to_string(k)] = v;
  j["inputs"] = rows.size();
  j["evaluated"] = evaluated();
  j["failed"] = rows.size() - evaluated();
  j["metrics"] = json::object();
  for (const MetricSummary& m : summary)
    j["metrics"][m.name] = {{"unsliced", stats_json(m.unsliced)}, {"sliced", stats_json(m.sliced)}};
  j["argmax_agreement"] = {{"unsliced", agreement_unsliced}, {"sliced", agreement_sliced}};
  return j.dump(2);
}

std::string FidelityReport::render_tables() const {
  std::ostringstream o;
  o << "Fidelity over " << evaluated() << " inputs (" << rows.size() - evaluated() << " failed)\n";
  for (std::size_t pair = 0; pair < 2 && summary.size() == 4; ++pair) {
    const MetricSummary& a = summary[2 * pair];
    const MetricSummary& b = summary[2 * pair + 1];
    std::string h[4] = {a.name + " Unsliced", a.name + " Sliced", b.name + " Unsliced", b.name + " Sliced"};
    o << "\n" << std::left << std::setw(6) << "";
    for (const auto& s : h) o << " | " << std::setw(14) << s;
    o << "\n";
    const char* names[] = {"mean", "std", "min", "max"};
    for (int w = 0; w < 4; ++w) {
      auto pick = [w](const metrics::SummaryStats& s) {
        return w == 0 ? s.mean : w == 1 ? s.std : w == 2 ? s.min : s.max;
      };
      o << std::setw(6) << names[w];
      for (double v : {pick(a.unsliced), pick(a.sliced), pick(b.unsliced), pick(b.sliced)})
        o << " | " << std::setw(14) << sci(v);
      o << "\n";
    }
  }
  o << "\nargmax agreement: unsliced " << agreement_unsliced << ", sliced " << agreement_sliced << "\n";
  return o.str();
}

}  // namespace slicewise
