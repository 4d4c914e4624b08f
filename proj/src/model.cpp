#include "slicewise/model.hpp"

#include <charconv>
#include <set>
#include <sstream>

#include "slicewise/error.hpp"
#include "slicewise/model_io.hpp"
#include "slicewise/ops.hpp"

namespace slicewise {

namespace {

constexpr LayerKind kLenetKinds[] = {
    LayerKind::conv2d, LayerKind::relu,   LayerKind::maxpool2d, LayerKind::conv2d,
    LayerKind::relu,   LayerKind::maxpool2d, LayerKind::flatten, LayerKind::linear,
    LayerKind::relu,   LayerKind::linear, LayerKind::relu,      LayerKind::linear};

std::size_t parse_index(std::string_view text, std::string_view expression) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
    throw ValidationError("malformed slice boundary '" + std::string(text) + "' in '" +
                          std::string(expression) + "'");
  return value;
}

std::string trim(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  return std::string(s);
}

void plan_structure_violations(const SlicePlan& plan, std::size_t layer_count,
                               std::vector<std::string>& out) {
  if (plan.ranges.empty()) {
    out.push_back("slice plan is empty");
    return;
  }
  if (plan.ranges.front().start != 0)
    out.push_back("first slice must start at layer 0, starts at " +
                  std::to_string(plan.ranges.front().start));
  for (std::size_t i = 0; i < plan.ranges.size(); ++i) {
    const SliceRange& r = plan.ranges[i];
    if (r.end <= r.start)
      out.push_back("slice " + std::to_string(i + 1) + " is empty or reversed (" +
                    std::to_string(r.start) + "-" + std::to_string(r.end) + ")");
    if (r.end > layer_count)
      out.push_back("slice " + std::to_string(i + 1) + " boundary " + std::to_string(r.end) +
                    " lies outside the " + std::to_string(layer_count) + "-layer model");
    if (i + 1 < plan.ranges.size() && plan.ranges[i + 1].start != r.end) {
      const SliceRange& next = plan.ranges[i + 1];
      out.push_back(std::string(next.start > r.end ? "gap" : "overlap") + " between slice " +
                    std::to_string(i + 1) + " (ends " + std::to_string(r.end) + ") and slice " +
                    std::to_string(i + 2) + " (starts " + std::to_string(next.start) + ")");
    }
  }
  if (plan.ranges.back().end != layer_count)
    out.push_back("last slice must end at layer " + std::to_string(layer_count) + ", ends at " +
                  std::to_string(plan.ranges.back().end));
}

void expect_param(std::vector<std::string>& problems, std::size_t index, const LayerSpec& l,
                  std::size_t value, const char* name) {
  if (value == 0)
    problems.push_back("layer " + std::to_string(index) + " (" + std::string(to_string(l.kind)) +
                       "): parameter '" + name + "' must be positive");
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::flatten: return "flatten";
    case LayerKind::linear: return "linear";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(std::string_view name) {
  if (name == "conv2d") return LayerKind::conv2d;
  if (name == "relu") return LayerKind::relu;
  if (name == "maxpool2d") return LayerKind::maxpool2d;
  if (name == "flatten") return LayerKind::flatten;
  if (name == "linear") return LayerKind::linear;
  throw FormatError("unknown layer kind '" + std::string(name) + "'");
}

std::string LayerSpec::describe() const {
  std::ostringstream s;
  switch (kind) {
    case LayerKind::conv2d:
      s << "Conv2D(" << in_channels << "->" << out_channels << ", kernel=" << kernel
        << ", stride=" << stride << ")";
      break;
    case LayerKind::relu: s << "ReLU"; break;
    case LayerKind::maxpool2d: s << "MaxPool(" << window << "x" << window << ")"; break;
    case LayerKind::flatten: s << "Flatten"; break;
    case LayerKind::linear: s << "Linear(" << in_features << "->" << out_features << ")"; break;
  }
  return s.str();
}

LayerSpec LayerSpec::conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                            std::size_t stride, std::string weight_ref, std::string bias_ref) {
  LayerSpec l;
  l.kind = LayerKind::conv2d;
  l.in_channels = in_ch;
  l.out_channels = out_ch;
  l.kernel = kernel;
  l.stride = stride;
  l.weight_ref = std::move(weight_ref);
  l.bias_ref = std::move(bias_ref);
  return l;
}

LayerSpec LayerSpec::linear(std::size_t in_features, std::size_t out_features,
                            std::string weight_ref, std::string bias_ref) {
  LayerSpec l;
  l.kind = LayerKind::linear;
  l.in_features = in_features;
  l.out_features = out_features;
  l.weight_ref = std::move(weight_ref);
  l.bias_ref = std::move(bias_ref);
  return l;
}

LayerSpec LayerSpec::maxpool2d(std::size_t window) {
  LayerSpec l;
  l.kind = LayerKind::maxpool2d;
  l.window = window;
  return l;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::flatten() {
  LayerSpec l;
  l.kind = LayerKind::flatten;
  return l;
}

const FloatTensor& ModelGraph::weight(const std::string& ref) const {
  auto it = weights.find(ref);
  if (it == weights.end()) throw ValidationError("missing weight '" + ref + "'");
  return it->second;
}

std::string SlicePlan::to_string() const {
  std::string s;
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(ranges[i].start) + "-" + std::to_string(ranges[i].end);
  }
  return s;
}

std::vector<Shape> infer_shapes(const ModelGraph& model) {
  std::vector<Shape> shapes;
  shapes.reserve(model.layers.size());
  Shape cur = model.input_shape;
  if (cur.empty()) throw ShapeError("model input shape is empty");
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& l = model.layers[i];
    auto fail = [&](const std::string& why) {
      throw ShapeError("layer " + std::to_string(i) + " " + l.describe() + ": " + why +
                       " (input " + shape_string(cur) + ")");
    };
    switch (l.kind) {
      case LayerKind::conv2d:
        if (cur.size() != 3) fail("expects a [C,H,W] input");
        if (cur[0] != l.in_channels) fail("channel mismatch");
        if (l.kernel == 0 || l.stride == 0) fail("kernel and stride must be positive");
        if (cur[1] < l.kernel || cur[2] < l.kernel) fail("input smaller than kernel");
        cur = {l.out_channels, (cur[1] - l.kernel) / l.stride + 1, (cur[2] - l.kernel) / l.stride + 1};
        break;
      case LayerKind::relu: break;
      case LayerKind::maxpool2d:
        if (cur.size() != 3) fail("expects a [C,H,W] input");
        if (l.window == 0 || cur[1] % l.window || cur[2] % l.window) fail("spatial dims not divisible by window");
        cur = {cur[0], cur[1] / l.window, cur[2] / l.window};
        break;
      case LayerKind::flatten: cur = {element_count(cur)}; break;
      case LayerKind::linear:
        if (cur.size() != 1) fail("expects a flattened vector input");
        if (cur[0] != l.in_features) fail("in_features mismatch");
        cur = {l.out_features};
        break;
    }
    for (std::size_t d : cur)
      if (d == 0) fail("produces an empty dimension");
    shapes.push_back(cur);
  }
  return shapes;
}

void check_model(const ModelGraph& model) {
  std::vector<std::string> problems;
  if (model.layers.empty()) problems.push_back("model has no layers");
  if (model.input_shape.empty()) problems.push_back("model input shape is empty");
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& l = model.layers[i];
    std::string where = "layer " + std::to_string(i) + " (" + std::string(to_string(l.kind)) + ")";
    switch (l.kind) {
      case LayerKind::conv2d:
        expect_param(problems, i, l, l.in_channels, "in_channels");
        expect_param(problems, i, l, l.out_channels, "out_channels");
        expect_param(problems, i, l, l.kernel, "kernel");
        expect_param(problems, i, l, l.stride, "stride");
        break;
      case LayerKind::maxpool2d: expect_param(problems, i, l, l.window, "window"); break;
      case LayerKind::linear:
        expect_param(problems, i, l, l.in_features, "in_features");
        expect_param(problems, i, l, l.out_features, "out_features");
        break;
      default: break;
    }
    if (l.has_parameters()) {
      if (!l.weight_ref || !l.bias_ref) {
        problems.push_back(where + ": weight_ref and bias_ref are required");
        continue;
      }
      Shape want_w = l.kind == LayerKind::conv2d
                         ? Shape{l.out_channels, l.in_channels, l.kernel, l.kernel}
                         : Shape{l.out_features, l.in_features};
      Shape want_b = {l.kind == LayerKind::conv2d ? l.out_channels : l.out_features};
      for (auto [ref, want] : {std::pair{*l.weight_ref, want_w}, std::pair{*l.bias_ref, want_b}}) {
        auto it = model.weights.find(ref);
        if (it == model.weights.end())
          problems.push_back(where + ": missing weight '" + ref + "'");
        else if (it->second.shape() != want)
          problems.push_back(where + ": weight '" + ref + "' has shape " +
                             shape_string(it->second.shape()) + ", expected " + shape_string(want));
      }
    } else if (l.weight_ref || l.bias_ref) {
      problems.push_back(where + ": layer kind takes no weights");
    }
  }
  if (problems.empty()) {
    try {
      infer_shapes(model);
    } catch (const ShapeError& e) {
      problems.push_back(e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid model:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ValidationError(msg);
  }
}

ValidationReport validate_constraints(const ModelGraph& model, const SlicePlan& plan) {
  ValidationReport report;
  try {
    check_model(model);
  } catch (const Error& e) {
    report.violations.push_back(e.what());
  }
  plan_structure_violations(plan, model.layers.size(), report.violations);
  if (!report.ok()) return report;

  // Parameter ownership: every weight belongs to exactly one slice.
  std::map<std::string, std::set<std::size_t>> owners;
  for (std::size_t s = 0; s < plan.ranges.size(); ++s) {
    for (std::size_t i = plan.ranges[s].start; i < plan.ranges[s].end; ++i) {
      const LayerSpec& l = model.layers[i];
      if (l.weight_ref) owners[*l.weight_ref].insert(s);
      if (l.bias_ref) owners[*l.bias_ref].insert(s);
    }
  }
  for (const auto& [ref, slices] : owners) {
    if (slices.size() > 1) {
      std::string list;
      for (std::size_t s : slices) list += (list.empty() ? "" : ", ") + std::to_string(s + 1);
      report.violations.push_back("parameter reuse across slices: '" + ref + "' is used by slices " + list);
    }
  }
  for (const auto& [ref, tensor] : model.weights) {
    if (!owners.count(ref)) report.violations.push_back("weight '" + ref + "' is not used by any layer");
  }

  // Dataflow: each slice consumes exactly the previous slice's output.
  std::vector<Shape> shapes = infer_shapes(model);
  for (std::size_t s = 1; s < plan.ranges.size(); ++s) {
    const Shape& produced = shapes[plan.ranges[s - 1].end - 1];
    const Shape& consumed = plan.ranges[s].start == 0 ? model.input_shape : shapes[plan.ranges[s].start - 1];
    if (produced != consumed)
      report.violations.push_back("boundary " + std::to_string(s) + "->" + std::to_string(s + 1) +
                                  " shape mismatch");
  }
  return report;
}

SlicePlan parse_plan(std::string_view expression, std::size_t layer_count) {
  SlicePlan plan;
  std::string_view rest = expression;
  while (!rest.empty()) {
    std::size_t comma = rest.find(',');
    std::string item = trim(rest.substr(0, comma));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    std::size_t dash = item.find('-');
    if (dash == std::string::npos)
      throw ValidationError("slice range '" + item + "' must look like start-end");
    std::string_view view(item);
    plan.ranges.push_back({parse_index(view.substr(0, dash), expression),
                           parse_index(view.substr(dash + 1), expression)});
  }
  std::vector<std::string> problems;
  plan_structure_violations(plan, layer_count, problems);
  if (!problems.empty()) {
    std::string msg = "invalid slice plan '" + std::string(expression) + "':";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ValidationError(msg);
  }
  return plan;
}

SlicePlan whole_model_plan(const ModelGraph& model) { return {{{0, model.layers.size()}}}; }

SlicePlan plan_slices(const ModelGraph& model, std::string_view spec) {
  if (spec == "whole" || spec == "full") return whole_model_plan(model);
  if (spec == "lenet5") {
    bool matches = model.layers.size() == std::size(kLenetKinds);
    for (std::size_t i = 0; matches && i < model.layers.size(); ++i)
      matches = model.layers[i].kind == kLenetKinds[i];
    if (!matches) throw ValidationError("preset lenet5 requires the 12-layer LeNet-5 layer sequence");
    // conv-relu-pool | conv-relu-pool | flatten-linear-relu | linear-relu | linear
    return {{{0, 3}, {3, 6}, {6, 9}, {9, 11}, {11, 12}}};
  }
  return parse_plan(spec, model.layers.size());
}

ModelGraph extract_slice(const ModelGraph& model, const SlicePlan& plan, std::size_t index) {
  if (index >= plan.ranges.size())
    throw ValidationError("slice index " + std::to_string(index) + " out of range (plan has " +
                          std::to_string(plan.ranges.size()) + " slices)");
  const SliceRange& r = plan.ranges[index];
  if (r.end <= r.start || r.end > model.layers.size()) throw ValidationError("slice range out of bounds");
  ModelGraph sub;
  sub.input_shape = r.start == 0 ? model.input_shape : infer_shapes(model)[r.start - 1];
  sub.layers.assign(model.layers.begin() + static_cast<std::ptrdiff_t>(r.start),
                    model.layers.begin() + static_cast<std::ptrdiff_t>(r.end));
  for (const LayerSpec& l : sub.layers) {
    if (l.weight_ref) sub.weights.emplace(*l.weight_ref, model.weight(*l.weight_ref));
    if (l.bias_ref) sub.weights.emplace(*l.bias_ref, model.weight(*l.bias_ref));
  }
  return sub;
}

FloatTensor apply_float_layer(const ModelGraph& model, const LayerSpec& l, const FloatTensor& x) {
  switch (l.kind) {
    case LayerKind::conv2d:
      return ops::conv2d(x, model.weight(*l.weight_ref), model.weight(*l.bias_ref), l.stride);
    case LayerKind::relu: return ops::relu(x);
    case LayerKind::maxpool2d: return ops::maxpool2d(x, l.window);
    case LayerKind::flatten: return ops::flatten(x);
    case LayerKind::linear:
      return ops::linear(x, model.weight(*l.weight_ref), model.weight(*l.bias_ref));
  }
  throw ValidationError("unsupported layer kind");
}

FloatTensor run_float_inference(const ModelGraph& model, const FloatTensor& input) {
  if (input.shape() != model.input_shape)
    throw ShapeError("input shape " + shape_string(input.shape()) + " does not match model input " +
                     shape_string(model.input_shape));
  FloatTensor x = input;
  for (const LayerSpec& l : model.layers) x = apply_float_layer(model, l, x);
  return x;
}

std::vector<SliceManifest> build_manifests(const ModelGraph& model, const SlicePlan& plan) {
  std::vector<Shape> shapes = infer_shapes(model);
  std::vector<SliceManifest> out;
  for (std::size_t s = 0; s < plan.ranges.size(); ++s) {
    const SliceRange& r = plan.ranges[s];
    SliceManifest m;
    m.slice_id = s;
    m.range = r;
    m.input_shape = r.start == 0 ? model.input_shape : shapes[r.start - 1];
    m.output_shape = shapes[r.end - 1];
    for (std::size_t i = r.start; i < r.end; ++i) {
      const LayerSpec& l = model.layers[i];
      if (l.weight_ref) m.weight_digests[*l.weight_ref] = weight_digest(model.weight(*l.weight_ref));
      if (l.bias_ref) m.weight_digests[*l.bias_ref] = weight_digest(model.weight(*l.bias_ref));
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace slicewise
