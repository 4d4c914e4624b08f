#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "slicewise/digest.hpp"
#include "slicewise/tensor.hpp"

namespace slicewise {

enum class LayerKind { conv2d, relu, maxpool2d, flatten, linear };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

/// One layer of a chain model. Only the parameters of its own kind are
/// meaningful; conv2d and linear carry weight_ref/bias_ref into the weight map.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 0;
  std::size_t window = 0;
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  std::optional<std::string> weight_ref;
  std::optional<std::string> bias_ref;

  bool has_parameters() const { return kind == LayerKind::conv2d || kind == LayerKind::linear; }
  std::string describe() const;

  static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride,
                          std::string weight_ref, std::string bias_ref);
  static LayerSpec linear(std::size_t in_features, std::size_t out_features, std::string weight_ref,
                          std::string bias_ref);
  static LayerSpec maxpool2d(std::size_t window);
  static LayerSpec relu();
  static LayerSpec flatten();

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// A single-path model: layers execute in list order.
struct ModelGraph {
  Shape input_shape;
  std::vector<LayerSpec> layers;
  std::map<std::string, FloatTensor> weights;

  const FloatTensor& weight(const std::string& ref) const;
};

/// Half-open layer index range [start, end).
struct SliceRange {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  friend bool operator==(const SliceRange&, const SliceRange&) = default;
};

struct SlicePlan {
  std::vector<SliceRange> ranges;

  std::size_t slice_count() const { return ranges.size(); }
  std::string to_string() const;  // boundary expression, e.g. "0-3,3-6"
  friend bool operator==(const SlicePlan&, const SlicePlan&) = default;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

struct SliceManifest {
  std::size_t slice_id = 0;
  SliceRange range;
  Shape input_shape;
  Shape output_shape;
  std::map<std::string, Digest> weight_digests;
  std::optional<Digest> circuit_digest;
};

// Output shape of each layer; throws ShapeError on the first inconsistency.
std::vector<Shape> infer_shapes(const ModelGraph& model);

// Structural checks on the model alone (parameter completeness, weight shapes,
// shape inference). Throws ValidationError listing every problem found.
void check_model(const ModelGraph& model);

// Never throws; itemizes every violated slicing constraint.
ValidationReport validate_constraints(const ModelGraph& model, const SlicePlan& plan);

// Parses "0-3,3-6,..." and checks contiguity against the layer count.
SlicePlan parse_plan(std::string_view expression, std::size_t layer_count);

// Preset name ("lenet5", "whole") or boundary expression.
SlicePlan plan_slices(const ModelGraph& model, std::string_view spec);

SlicePlan whole_model_plan(const ModelGraph& model);

ModelGraph extract_slice(const ModelGraph& model, const SlicePlan& plan, std::size_t index);

FloatTensor run_float_inference(const ModelGraph& model, const FloatTensor& input);
FloatTensor apply_float_layer(const ModelGraph& model, const LayerSpec& layer, const FloatTensor& x);

std::vector<SliceManifest> build_manifests(const ModelGraph& model, const SlicePlan& plan);

}  // namespace slicewise
