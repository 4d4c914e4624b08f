#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "slicewise/error.hpp"
#include "slicewise/model.hpp"
#include "slicewise/random.hpp"

using namespace slicewise;

namespace {

bool mentions(const ValidationReport& r, std::string_view text) {
  for (const auto& v : r.violations)
    if (v.find(text) != std::string::npos) return true;
  return false;
}

// Chain of Linear(4->4)+ReLU pairs whose parameters come from a shared pool.
ModelGraph pooled_chain(const std::vector<int>& owner, Rng& rng) {
  ModelGraph m;
  m.input_shape = {4};
  for (int p : owner) {
    std::string base = "p" + std::to_string(p);
    m.layers.push_back(LayerSpec::linear(4, 4, base + ".w", base + ".b"));
    m.layers.push_back(LayerSpec::relu());
    if (!m.weights.count(base + ".w")) {
      m.weights.emplace(base + ".w", random_tensor({4, 4}, -1, 1, rng));
      m.weights.emplace(base + ".b", random_tensor({4}, -1, 1, rng));
    }
  }
  return m;
}

}  // namespace

TEST_CASE("layer descriptions") {
  CHECK(LayerSpec::conv2d(3, 6, 5, 1, "w", "b").describe() == "Conv2D(3->6, kernel=5, stride=1)");
  CHECK(LayerSpec::linear(400, 120, "w", "b").describe() == "Linear(400->120)");
  CHECK(layer_kind_from_string("maxpool2d") == LayerKind::maxpool2d);
  CHECK_THROWS_AS(layer_kind_from_string("lstm"), FormatError);
}

TEST_CASE("LeNet shape chain") {
  ModelGraph m = random_lenet(0);
  CHECK(m.input_shape == Shape{3, 32, 32});
  REQUIRE(m.layers.size() == 12);
  std::vector<Shape> expect{{6, 28, 28}, {6, 28, 28}, {6, 14, 14}, {16, 10, 10}, {16, 10, 10}, {16, 5, 5},
                            {400},       {120},       {120},       {84},        {84},        {10}};
  CHECK(infer_shapes(m) == expect);
  CHECK(m.layers[6].kind == LayerKind::flatten);
}

TEST_CASE("shape inference edge cases") {
  ModelGraph r;
  r.input_shape = {2, 3};
  r.layers = {LayerSpec::relu()};
  CHECK(infer_shapes(r) == std::vector<Shape>{{2, 3}});

  Rng rng(1);
  ModelGraph bad;
  bad.input_shape = {2, 4, 4};
  bad.layers = {LayerSpec::flatten(), LayerSpec::linear(30, 2, "w", "b")};
  bad.weights.emplace("w", random_tensor({2, 30}, -1, 1, rng));
  bad.weights.emplace("b", random_tensor({2}, -1, 1, rng));
  CHECK_THROWS_AS(infer_shapes(bad), ShapeError);
  CHECK_THROWS_AS(check_model(bad), ValidationError);
}

TEST_CASE("plans and presets") {
  ModelGraph m = random_lenet(0);
  SlicePlan p = plan_slices(m, "lenet5");
  REQUIRE(p.slice_count() == 5);
  CHECK(p.to_string() == "0-3,3-6,6-9,9-11,11-12");
  CHECK(validate_constraints(m, p).ok());

  std::vector<SliceManifest> ms = build_manifests(m, p);
  std::vector<Shape> ins{{3, 32, 32}, {6, 14, 14}, {16, 5, 5}, {120}, {84}};
  std::vector<Shape> outs{{6, 14, 14}, {16, 5, 5}, {120}, {84}, {10}};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(ms[i].input_shape == ins[i]);
    CHECK(ms[i].output_shape == outs[i]);
    if (i + 1 < 5) CHECK(ms[i].output_shape == ms[i + 1].input_shape);
  }
  CHECK(element_count(ms[1].output_shape) == 400);

  CHECK(plan_slices(m, "0-12").slice_count() == 1);
  CHECK(validate_constraints(m, plan_slices(m, "0-12")).ok());
  CHECK(plan_slices(m, "whole") == plan_slices(m, "0-12"));
  CHECK_THROWS_AS(plan_slices(m, "0-3,5-12"), ValidationError);
  CHECK_THROWS_AS(plan_slices(m, "0-3,2-12"), ValidationError);
  CHECK_THROWS_AS(plan_slices(m, "0-13"), ValidationError);
  CHECK_THROWS_AS(plan_slices(m, "0-3,3"), ValidationError);
  Rng rng(2);
  ModelGraph small = pooled_chain({0}, rng);
  CHECK_THROWS_AS(plan_slices(small, "lenet5"), ValidationError);
}

TEST_CASE("validate_constraints itemizes violations without throwing") {
  ModelGraph m = random_lenet(0);
  SlicePlan gap{{{0, 3}, {5, 12}}};
  ValidationReport r = validate_constraints(m, gap);
  CHECK_FALSE(r.ok());
  CHECK(mentions(r, "gap"));
  SlicePlan overlap{{{0, 4}, {3, 12}}};
  CHECK(mentions(validate_constraints(m, overlap), "overlap"));
  CHECK_FALSE(validate_constraints(m, SlicePlan{}).ok());
  CHECK_FALSE(validate_constraints(m, SlicePlan{{{0, 20}}}).ok());

  Rng rng(3);
  ModelGraph shared = pooled_chain({0, 1, 0}, rng);
  ValidationReport split = validate_constraints(shared, SlicePlan{{{0, 2}, {2, 6}}});
  CHECK(mentions(split, "parameter reuse across slices"));
  CHECK(validate_constraints(shared, SlicePlan{{{0, 6}}}).ok());

  ModelGraph unused = pooled_chain({0}, rng);
  unused.weights.emplace("orphan", random_tensor({1}, -1, 1, rng));
  CHECK(mentions(validate_constraints(unused, SlicePlan{{{0, 2}}}), "not used by any layer"));

  ModelGraph broken;
  broken.input_shape = {4};
  broken.layers = {LayerSpec::linear(5, 4, "w", "b")};
  broken.weights.emplace("w", random_tensor({4, 5}, -1, 1, rng));
  broken.weights.emplace("b", random_tensor({4}, -1, 1, rng));
  CHECK_FALSE(validate_constraints(broken, SlicePlan{{{0, 1}}}).ok());
}

TEST_CASE("validate_constraints accepts iff every weight occurs in exactly one slice (brute force)") {
  Rng rng(4);
  int accepted = 0, rejected = 0;
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t pairs = 1 + rng.next() % 5;
    std::vector<int> owner(pairs);
    for (int& o : owner) o = static_cast<int>(rng.next() % 3);
    ModelGraph m = pooled_chain(owner, rng);
    std::size_t n = m.layers.size();
    SlicePlan plan;
    std::size_t start = 0;
    for (std::size_t cut = 1; cut < n; ++cut)
      if (rng.next() % 3 == 0) {
        plan.ranges.push_back({start, cut});
        start = cut;
      }
    plan.ranges.push_back({start, n});

    std::map<std::string, std::set<std::size_t>> incidence;
    for (std::size_t s = 0; s < plan.slice_count(); ++s)
      for (std::size_t i = plan.ranges[s].start; i < plan.ranges[s].end; ++i)
        if (m.layers[i].weight_ref) {
          incidence[*m.layers[i].weight_ref].insert(s);
          incidence[*m.layers[i].bias_ref].insert(s);
        }
    bool expect = true;
    for (const auto& [ref, w] : m.weights) expect = expect && incidence[ref].size() == 1;
    CHECK(validate_constraints(m, plan).ok() == expect);
    (expect ? accepted : rejected)++;
  }
  CHECK(accepted > 20);
  CHECK(rejected > 20);
}

TEST_CASE("extract_slice") {
  ModelGraph m = random_lenet(0);
  SlicePlan p = plan_slices(m, "lenet5");
  ModelGraph s3 = extract_slice(m, p, 2);
  REQUIRE(s3.layers.size() == 3);
  CHECK(s3.layers[0].kind == LayerKind::flatten);
  CHECK(s3.layers[1].describe() == "Linear(400->120)");
  CHECK(s3.layers[2].kind == LayerKind::relu);
  CHECK(s3.input_shape == Shape{16, 5, 5});
  CHECK(s3.weights.size() == 2);
  CHECK(s3.weights.count("fc1.weight") == 1);

  ModelGraph whole = extract_slice(m, whole_model_plan(m), 0);
  CHECK(whole.layers == m.layers);
  CHECK(whole.weights == m.weights);
  CHECK(whole.input_shape == m.input_shape);

  std::vector<LayerSpec> rechained;
  for (std::size_t i = 0; i < p.slice_count(); ++i) {
    ModelGraph s = extract_slice(m, p, i);
    rechained.insert(rechained.end(), s.layers.begin(), s.layers.end());
  }
  CHECK(rechained == m.layers);
  CHECK_THROWS(extract_slice(m, p, 5));
}

TEST_CASE("float inference") {
  ModelGraph z = random_lenet(0);
  for (auto& [ref, w] : z.weights) w = FloatTensor::zeros(w.shape());
  Rng rng(5);
  FloatTensor zl = run_float_inference(z, random_tensor({3, 32, 32}, 0, 1, rng));
  CHECK(zl == FloatTensor::zeros({10}));

  ModelGraph m = random_lenet(1);
  FloatTensor x = random_input(m.input_shape, 0, 0);
  FloatTensor logits = run_float_inference(m, x);
  CHECK(logits.shape() == Shape{10});
  oracle::Dense o = oracle::float_model(m, x);
  for (std::size_t i = 0; i < 10; ++i) CHECK(std::fabs(logits[i] - o.v[i]) < 1e-9);
  CHECK_THROWS_AS(run_float_inference(m, FloatTensor::zeros({3, 28, 28})), ShapeError);
}

TEST_CASE("partition property: stagewise float inference equals the unsliced run") {
  ModelGraph m = random_lenet(2);
  std::vector<std::string> plans{"lenet5", "0-1,1-12", "0-6,6-12", "0-2,2-3,3-4,4-5,5-6,6-7,7-8,8-9,9-10,10-11,11-12"};
  for (int k = 0; k < 5; ++k) {
    FloatTensor x = random_input(m.input_shape, 9, k);
    FloatTensor whole = run_float_inference(m, x);
    for (const auto& spec : plans) {
      SlicePlan p = plan_slices(m, spec);
      FloatTensor y = x;
      for (std::size_t i = 0; i < p.slice_count(); ++i) y = run_float_inference(extract_slice(m, p, i), y);
      CHECK(y == whole);
    }
  }
}
