#include "slicewise/random.hpp"

#include <cmath>

namespace slicewise {

std::uint64_t Rng::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

FloatTensor random_tensor(const Shape& shape, double lo, double hi, Rng& rng) {
  std::vector<double> data(element_count(shape));
  for (double& v : data) v = static_cast<double>(static_cast<float>(rng.uniform(lo, hi)));
  return FloatTensor(shape, std::move(data));
}

FloatTensor random_input(const Shape& shape, std::uint64_t seed, std::size_t index) {
  Rng rng(seed * 0x100000001b3ULL + index);
  return random_tensor(shape, 0.0, 1.0, rng);
}

ModelGraph random_lenet(std::uint64_t seed) {
  Rng rng(seed ^ 0x5eed1e7e5ULL);
  ModelGraph m;
  m.input_shape = {3, 32, 32};
  auto add_params = [&](const std::string& name, Shape w_shape, std::size_t fan_in) {
    double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Shape b_shape = {w_shape[0]};
    m.weights.emplace(name + ".weight", random_tensor(w_shape, -s, s, rng));
    m.weights.emplace(name + ".bias", random_tensor(b_shape, -s, s, rng));
  };
  m.layers.push_back(LayerSpec::conv2d(3, 6, 5, 1, "conv1.weight", "conv1.bias"));
  add_params("conv1", {6, 3, 5, 5}, 75);
  m.layers.push_back(LayerSpec::relu());
  m.layers.push_back(LayerSpec::maxpool2d(2));
  m.layers.push_back(LayerSpec::conv2d(6, 16, 5, 1, "conv2.weight", "conv2.bias"));
  add_params("conv2", {16, 6, 5, 5}, 150);
  m.layers.push_back(LayerSpec::relu());
  m.layers.push_back(LayerSpec::maxpool2d(2));
  m.layers.push_back(LayerSpec::flatten());
  m.layers.push_back(LayerSpec::linear(400, 120, "fc1.weight", "fc1.bias"));
  add_params("fc1", {120, 400}, 400);
  m.layers.push_back(LayerSpec::relu());
  m.layers.push_back(LayerSpec::linear(120, 84, "fc2.weight", "fc2.bias"));
  add_params("fc2", {84, 120}, 120);
  m.layers.push_back(LayerSpec::relu());
  m.layers.push_back(LayerSpec::linear(84, 10, "fc3.weight", "fc3.bias"));
  add_params("fc3", {10, 84}, 84);
  return m;
}

}  // namespace slicewise
