#include "slicewise/tensor.hpp"

#include <cmath>
#include <limits>

#include "slicewise/error.hpp"

namespace slicewise {

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have rank >= 1");
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimension must be positive: " + shape_string(shape));
  }
}

}  // namespace

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d != 0 && n > std::numeric_limits<std::size_t>::max() / d)
      throw ShapeError("tensor shape too large: " + shape_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s.empty() ? "[]" : s;
}

FloatTensor::FloatTensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != element_count(shape_))
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_string(shape_));
  for (double v : data_) {
    if (!std::isfinite(v)) throw ValidationError("FloatTensor holds a non-finite value");
  }
}

FloatTensor FloatTensor::zeros(Shape shape) {
  std::size_t n = element_count(shape);
  return FloatTensor(std::move(shape), std::vector<double>(n, 0.0));
}

FloatTensor FloatTensor::reshaped(Shape shape) const {
  if (element_count(shape) != data_.size())
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  return FloatTensor(std::move(shape), data_);
}

FieldTensor::FieldTensor(Shape shape, std::vector<std::int64_t> data, int scale_bits)
    : shape_(std::move(shape)), data_(std::move(data)), scale_bits_(scale_bits) {
  check_shape(shape_);
  if (scale_bits_ < 0 || scale_bits_ > 62) throw ValidationError("scale_bits out of range");
  if (data_.size() != element_count(shape_))
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_string(shape_));
  for (std::int64_t v : data_) {
    if (v >= kFieldLimit || v <= -kFieldLimit)
      throw OverflowError("FieldTensor element magnitude reaches 2^62");
  }
}

FieldTensor FieldTensor::zeros(Shape shape, int scale_bits) {
  std::size_t n = element_count(shape);
  return FieldTensor(std::move(shape), std::vector<std::int64_t>(n, 0), scale_bits);
}

FieldTensor FieldTensor::reshaped(Shape shape) const {
  if (element_count(shape) != data_.size())
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  return FieldTensor(std::move(shape), data_, scale_bits_);
}

std::int64_t FieldTensor::max_abs() const {
  std::int64_t m = 0;
  for (std::int64_t v : data_) {
    std::int64_t a = v < 0 ? -v : v;
    if (a > m) m = a;
  }
  return m;
}

}  // namespace slicewise
