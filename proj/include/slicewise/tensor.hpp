#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace slicewise {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

// Largest magnitude a fixed-point value or accumulator may reach (exclusive).
inline constexpr std::int64_t kFieldLimit = std::int64_t{1} << 62;

/// Dense real-valued tensor in row-major order. Immutable after construction;
/// every element is finite.
class FloatTensor {
 public:
  FloatTensor() = default;
  FloatTensor(Shape shape, std::vector<double> data);

  static FloatTensor zeros(Shape shape);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::span<const double> data() const { return data_; }
  double operator[](std::size_t i) const { return data_[i]; }

  FloatTensor reshaped(Shape shape) const;

  friend bool operator==(const FloatTensor&, const FloatTensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Fixed-point tensor: element value = data / 2^scale_bits.
class FieldTensor {
 public:
  FieldTensor() = default;
  FieldTensor(Shape shape, std::vector<std::int64_t> data, int scale_bits);

  static FieldTensor zeros(Shape shape, int scale_bits);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::span<const std::int64_t> data() const { return data_; }
  std::int64_t operator[](std::size_t i) const { return data_[i]; }
  int scale_bits() const { return scale_bits_; }

  FieldTensor reshaped(Shape shape) const;
  std::int64_t max_abs() const;

  friend bool operator==(const FieldTensor&, const FieldTensor&) = default;

 private:
  Shape shape_;
  std::vector<std::int64_t> data_;
  int scale_bits_ = 0;
};

}  // namespace slicewise
