#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmlid {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

// Dense row-major array of doubles. Rank 1..3 is all the models need, but
// nothing here depends on that.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);

  // Validates that data matches the shape and holds finite values only.
  static Tensor checked(Shape shape, std::vector<double> data);
  static Tensor vector(std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  // Row view of a rank-2 tensor.
  std::span<double> row(std::size_t i);
  std::span<const double> row(std::size_t i) const;

  void fill(double value);
  void zero() { fill(0.0); }
  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Throws ShapeError unless t has exactly the expected shape.
void require_shape(const Tensor& t, const Shape& expected, const char* what);
void require_rank(const Tensor& t, std::size_t rank, const char* what);

// Trainable tensor with its gradient and optimizer slots.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Shape shape);

  void zero_grad() { grad.zero(); }

  std::string name;
  Tensor value;
  Tensor grad;
  Tensor first_moment;   // Adam m; empty until first Adam step
  Tensor second_moment;  // Adam v
};

// FNV-1a over the raw bytes of every parameter value, in order.
std::uint64_t parameter_checksum(std::span<const Parameter* const> params);

}  // namespace cmlid
