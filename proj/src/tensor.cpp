#include "cmlid/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

namespace cmlid {

namespace {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

}  // namespace

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor Tensor::checked(Shape shape, std::vector<double> data) {
  if (element_count(shape) != data.size()) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + to_string(shape));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  if (!t.all_finite()) throw std::invalid_argument("tensor contains non-finite values");
  return t;
}

Tensor Tensor::vector(std::vector<double> values) {
  Shape shape{values.size()};
  return checked(std::move(shape), std::move(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     to_string(shape_));
  }
  return shape_[axis];
}

std::span<double> Tensor::row(std::size_t i) {
  return std::span<double>(data_).subspan(i * shape_[1], shape_[1]);
}

std::span<const double> Tensor::row(std::size_t i) const {
  return std::span<const double>(data_).subspan(i * shape_[1], shape_[1]);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_shape(const Tensor& t, const Shape& expected, const char* what) {
  if (t.shape() != expected) {
    throw ShapeError(std::string(what) + ": expected shape " + to_string(expected) +
                     ", got " + to_string(t.shape()));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + to_string(t.shape()));
  }
}

Parameter::Parameter(std::string name_, Shape shape)
    : name(std::move(name_)), value(shape), grad(shape) {}

std::uint64_t parameter_checksum(std::span<const Parameter* const> params) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const Parameter* p : params) {
    for (double v : p->value.data()) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof(double));
      for (unsigned char b : bytes) {
        hash ^= b;
        hash *= 0x100000001b3ULL;
      }
    }
  }
  return hash;
}

}  // namespace cmlid
