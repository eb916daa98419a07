#include "idv/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "idv/error.hpp"

namespace idv {

std::size_t shape_volume(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw InvalidArgument("tensor shape must have rank >= 1");
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == 0) {
      throw InvalidArgument("tensor dimension " + std::to_string(i) +
                            " is zero in shape " + shape_string(shape));
    }
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  values_.assign(shape_volume(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  check_shape(shape_);
  if (values_.size() != shape_volume(shape_)) {
    throw InvalidArgument("tensor of shape " + shape_string(shape_) + " needs " +
                          std::to_string(shape_volume(shape_)) + " values, got " +
                          std::to_string(values_.size()));
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_volume(shape) != size()) {
    throw InvalidArgument("cannot reshape " + shape_string(shape_) + " to " +
                          shape_string(shape));
  }
  return Tensor(std::move(shape), values_);
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

void add_into(Tensor& dst, const Tensor& src, double scale) {
  if (dst.shape() != src.shape()) {
    throw InvalidArgument("add_into: shape " + shape_string(src.shape()) +
                          " does not match " + shape_string(dst.shape()));
  }
  auto d = dst.values();
  auto s = src.values();
  if (scale == 1.0) {
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
  } else {
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += scale * s[i];
  }
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument("max_abs_diff: shape mismatch " + shape_string(a.shape()) +
                          " vs " + shape_string(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace idv
