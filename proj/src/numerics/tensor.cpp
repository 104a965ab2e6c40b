#include "dtp/numerics/tensor.hpp"

#include <sstream>

namespace dtp {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index e : shape) {
    if (e < 0) throw ShapeError("negative extent in shape " + shape_str(shape));
    n *= e;
  }
  return n;
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

template <typename Scalar>
Tensor<Scalar>::Tensor(Shape shape, Scalar fill)
    : shape_(std::move(shape)), data_(Array::Constant(shape_size(shape_), fill)) {}

template <typename Scalar>
Tensor<Scalar>::Tensor(Shape shape, Array data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_str(shape_));
  }
}

template <typename Scalar>
Tensor<Scalar>::Tensor(Shape shape, std::initializer_list<Scalar> values) : shape_(std::move(shape)) {
  if (shape_size(shape_) != static_cast<Index>(values.size())) {
    throw ShapeError("initializer length " + std::to_string(values.size()) + " does not match shape " +
                     shape_str(shape_));
  }
  data_.resize(static_cast<Index>(values.size()));
  Index i = 0;
  for (Scalar v : values) data_[i++] = v;
}

template <typename Scalar>
Scalar Tensor<Scalar>::item() const {
  if (data_.size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape_));
  return data_[0];
}

template <typename Scalar>
typename Tensor<Scalar>::MatrixMap Tensor<Scalar>::matrix(Index rows, Index cols) {
  if (rows * cols != data_.size()) {
    throw ShapeError("cannot view " + shape_str(shape_) + " as " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  return MatrixMap(data_.data(), rows, cols);
}

template <typename Scalar>
typename Tensor<Scalar>::ConstMatrixMap Tensor<Scalar>::matrix(Index rows, Index cols) const {
  if (rows * cols != data_.size()) {
    throw ShapeError("cannot view " + shape_str(shape_) + " as " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  return ConstMatrixMap(data_.data(), rows, cols);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  return Tensor(std::move(shape), data_);
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace dtp
