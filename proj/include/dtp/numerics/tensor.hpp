#pragma once

#include <Eigen/Dense>

#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace dtp {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

std::string shape_str(const Shape& shape);
Index shape_size(const Shape& shape);

/// Raised for any contract violation on tensor shapes or arguments.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major tensor. Image-like tensors are rank 3 in H x W x C order
/// (channels fastest); rank 4 prepends an optional batch extent.
template <typename Scalar>
class Tensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;

  Tensor() = default;
  explicit Tensor(Shape shape, Scalar fill = Scalar(0));
  Tensor(Shape shape, Array data);
  Tensor(Shape shape, std::initializer_list<Scalar> values);

  static Tensor image(Index height, Index width, Index channels, Scalar fill = Scalar(0)) {
    return Tensor({height, width, channels}, fill);
  }
  static Tensor scalar(Scalar v) { return Tensor(Shape{}, Array::Constant(1, v)); }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return data_.size(); }
  Index dim(Index i) const { return shape_.at(static_cast<std::size_t>(i)); }
  bool empty() const { return data_.size() == 0; }

  // Image accessors; valid for rank 3 only.
  Index height() const { return shape_[0]; }
  Index width() const { return shape_[1]; }
  Index channels() const { return shape_[2]; }

  Scalar& operator()(Index y, Index x, Index c) { return data_[(y * shape_[1] + x) * shape_[2] + c]; }
  Scalar operator()(Index y, Index x, Index c) const { return data_[(y * shape_[1] + x) * shape_[2] + c]; }
  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  Scalar item() const;

  Array& array() { return data_; }
  const Array& array() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  /// Views the tensor as a (rows x cols) row-major matrix; rows * cols must equal size().
  MatrixMap matrix(Index rows, Index cols);
  ConstMatrixMap matrix(Index rows, Index cols) const;

  Tensor reshaped(Shape shape) const;
  bool all_finite() const { return data_.allFinite(); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>().eval());
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && (a.data_ == b.data_).all();
  }

 private:
  Shape shape_;
  Array data_;
};

/// Throws ShapeError naming both shapes unless they match.
void require_same_shape(const Shape& a, const Shape& b, const char* what);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace dtp
