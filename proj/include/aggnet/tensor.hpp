#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

#include "aggnet/rng.hpp"

namespace aggnet {

// Dense row-major tensor of doubles. Rank is dynamic (1 to 3 in practice).
// Shape checks happen at operation boundaries; element access is assert-checked
// so debug builds catch indexing bugs without taxing release loops.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor uniform(std::vector<std::size_t> shape, double lo, double hi, Rng& rng);
  // Glorot-uniform with fans derived from the shape: rank-1 uses n for both fans,
  // rank-2 [m,n] is treated as [out,in], rank-3 [k,c,o] as conv kernels
  // (fan_in = k*c, fan_out = k*o).
  static Tensor glorot(std::vector<std::size_t> shape, Rng& rng);
  static Tensor glorot(std::vector<std::size_t> shape, std::size_t fan_in,
                       std::size_t fan_out, Rng& rng);
  static Tensor from(std::vector<std::size_t> shape, std::vector<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t i) const {
    assert(i < shape_.size());
    return shape_[i];
  }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t flat) {
    assert(flat < data_.size());
    return data_[flat];
  }
  double operator[](std::size_t flat) const {
    assert(flat < data_.size());
    return data_[flat];
  }

  double& at(std::size_t i, std::size_t j) {
    assert(rank() == 2 && i < shape_[0] && j < shape_[1]);
    return data_[i * shape_[1] + j];
  }
  double at(std::size_t i, std::size_t j) const {
    assert(rank() == 2 && i < shape_[0] && j < shape_[1]);
    return data_[i * shape_[1] + j];
  }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    assert(rank() == 3 && i < shape_[0] && j < shape_[1] && k < shape_[2]);
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    assert(rank() == 3 && i < shape_[0] && j < shape_[1] && k < shape_[2]);
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  // Pointer to the start of row i (rank 2) without per-element asserts.
  double* row(std::size_t i) {
    assert(rank() == 2 && i < shape_[0]);
    return data_.data() + i * shape_[1];
  }
  const double* row(std::size_t i) const {
    assert(rank() == 2 && i < shape_[0]);
    return data_.data() + i * shape_[1];
  }

  // Pointer to element (i, j, 0) of a rank-3 tensor.
  double* row3(std::size_t i, std::size_t j) {
    assert(rank() == 3 && i < shape_[0] && j < shape_[1]);
    return data_.data() + (i * shape_[1] + j) * shape_[2];
  }
  const double* row3(std::size_t i, std::size_t j) const {
    assert(rank() == 3 && i < shape_[0] && j < shape_[1]);
    return data_.data() + (i * shape_[1] + j) * shape_[2];
  }

  void fill(double v);
  void scale(double s);
  void add_scaled(const Tensor& other, double s);  // this += s * other

 private:
  Tensor(std::vector<std::size_t> shape, double value);

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Validates user-supplied dimensions (rejects empty shapes and non-positive dims).
std::vector<std::size_t> checked_shape(std::span<const long long> dims);

// a [m×k] * b [k×n] -> [m×n]
Tensor matmul(const Tensor& a, const Tensor& b);

// Valid (no padding) 1-D convolution over the row axis.
// input [T×d_in], kernels [k×d_in×d_out], bias [d_out] -> [T-k+1 × d_out]
Tensor conv1d_valid(const Tensor& input, const Tensor& kernels, const Tensor& bias);

struct MaxpoolResult {
  Tensor values;                    // [T/window × C]
  std::vector<std::size_t> argmax;  // per output cell, the source row index
  std::size_t input_rows = 0;
};

// Non-overlapping max pooling over rows; a remainder shorter than the window is
// dropped. window must be 2 or 3.
MaxpoolResult maxpool1d(const Tensor& input, std::size_t window);

Tensor softmax(const Tensor& logits);  // rank-1, max-subtracted for stability
void softmax_inplace(double* x, std::size_t n);

double l2_norm(const Tensor& v);
double dot(const Tensor& a, const Tensor& b);

}  // namespace aggnet
