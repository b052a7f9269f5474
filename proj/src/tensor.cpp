#include "aggnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>

#include "aggnet/errors.hpp"

namespace aggnet {

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimension must be positive");
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double value)
    : shape_(std::move(shape)), data_(element_count(shape_), value) {}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  return Tensor(std::move(shape), 0.0);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  return Tensor(std::move(shape), value);
}

Tensor Tensor::uniform(std::vector<std::size_t> shape, double lo, double hi, Rng& rng) {
  Tensor t(std::move(shape), 0.0);
  for (double& x : t.data_) x = rng.uniform(lo, hi);
  return t;
}

Tensor Tensor::glorot(std::vector<std::size_t> shape, std::size_t fan_in,
                      std::size_t fan_out, Rng& rng) {
  if (fan_in == 0 || fan_out == 0) throw ShapeError("glorot fans must be positive");
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform(std::move(shape), -limit, limit, rng);
}

Tensor Tensor::glorot(std::vector<std::size_t> shape, Rng& rng) {
  std::size_t fan_in = 0, fan_out = 0;
  switch (shape.size()) {
    case 1:
      fan_in = fan_out = shape[0];
      break;
    case 2:
      fan_out = shape[0];
      fan_in = shape[1];
      break;
    case 3:
      fan_in = shape[0] * shape[1];
      fan_out = shape[0] * shape[2];
      break;
    default:
      throw ShapeError("glorot init supports rank 1..3, got rank " +
                       std::to_string(shape.size()));
  }
  return glorot(std::move(shape), fan_in, fan_out, rng);
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> values) {
  Tensor t;
  std::size_t n = element_count(shape);
  if (values.size() != n) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  }
  t.shape_ = std::move(shape);
  t.data_ = std::move(values);
  return t;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::scale(double s) {
  for (double& x : data_) x *= s;
}

void Tensor::add_scaled(const Tensor& other, double s) {
  if (!same_shape(other)) {
    throw ShapeError("add_scaled shape mismatch: " + shape_str(shape_) + " vs " +
                     shape_str(other.shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * other.data_[i];
}

std::vector<std::size_t> checked_shape(std::span<const long long> dims) {
  if (dims.empty()) throw ShapeError("tensor shape must have at least one dimension");
  std::vector<std::size_t> out;
  out.reserve(dims.size());
  for (long long d : dims) {
    if (d <= 0) throw ShapeError("tensor dimension must be positive, got " + std::to_string(d));
    out.push_back(static_cast<std::size_t>(d));
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul expects rank-2 operands");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul inner dimension mismatch: " + std::to_string(a.dim(1)) +
                     " vs " + std::to_string(b.dim(0)));
  }
  std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.row(i);
    double* orow = out.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      double av = arow[p];
      const double* brow = b.row(p);
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor conv1d_valid(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  if (input.rank() != 2) throw ShapeError("conv1d input must be rank 2 [T x d_in]");
  if (kernels.rank() != 3) throw ShapeError("conv1d kernels must be rank 3 [k x d_in x d_out]");
  if (bias.rank() != 1) throw ShapeError("conv1d bias must be rank 1");
  std::size_t t_len = input.dim(0), d_in = input.dim(1);
  std::size_t k = kernels.dim(0), d_out = kernels.dim(2);
  if (kernels.dim(1) != d_in) {
    throw ShapeError("conv1d channel mismatch: input d_in " + std::to_string(d_in) +
                     " vs kernel d_in " + std::to_string(kernels.dim(1)));
  }
  if (bias.dim(0) != d_out) throw ShapeError("conv1d bias length must equal d_out");
  if (t_len < k) {
    throw ShapeError("conv1d sequence too short: T=" + std::to_string(t_len) +
                     " < k=" + std::to_string(k));
  }

  std::size_t t_out = t_len - k + 1;
  Tensor out = Tensor::zeros({t_out, d_out});
  const double* kdata = kernels.data();
  for (std::size_t t = 0; t < t_out; ++t) {
    double* orow = out.row(t);
    for (std::size_t o = 0; o < d_out; ++o) orow[o] = bias[o];
    for (std::size_t i = 0; i < k; ++i) {
      const double* xrow = input.row(t + i);
      const double* kslab = kdata + i * d_in * d_out;
      for (std::size_t c = 0; c < d_in; ++c) {
        double xv = xrow[c];
        const double* krow = kslab + c * d_out;
        for (std::size_t o = 0; o < d_out; ++o) orow[o] += xv * krow[o];
      }
    }
  }
  return out;
}

MaxpoolResult maxpool1d(const Tensor& input, std::size_t window) {
  if (input.rank() != 2) throw ShapeError("maxpool1d input must be rank 2");
  if (window != 2 && window != 3) {
    throw ShapeError("maxpool1d window must be 2 or 3, got " + std::to_string(window));
  }
  std::size_t t_len = input.dim(0), c_dim = input.dim(1);
  if (t_len < window) {
    throw ShapeError("maxpool1d sequence too short: T=" + std::to_string(t_len) +
                     " < window=" + std::to_string(window));
  }
  std::size_t t_out = t_len / window;

  MaxpoolResult res;
  res.values = Tensor::zeros({t_out, c_dim});
  res.argmax.assign(t_out * c_dim, 0);
  res.input_rows = t_len;
  for (std::size_t t = 0; t < t_out; ++t) {
    std::size_t base = t * window;
    double* orow = res.values.row(t);
    for (std::size_t c = 0; c < c_dim; ++c) {
      double best = input.at(base, c);
      std::size_t best_row = base;
      for (std::size_t w = 1; w < window; ++w) {
        double v = input.at(base + w, c);
        if (v > best) {
          best = v;
          best_row = base + w;
        }
      }
      orow[c] = best;
      res.argmax[t * c_dim + c] = best_row;
    }
  }
  return res;
}

void softmax_inplace(double* x, std::size_t n) {
  if (n == 0) throw ShapeError("softmax over empty vector");
  double mx = x[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::exp(x[i] - mx);
    sum += x[i];
  }
  for (std::size_t i = 0; i < n; ++i) x[i] /= sum;
}

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 1) throw ShapeError("softmax expects a rank-1 tensor");
  Tensor out = logits;
  softmax_inplace(out.data(), out.size());
  return out;
}

double l2_norm(const Tensor& v) {
  double s = 0.0;
  for (double x : v.values()) s += x * x;
  return std::sqrt(s);
}

double dot(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw ShapeError("dot length mismatch");
  double s = 0.0;
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) s += pa[i] * pb[i];
  return s;
}

}  // namespace aggnet
