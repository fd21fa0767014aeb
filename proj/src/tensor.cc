// src/tensor.cc

// Copyright 2026  The SER Engine Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ser/tensor.h"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "ser/error.h"

namespace ser {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

void check_extents(const std::vector<std::size_t>& shape) {
  for (std::size_t e : shape)
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape));
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank)
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) +
                     ", got " + shape_string(t.shape()));
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(product(shape_), 0.0f);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (product(shape_) != data_.size())
    throw ShapeError("tensor of shape " + shape_string(shape_) + " given " +
                     std::to_string(data_.size()) + " values");
}

Tensor Tensor::filled(std::vector<std::size_t> shape, float value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

std::string shape_string(std::span<const std::size_t> shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0))
    throw ShapeError("matmul: inner dimensions disagree, " + shape_string(a.shape()) +
                     " x " + shape_string(b.shape()));
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  MutMap(out.raw(), m, n).noalias() = ConstMap(a.raw(), m, k) * ConstMap(b.raw(), k, n);
  return out;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(weight, 2, "linear");
  const auto out_dim = weight.dim(0), in_dim = weight.dim(1);
  if (x.cols() != in_dim || bias.size() != out_dim)
    throw ShapeError("linear: input " + shape_string(x.shape()) + ", weight " +
                     shape_string(weight.shape()) + ", bias " + shape_string(bias.shape()));
  std::vector<std::size_t> shape = x.shape();
  shape.back() = out_dim;
  Tensor out(shape);
  const auto rows = x.rows();
  MutMap y(out.raw(), rows, out_dim);
  y.noalias() = ConstMap(x.raw(), rows, in_dim) * ConstMap(weight.raw(), out_dim, in_dim).transpose();
  y.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(bias.raw(), out_dim);
  return out;
}

Tensor transpose2d(const Tensor& x) {
  require_rank(x, 2, "transpose2d");
  Tensor out({x.dim(1), x.dim(0)});
  MutMap(out.raw(), x.dim(1), x.dim(0)) = ConstMap(x.raw(), x.dim(0), x.dim(1)).transpose();
  return out;
}

namespace {

Tensor conv1d_impl(const Tensor& input, const Tensor& weight, const Tensor* bias,
                   std::size_t stride, std::size_t groups) {
  require_rank(input, 2, "conv1d input");
  require_rank(weight, 3, "conv1d weight");
  if (stride < 1 || groups < 1) throw ShapeError("conv1d: stride and groups must be >= 1");
  const auto c_in = input.dim(0), length = input.dim(1);
  const auto c_out = weight.dim(0), c_in_g = weight.dim(1), kernel = weight.dim(2);
  if (c_in % groups != 0 || c_out % groups != 0 || c_in / groups != c_in_g)
    throw ShapeError("conv1d: input " + shape_string(input.shape()) + " incompatible with weight " +
                     shape_string(weight.shape()) + " at groups=" + std::to_string(groups));
  if (bias && bias->size() != c_out) throw ShapeError("conv1d: bias size mismatch");
  if (length < kernel)
    throw InputTooShortError("conv1d: input length " + std::to_string(length) +
                                 " shorter than kernel " + std::to_string(kernel),
                             kernel);

  const auto out_len = conv_output_length(length, kernel, stride);
  const auto c_out_g = c_out / groups;
  const auto patch = c_in_g * kernel;
  Tensor out({c_out, out_len});
  RowMat columns(patch, out_len);
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t ci = 0; ci < c_in_g; ++ci) {
      const float* src = input.raw() + (g * c_in_g + ci) * length;
      for (std::size_t j = 0; j < kernel; ++j) {
        float* dst = columns.data() + (ci * kernel + j) * out_len;
        for (std::size_t t = 0; t < out_len; ++t) dst[t] = src[t * stride + j];
      }
    }
    MutMap(out.raw() + g * c_out_g * out_len, c_out_g, out_len).noalias() =
        ConstMap(weight.raw() + g * c_out_g * patch, c_out_g, patch) * columns;
  }
  if (bias) {
    for (std::size_t c = 0; c < c_out; ++c) {
      float* dst = out.raw() + c * out_len;
      const float b = (*bias)[c];
      for (std::size_t t = 0; t < out_len; ++t) dst[t] += b;
    }
  }
  return out;
}

}  // namespace

Tensor conv1d(const Tensor& input, const Tensor& weight, std::size_t stride, std::size_t groups) {
  return conv1d_impl(input, weight, nullptr, stride, groups);
}

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::size_t stride, std::size_t groups) {
  return conv1d_impl(input, weight, &bias, stride, groups);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  const auto d = x.cols();
  if (x.empty() || gamma.size() != d || beta.size() != d)
    throw ShapeError("layer_norm: input " + shape_string(x.shape()) + ", gamma " +
                     shape_string(gamma.shape()) + ", beta " + shape_string(beta.shape()));
  Tensor out(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    double mean = 0.0;
    for (float v : in) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (float v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    auto o = out.row(r);
    for (std::size_t j = 0; j < d; ++j)
      o[j] = static_cast<float>((in[j] - mean) * inv) * gamma[j] + beta[j];
  }
  return out;
}

Tensor group_norm(const Tensor& x, std::size_t num_groups, const Tensor& gamma,
                  const Tensor& beta, float eps) {
  require_rank(x, 2, "group_norm");
  const auto channels = x.dim(0), length = x.dim(1);
  if (num_groups == 0 || channels % num_groups != 0)
    throw ShapeError("group_norm: " + std::to_string(channels) + " channels not divisible into " +
                     std::to_string(num_groups) + " groups");
  if (gamma.size() != channels || beta.size() != channels)
    throw ShapeError("group_norm: affine parameters must have one entry per channel");
  const auto per_group = channels / num_groups;
  const auto block = per_group * length;
  Tensor out(x.shape());
  for (std::size_t g = 0; g < num_groups; ++g) {
    const float* in = x.raw() + g * block;
    double mean = 0.0;
    for (std::size_t i = 0; i < block; ++i) mean += in[i];
    mean /= static_cast<double>(block);
    double var = 0.0;
    for (std::size_t i = 0; i < block; ++i) var += (in[i] - mean) * (in[i] - mean);
    var /= static_cast<double>(block);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < per_group; ++c) {
      const auto ch = g * per_group + c;
      float* o = out.raw() + ch * length;
      const float* src = x.raw() + ch * length;
      for (std::size_t t = 0; t < length; ++t)
        o[t] = static_cast<float>((src[t] - mean) * inv) * gamma[ch] + beta[ch];
    }
  }
  return out;
}

float gelu(float x) {
  // erfc keeps full relative precision in the negative tail.
  return static_cast<float>(0.5 * x * std::erfc(-x / std::sqrt(2.0)));
}

void gelu_inplace(Tensor& x) {
  for (float& v : x.data()) v = gelu(v);
}

Tensor gelu(const Tensor& x) {
  Tensor out = x;
  gelu_inplace(out);
  return out;
}

void softmax_inplace(std::span<float> v) {
  if (v.empty()) return;
  const float peak = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (float& e : v) {
    e = std::exp(e - peak);
    total += e;
  }
  const double inv = 1.0 / total;
  for (float& e : v) e = static_cast<float>(e * inv);
}

Tensor softmax(const Tensor& x) {
  Tensor out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) softmax_inplace(out.row(r));
  return out;
}

}  // namespace ser
