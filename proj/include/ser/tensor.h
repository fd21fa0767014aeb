// include/ser/tensor.h

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

#pragma once

// Dense float32 tensors and the handful of kernels the encoder and the
// classifier head are built from. Everything is row-major; kernels never pad.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ser {

class Tensor {
 public:
  Tensor() = default;
  /// Zero-filled tensor. Every extent must be positive.
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<float> data);

  static Tensor filled(std::vector<std::size_t> shape, float value);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  float* raw() { return data_.data(); }
  const float* raw() const { return data_.data(); }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  // 2-D accessors; rank is not checked.
  float& at(std::size_t r, std::size_t c) { return data_[r * shape_.back() + c]; }
  float at(std::size_t r, std::size_t c) const { return data_[r * shape_.back() + c]; }

  /// Number of rows when viewed as [product(leading axes) x last axis].
  std::size_t rows() const { return shape_.empty() ? 0 : data_.size() / shape_.back(); }
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }
  std::span<float> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

  /// Same data, new shape with the same element count.
  Tensor reshaped(std::vector<std::size_t> shape) const;

  bool all_finite() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<float> data_;
};

std::string shape_string(std::span<const std::size_t> shape);

/// [m x k] * [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// x[... x in] * weight[out x in]^T + bias[out]; the nn.Linear convention.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor transpose2d(const Tensor& x);

/// input [c_in x T], weight [c_out x c_in/groups x k] -> [c_out x T'],
/// T' = (T - k) / stride + 1. No implicit padding.
Tensor conv1d(const Tensor& input, const Tensor& weight, std::size_t stride,
              std::size_t groups);
Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::size_t stride, std::size_t groups);

/// Output length of an unpadded convolution, or 0 when T < k.
constexpr std::size_t conv_output_length(std::size_t length, std::size_t kernel,
                                         std::size_t stride) {
  return length < kernel ? 0 : (length - kernel) / stride + 1;
}

/// Normalizes over the last axis, then applies gamma/beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps);

/// x [c x T]; statistics over each (channels-in-group x T) block, affine per channel.
Tensor group_norm(const Tensor& x, std::size_t num_groups, const Tensor& gamma,
                  const Tensor& beta, float eps);

/// Exact GELU, x * Phi(x) with Phi via erf.
float gelu(float x);
Tensor gelu(const Tensor& x);
void gelu_inplace(Tensor& x);

/// Max-shifted softmax over the last axis.
Tensor softmax(const Tensor& x);
void softmax_inplace(std::span<float> v);

}  // namespace ser
