// Copyright 2026 The vqad Authors. All Rights Reserved.
//
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

#ifndef VQAD_IMAGE_HPP_
#define VQAD_IMAGE_HPP_

#include <cstdint>
#include <vector>

#include "vqad/tensor.hpp"

namespace vqad {

// C x H x W image with C in {1, 3}; preprocessed values lie in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int channels, int height, int width, float fill = 0.0f)
      : data_({channels, height, width}, fill) {}
  explicit Image(Tensor data);

  int channels() const { return data_.dim(0); }
  int height() const { return data_.dim(1); }
  int width() const { return data_.dim(2); }
  std::size_t size() const { return data_.size(); }

  float at(int c, int y, int x) const { return data_.at(c, y, x); }
  float& at(int c, int y, int x) { return data_.at(c, y, x); }
  const Tensor& tensor() const { return data_; }
  Tensor& tensor() { return data_; }

  double mean() const;
  bool same_shape(const Image& other) const { return data_.same_shape(other.data_); }
  bool operator==(const Image& other) const {
    return data_.shape() == other.data_.shape() && data_.storage() == other.data_.storage();
  }

 private:
  Tensor data_;
};

// Every component limited to [0, 1].
Image clamp_unit(Tensor raw);

// H x W binary mask; nonzero = anomalous.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> values;

  BinaryMask() = default;
  BinaryMask(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  std::uint8_t& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return values.size(); }
  std::size_t popcount() const;
  bool empty_mask() const { return popcount() == 0; }
  bool operator==(const BinaryMask&) const = default;
};

}  // namespace vqad

#endif  // VQAD_IMAGE_HPP_
