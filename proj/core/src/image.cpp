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

#include "vqad/image.hpp"

#include <algorithm>

#include "vqad/error.hpp"

namespace vqad {

Image::Image(Tensor data) : data_(std::move(data)) {
  if (data_.rank() != 3) throw ContractError("image must be (C, H, W)");
}

double Image::mean() const {
  if (data_.empty()) return 0.0;
  double acc = 0.0;
  for (float v : data_.values()) acc += v;
  return acc / static_cast<double>(data_.size());
}

Image clamp_unit(Tensor raw) {
  for (auto& v : raw.storage()) v = std::clamp(v, 0.0f, 1.0f);
  return Image(std::move(raw));
}

std::size_t BinaryMask::popcount() const {
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [](std::uint8_t v) { return v != 0; }));
}

}  // namespace vqad
