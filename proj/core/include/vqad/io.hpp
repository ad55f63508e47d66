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

#ifndef VQAD_IO_HPP_
#define VQAD_IO_HPP_

// Little-endian binary framing, hashing and atomic file replacement shared by
// every checkpoint format.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "vqad/layers.hpp"

namespace vqad::io {

class ByteWriter {
 public:
  void magic(std::string_view tag) { buf_.append(tag); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void str(std::string_view s);
  void floats(std::span<const float> v);
  void raw(std::string_view bytes) { buf_.append(bytes); }

  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  // `context` names the source in error messages.
  ByteReader(std::string bytes, std::string context)
      : buf_(std::move(bytes)), context_(std::move(context)) {}

  void expect_magic(std::string_view tag);
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  std::string str();
  void floats(std::span<float> out);
  std::string raw(std::size_t n);
  std::size_t remaining() const { return buf_.size() - pos_; }
  const std::string& context() const { return context_; }

 private:
  const char* take(std::size_t n);

  std::string buf_;
  std::string context_;
  std::size_t pos_ = 0;
};

std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

// Writes to a sibling temporary then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

// Parameter tensors by name and shape; reading verifies both.
void write_params(ByteWriter& out, const nn::ParamStore& store);
void read_params(ByteReader& in, nn::ParamStore& store);

}  // namespace vqad::io

#endif  // VQAD_IO_HPP_
