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

#include "vqad/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vqad/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint framing assumes a little-endian host");

namespace vqad::io {

void ByteWriter::u32(std::uint32_t v) {
  buf_.append(reinterpret_cast<const char*>(&v), sizeof v);
}

void ByteWriter::u64(std::uint64_t v) {
  buf_.append(reinterpret_cast<const char*>(&v), sizeof v);
}

void ByteWriter::f32(float v) { buf_.append(reinterpret_cast<const char*>(&v), sizeof v); }

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.append(s);
}

void ByteWriter::floats(std::span<const float> v) {
  buf_.append(reinterpret_cast<const char*>(v.data()), v.size_bytes());
}

const char* ByteReader::take(std::size_t n) {
  if (remaining() < n) {
    throw IntegrityError(context_ + ": truncated (needed " + std::to_string(n) +
                         " bytes at offset " + std::to_string(pos_) + ")");
  }
  const char* p = buf_.data() + pos_;
  pos_ += n;
  return p;
}

void ByteReader::expect_magic(std::string_view tag) {
  if (remaining() < tag.size() || std::string_view(buf_.data() + pos_, tag.size()) != tag) {
    throw IntegrityError(context_ + ": missing magic header \"" + std::string(tag) + "\"");
  }
  pos_ += tag.size();
}

std::uint32_t ByteReader::u32() {
  std::uint32_t v;
  std::memcpy(&v, take(sizeof v), sizeof v);
  return v;
}

std::uint64_t ByteReader::u64() {
  std::uint64_t v;
  std::memcpy(&v, take(sizeof v), sizeof v);
  return v;
}

float ByteReader::f32() {
  float v;
  std::memcpy(&v, take(sizeof v), sizeof v);
  return v;
}

std::string ByteReader::str() {
  const std::uint32_t n = u32();
  return std::string(take(n), n);
}

void ByteReader::floats(std::span<float> out) {
  std::memcpy(out.data(), take(out.size_bytes()), out.size_bytes());
}

std::string ByteReader::raw(std::size_t n) { return std::string(take(n), n); }

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw InputError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_params(ByteWriter& out, const nn::ParamStore& store) {
  out.u32(static_cast<std::uint32_t>(store.size()));
  for (const auto& p : store.params()) {
    out.str(p.name);
    out.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (int d : p.value.shape()) out.u32(static_cast<std::uint32_t>(d));
    out.floats(p.value.values());
  }
}

void read_params(ByteReader& in, nn::ParamStore& store) {
  const std::uint32_t count = in.u32();
  if (count != store.size()) {
    throw IntegrityError(in.context() + ": expected " + std::to_string(store.size()) +
                         " parameter tensors, found " + std::to_string(count));
  }
  for (auto& p : store.params()) {
    const std::string name = in.str();
    if (name != p.name) {
      throw IntegrityError(in.context() + ": expected parameter " + p.name + ", found " + name);
    }
    const std::uint32_t rank = in.u32();
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(in.u32());
    if (shape != p.value.shape()) {
      throw IntegrityError(in.context() + ": parameter " + name + " has shape " +
                           shape_string(shape) + ", model expects " +
                           shape_string(p.value.shape()));
    }
    in.floats(p.value.values());
  }
}

}  // namespace vqad::io
