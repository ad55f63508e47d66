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

#ifndef VQAD_DATA_HPP_
#define VQAD_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vqad/image.hpp"

namespace vqad {

enum class Layout { kMvtec, kFlatSlices, kSynthetic };
enum class Texture { kStripes, kChecker, kBlobs };

std::string to_string(Layout layout);
Layout parse_layout(const std::string& text);
std::string to_string(Texture texture);
Texture parse_texture(const std::string& text);

struct SyntheticBenchmark {
  int num_train = 200;
  int num_test_normal = 20;
  int num_test_anomalous = 20;
  Texture texture = Texture::kStripes;
  int height = 64;
  int width = 64;
  std::uint64_t seed = 0;
};

struct DatasetSpec {
  std::filesystem::path root;
  Layout layout = Layout::kMvtec;
  int height = 64;
  int width = 64;
  int channels = 1;
  // Training images whose mean intensity is below this are dropped.
  double exclusion_threshold = 0.05;
  // Used when layout == kSynthetic (generated in memory, root ignored).
  SyntheticBenchmark synthetic;
};

struct LabeledImage {
  std::string id;        // "<category>/<stem>"
  std::string category;  // "good" for anomaly-free test images
  Image image;
  BinaryMask mask;
};

struct Dataset {
  std::vector<Image> train;
  std::vector<std::string> train_ids;
  std::vector<LabeledImage> test;
  // Training images removed by the exclusion rule.
  int excluded = 0;
};

// Directory contract (mvtec layout):
//   <root>/train/good/*.png|*.jpg
//   <root>/test/<category>/*
//   <root>/ground_truth/<category>/<stem>_mask.png   (not needed for "good")
// flat_slices: every image directly under <root> is a training image.
Dataset load_dataset(const DatasetSpec& spec);

// Drops images whose mean intensity is below `threshold`; returns kept indices.
std::vector<std::size_t> exclusion_filter(const std::vector<Image>& images, double threshold);

// In-memory benchmark; pixel values are already 8-bit quantized so the result
// equals loading the on-disk form written by generate_synthetic.
Dataset synthesize(const SyntheticBenchmark& benchmark);
// Writes the benchmark in the mvtec layout; defect category is "defect".
void generate_synthetic(const SyntheticBenchmark& benchmark, const std::filesystem::path& root);

// Image file I/O (8- and 16-bit PNG, JPEG read). Values are scaled to [0, 1].
Image read_image(const std::filesystem::path& path, int channels);
void write_image(const std::filesystem::path& path, const Image& image);
// 16-bit single-channel PNG of clamp(values, 0, 1).
void write_image16(const std::filesystem::path& path, int height, int width,
                   const std::vector<float>& values);
BinaryMask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);

Image resize_bilinear(const Image& image, int height, int width);
BinaryMask resize_nearest(const BinaryMask& mask, int height, int width);

}  // namespace vqad

#endif  // VQAD_DATA_HPP_
