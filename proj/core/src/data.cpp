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

#include "vqad/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <random>

#include "vqad/error.hpp"

namespace fs = std::filesystem;

namespace vqad {

std::string to_string(Layout layout) {
  switch (layout) {
    case Layout::kMvtec:
      return "mvtec";
    case Layout::kFlatSlices:
      return "flat_slices";
    case Layout::kSynthetic:
      return "synthetic";
  }
  return "?";
}

Layout parse_layout(const std::string& text) {
  if (text == "mvtec" || text == "mvtec_style") return Layout::kMvtec;
  if (text == "flat_slices" || text == "flat") return Layout::kFlatSlices;
  if (text == "synthetic") return Layout::kSynthetic;
  throw InputError("unknown dataset layout '" + text + "' (expected mvtec, flat_slices or synthetic)");
}

std::string to_string(Texture texture) {
  switch (texture) {
    case Texture::kStripes:
      return "stripes";
    case Texture::kChecker:
      return "checker";
    case Texture::kBlobs:
      return "blobs";
  }
  return "?";
}

Texture parse_texture(const std::string& text) {
  if (text == "stripes") return Texture::kStripes;
  if (text == "checker") return Texture::kChecker;
  if (text == "blobs") return Texture::kBlobs;
  throw InputError("unknown texture '" + text + "' (expected stripes, checker or blobs)");
}

// ---------------------------------------------------------------------------
// Pixel conversion

namespace {

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

float from_byte(std::uint8_t b) { return static_cast<float>(b) / 255.0f; }

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<std::string> list_subdirs(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory()) names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

void require_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("missing directory: " + dir.string());
}

Image preprocess(Image image, const DatasetSpec& spec) {
  if (image.height() != spec.height || image.width() != spec.width) {
    image = resize_bilinear(image, spec.height, spec.width);
  }
  return image;
}

}  // namespace

Image read_image(const fs::path& path, int channels) {
  if (channels != 1 && channels != 3) throw InputError("channels must be 1 or 3");
  const int flags = (channels == 1 ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR) | cv::IMREAD_ANYDEPTH;
  cv::Mat mat = cv::imread(path.string(), flags);
  if (mat.empty()) throw InputError("cannot read image: " + path.string());
  if (channels == 3) cv::cvtColor(mat, mat, cv::COLOR_BGR2RGB);
  Image image(channels, mat.rows, mat.cols);
  for (int y = 0; y < mat.rows; ++y)
    for (int x = 0; x < mat.cols; ++x)
      for (int c = 0; c < channels; ++c) {
        float v;
        if (mat.depth() == CV_16U) {
          v = static_cast<float>(mat.ptr<std::uint16_t>(y)[x * channels + c]) / 65535.0f;
        } else {
          v = from_byte(mat.ptr<std::uint8_t>(y)[x * channels + c]);
        }
        image.at(c, y, x) = v;
      }
  return image;
}

void write_image(const fs::path& path, const Image& image) {
  const int c = image.channels();
  cv::Mat mat(image.height(), image.width(), c == 1 ? CV_8UC1 : CV_8UC3);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int k = 0; k < c; ++k) mat.ptr<std::uint8_t>(y)[x * c + k] = to_byte(image.at(k, y, x));
  if (c == 3) cv::cvtColor(mat, mat, cv::COLOR_RGB2BGR);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), mat)) throw InputError("cannot write image: " + path.string());
}

void write_image16(const fs::path& path, int height, int width, const std::vector<float>& values) {
  cv::Mat mat(height, width, CV_16UC1);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const float v = std::clamp(values[static_cast<std::size_t>(y) * width + x], 0.0f, 1.0f);
      mat.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(std::lround(v * 65535.0f));
    }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), mat)) throw InputError("cannot write image: " + path.string());
}

BinaryMask read_mask(const fs::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_GRAYSCALE | cv::IMREAD_ANYDEPTH);
  if (mat.empty()) throw InputError("cannot read mask: " + path.string());
  BinaryMask mask(mat.rows, mat.cols);
  for (int y = 0; y < mat.rows; ++y)
    for (int x = 0; x < mat.cols; ++x) {
      const bool on = mat.depth() == CV_16U ? mat.at<std::uint16_t>(y, x) != 0
                                            : mat.at<std::uint8_t>(y, x) != 0;
      mask.at(y, x) = on ? 1 : 0;
    }
  return mask;
}

void write_mask(const fs::path& path, const BinaryMask& mask) {
  cv::Mat mat(mask.height, mask.width, CV_8UC1);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) mat.at<std::uint8_t>(y, x) = mask.at(y, x) ? 255 : 0;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), mat)) throw InputError("cannot write mask: " + path.string());
}

Image resize_bilinear(const Image& image, int height, int width) {
  Image out(image.channels(), height, width);
  for (int c = 0; c < image.channels(); ++c) {
    cv::Mat src(image.height(), image.width(), CV_32FC1,
                const_cast<float*>(image.tensor().data()) +
                    static_cast<std::size_t>(c) * image.height() * image.width());
    cv::Mat dst(height, width, CV_32FC1,
                out.tensor().data() + static_cast<std::size_t>(c) * height * width);
    cv::resize(src, dst, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
  }
  for (auto& v : out.tensor().storage()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

BinaryMask resize_nearest(const BinaryMask& mask, int height, int width) {
  cv::Mat src(mask.height, mask.width, CV_8UC1, const_cast<std::uint8_t*>(mask.values.data()));
  BinaryMask out(height, width);
  cv::Mat dst(height, width, CV_8UC1, out.values.data());
  cv::resize(src, dst, cv::Size(width, height), 0, 0, cv::INTER_NEAREST);
  return out;
}

// ---------------------------------------------------------------------------
// Loading

std::vector<std::size_t> exclusion_filter(const std::vector<Image>& images, double threshold) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < images.size(); ++i)
    if (!(images[i].mean() < threshold)) kept.push_back(i);
  return kept;
}

namespace {

void apply_exclusion(Dataset& data, double threshold) {
  const auto kept = exclusion_filter(data.train, threshold);
  std::vector<Image> train;
  std::vector<std::string> ids;
  for (std::size_t i : kept) {
    train.push_back(std::move(data.train[i]));
    ids.push_back(std::move(data.train_ids[i]));
  }
  data.excluded += static_cast<int>(data.train.size() - kept.size());
  data.train = std::move(train);
  data.train_ids = std::move(ids);
}

Dataset load_mvtec(const DatasetSpec& spec) {
  const fs::path train_dir = spec.root / "train" / "good";
  const fs::path test_dir = spec.root / "test";
  const fs::path truth_dir = spec.root / "ground_truth";
  require_dir(spec.root);
  require_dir(train_dir);
  require_dir(test_dir);

  Dataset data;
  for (const auto& path : list_images(train_dir)) {
    data.train.push_back(preprocess(read_image(path, spec.channels), spec));
    data.train_ids.push_back("good/" + path.stem().string());
  }
  for (const auto& category : list_subdirs(test_dir)) {
    const auto images = list_images(test_dir / category);
    const bool normal = category == "good";
    if (!normal) {
      require_dir(truth_dir / category);
      const auto masks = list_images(truth_dir / category);
      if (masks.size() != images.size()) {
        throw IntegrityError("category '" + category + "': " + std::to_string(images.size()) +
                             " test images but " + std::to_string(masks.size()) + " masks in " +
                             (truth_dir / category).string());
      }
    }
    for (const auto& path : images) {
      LabeledImage item;
      item.category = category;
      item.id = category + "/" + path.stem().string();
      item.image = preprocess(read_image(path, spec.channels), spec);
      if (normal) {
        item.mask = BinaryMask(spec.height, spec.width);
      } else {
        const fs::path mask_path = truth_dir / category / (path.stem().string() + "_mask.png");
        if (!fs::exists(mask_path)) throw IntegrityError("missing ground-truth mask: " + mask_path.string());
        BinaryMask mask = read_mask(mask_path);
        if (mask.height != spec.height || mask.width != spec.width) {
          mask = resize_nearest(mask, spec.height, spec.width);
        }
        item.mask = std::move(mask);
      }
      data.test.push_back(std::move(item));
    }
  }
  return data;
}

Dataset load_flat(const DatasetSpec& spec) {
  require_dir(spec.root);
  Dataset data;
  for (const auto& path : list_images(spec.root)) {
    data.train.push_back(preprocess(read_image(path, spec.channels), spec));
    data.train_ids.push_back(path.stem().string());
  }
  return data;
}

}  // namespace

Dataset load_dataset(const DatasetSpec& spec) {
  if (spec.height < 1 || spec.width < 1) throw InputError("target size must be positive");
  Dataset data;
  switch (spec.layout) {
    case Layout::kMvtec:
      data = load_mvtec(spec);
      break;
    case Layout::kFlatSlices:
      data = load_flat(spec);
      break;
    case Layout::kSynthetic: {
      SyntheticBenchmark bench = spec.synthetic;
      data = synthesize(bench);
      for (auto& img : data.train) img = preprocess(std::move(img), spec);
      for (auto& item : data.test) {
        item.image = preprocess(std::move(item.image), spec);
        if (item.mask.height != spec.height || item.mask.width != spec.width)
          item.mask = resize_nearest(item.mask, spec.height, spec.width);
      }
      break;
    }
  }
  apply_exclusion(data, spec.exclusion_threshold);
  return data;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark

namespace {

// Texture values lie in [0.3, 0.7].
Image make_texture(Texture texture, int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Image img(1, h, w);
  switch (texture) {
    case Texture::kStripes: {
      const double angle = std::numbers::pi / 4.0 * static_cast<int>(uni(rng) * 4.0);
      const double period = 16.0 + 8.0 * uni(rng);
      const double phase = 2.0 * std::numbers::pi * uni(rng);
      const double cx = std::cos(angle), cy = std::sin(angle);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          img.at(0, y, x) = static_cast<float>(
              0.5 + 0.2 * std::sin(2.0 * std::numbers::pi * (x * cx + y * cy) / period + phase));
      break;
    }
    case Texture::kChecker: {
      const int cell = 6 + static_cast<int>(uni(rng) * 5.0);
      const int ox = static_cast<int>(uni(rng) * cell), oy = static_cast<int>(uni(rng) * cell);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          img.at(0, y, x) = (((x + ox) / cell + (y + oy) / cell) % 2) ? 0.65f : 0.35f;
      break;
    }
    case Texture::kBlobs: {
      std::vector<double> field(static_cast<std::size_t>(h) * w, 0.0);
      for (int b = 0; b < 6; ++b) {
        const double bx = uni(rng) * w, by = uni(rng) * h, s = 4.0 + 6.0 * uni(rng);
        const double sign = uni(rng) < 0.5 ? -1.0 : 1.0;
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x)
            field[static_cast<std::size_t>(y) * w + x] +=
                sign * std::exp(-((x - bx) * (x - bx) + (y - by) * (y - by)) / (2.0 * s * s));
      }
      const auto [lo, hi] = std::minmax_element(field.begin(), field.end());
      const double span = std::max(*hi - *lo, 1e-9);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          img.at(0, y, x) =
              static_cast<float>(0.3 + 0.4 * (field[static_cast<std::size_t>(y) * w + x] - *lo) / span);
      break;
    }
  }
  return img;
}

BinaryMask add_defect(Image& img, std::mt19937_64& rng) {
  const int h = img.height(), w = img.width();
  const double area = static_cast<double>(h) * w;
  const int lo = std::max(1, static_cast<int>(std::ceil(std::sqrt(0.01 * area))));
  const int hi = std::max(lo, std::min({h, w, static_cast<int>(std::floor(std::sqrt(0.10 * area)))}));
  std::uniform_int_distribution<int> side_dist(lo, hi);
  const int side = side_dist(rng);
  std::uniform_int_distribution<int> ydist(0, h - side), xdist(0, w - side);
  const int y0 = ydist(rng), x0 = xdist(rng);
  // The patch keeps the texture but shifts its intensity by delta >= 0.21, so
  // every defect pixel stays >= 0.2 away from the texture after 8-bit rounding.
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double sign = uni(rng) < 0.5 ? -1.0 : 1.0;
  const double delta = 0.21 + 0.09 * uni(rng);
  BinaryMask mask(h, w);
  for (int y = y0; y < y0 + side; ++y)
    for (int x = x0; x < x0 + side; ++x) {
      img.at(0, y, x) = static_cast<float>(img.at(0, y, x) + sign * delta);
      mask.at(y, x) = 1;
    }
  return mask;
}

void quantize_8bit(Image& img) {
  for (auto& v : img.tensor().storage()) v = from_byte(to_byte(v));
}

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

std::string stem(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", i);
  return buf;
}

}  // namespace

Dataset synthesize(const SyntheticBenchmark& b) {
  if (b.num_train < 1 || b.num_test_normal < 0 || b.num_test_anomalous < 0) {
    throw InputError("synthetic benchmark needs num_train >= 1 and non-negative test counts");
  }
  if (b.height < 8 || b.width < 8) throw InputError("synthetic images must be at least 8x8");
  Dataset data;
  for (int i = 0; i < b.num_train; ++i) {
    auto rng = stream_rng(b.seed, 0, i);
    Image img = make_texture(b.texture, b.height, b.width, rng);
    quantize_8bit(img);
    data.train.push_back(std::move(img));
    data.train_ids.push_back("good/" + stem(i));
  }
  // Category order matches a sorted directory listing: "defect" < "good".
  for (int i = 0; i < b.num_test_anomalous; ++i) {
    auto rng = stream_rng(b.seed, 2, i);
    LabeledImage item;
    item.category = "defect";
    item.id = "defect/" + stem(i);
    item.image = make_texture(b.texture, b.height, b.width, rng);
    item.mask = add_defect(item.image, rng);
    quantize_8bit(item.image);
    data.test.push_back(std::move(item));
  }
  for (int i = 0; i < b.num_test_normal; ++i) {
    auto rng = stream_rng(b.seed, 1, i);
    LabeledImage item;
    item.category = "good";
    item.id = "good/" + stem(i);
    item.image = make_texture(b.texture, b.height, b.width, rng);
    item.mask = BinaryMask(b.height, b.width);
    quantize_8bit(item.image);
    data.test.push_back(std::move(item));
  }
  return data;
}

void generate_synthetic(const SyntheticBenchmark& b, const fs::path& root) {
  const Dataset data = synthesize(b);
  fs::create_directories(root / "train" / "good");
  fs::create_directories(root / "test" / "good");
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    write_image(root / "train" / (data.train_ids[i] + ".png"), data.train[i]);
  }
  for (const auto& item : data.test) {
    write_image(root / "test" / (item.id + ".png"), item.image);
    if (item.category != "good") {
      write_mask(root / "ground_truth" / item.category /
                     (fs::path(item.id).filename().string() + "_mask.png"),
                 item.mask);
    }
  }
  if (b.num_test_anomalous == 0) fs::create_directories(root / "ground_truth");
}

}  // namespace vqad
