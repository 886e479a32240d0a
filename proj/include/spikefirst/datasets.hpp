// Copyright 2026 The spikefirst Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// MNIST (IDX) and CIFAR-10 (binary batch) readers, augmentation and input
// encoding.

#ifndef SPIKEFIRST_DATASETS_HPP_
#define SPIKEFIRST_DATASETS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>
#include <vector>

#include "spikefirst/errors.hpp"
#include "spikefirst/network.hpp"
#include "spikefirst/rng.hpp"
#include "spikefirst/tensor.hpp"

namespace spikefirst {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::size_t kNumClasses = 10;

enum class Split { kTrain, kTest };

struct LabeledImage {
  Tensor pixels;  // [C x H x W]
  std::size_t label = 0;
};

// Images are stored contiguously, [N x C x H x W].
struct Dataset {
  std::string name;
  Split split = Split::kTrain;
  Tensor images;
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
  Shape image_shape() const { return Shape(images.shape().begin() + 1, images.shape().end()); }
  std::size_t image_size() const { return shape_numel(image_shape()); }
  const double* image(std::size_t i) const { return images.raw() + i * image_size(); }

  LabeledImage at(std::size_t i) const {
    if (i >= size()) throw IndexError("dataset index " + std::to_string(i) + " out of range");
    Tensor px(image_shape());
    std::copy_n(image(i), image_size(), px.raw());
    return {std::move(px), labels[i]};
  }
};

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

inline void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 24));
  b.push_back(static_cast<std::uint8_t>(v >> 16));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint8_t to_byte(double x) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(x * 255.0), 0L, 255L));
}

}  // namespace detail

inline Dataset load_mnist_idx(const std::filesystem::path& images_path,
                              const std::filesystem::path& labels_path,
                              Split split = Split::kTrain) {
  const auto img = detail::read_file(images_path);
  const auto lab = detail::read_file(labels_path);
  if (img.size() < 16) throw IoError(images_path.string() + ": truncated header");
  if (lab.size() < 8) throw IoError(labels_path.string() + ": truncated header");
  if (detail::read_be32(img, 0) != kIdxImageMagic) {
    throw FormatError(images_path.string() + ": bad image magic");
  }
  if (detail::read_be32(lab, 0) != kIdxLabelMagic) {
    throw FormatError(labels_path.string() + ": bad label magic");
  }
  const std::size_t n = detail::read_be32(img, 4);
  const std::size_t rows = detail::read_be32(img, 8), cols = detail::read_be32(img, 12);
  const std::size_t n_lab = detail::read_be32(lab, 4);
  if (rows != 28 || cols != 28) {
    throw FormatError(images_path.string() + ": expected 28x28 images, got " +
                      std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (img.size() < 16 + n * rows * cols) throw IoError(images_path.string() + ": truncated pixel data");
  if (lab.size() < 8 + n_lab) throw IoError(labels_path.string() + ": truncated label data");
  if (n != n_lab) {
    throw ConsistencyError("image count " + std::to_string(n) + " != label count " +
                           std::to_string(n_lab));
  }
  Dataset ds;
  ds.name = "mnist";
  ds.split = split;
  ds.images = Tensor({n, 1, rows, cols});
  for (std::size_t i = 0; i < n * rows * cols; ++i) ds.images[i] = img[16 + i] / 255.0;
  ds.labels.assign(lab.begin() + 8, lab.begin() + 8 + static_cast<std::ptrdiff_t>(n));
  for (std::uint8_t l : ds.labels) {
    if (l >= kNumClasses) throw FormatError(labels_path.string() + ": label >= 10");
  }
  return ds;
}

// Writes a [N x 1 x H x W] dataset in [0, 1] back to IDX files.
inline void save_mnist_idx(const Dataset& ds, const std::filesystem::path& images_path,
                           const std::filesystem::path& labels_path) {
  const Shape s = ds.image_shape();
  if (s.size() != 3 || s[0] != 1) throw DimensionError("IDX export needs single-channel images");
  std::vector<std::uint8_t> img, lab;
  img.reserve(16 + ds.images.size());
  detail::put_be32(img, kIdxImageMagic);
  detail::put_be32(img, static_cast<std::uint32_t>(ds.size()));
  detail::put_be32(img, static_cast<std::uint32_t>(s[1]));
  detail::put_be32(img, static_cast<std::uint32_t>(s[2]));
  for (double x : ds.images.data()) img.push_back(detail::to_byte(x));
  detail::put_be32(lab, kIdxLabelMagic);
  detail::put_be32(lab, static_cast<std::uint32_t>(ds.size()));
  lab.insert(lab.end(), ds.labels.begin(), ds.labels.end());
  detail::write_file(images_path, img);
  detail::write_file(labels_path, lab);
}

// Loads `dir`/{train,t10k}-{images-idx3,labels-idx1}-ubyte.
inline Dataset load_mnist(const std::filesystem::path& dir, Split split) {
  const std::string prefix = split == Split::kTrain ? "train" : "t10k";
  return load_mnist_idx(dir / (prefix + "-images-idx3-ubyte"), dir / (prefix + "-labels-idx1-ubyte"),
                        split);
}

// ---------------------------------------------------------------------------
// CIFAR-10

inline constexpr std::size_t kCifarRecord = 3073;

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

// Decodes binary batches into [N x 3 x 32 x 32] in [0, 1].
inline Dataset load_cifar10_bin(const std::vector<std::filesystem::path>& paths,
                                Split split = Split::kTrain) {
  std::vector<std::uint8_t> all;
  for (const auto& p : paths) {
    const auto bytes = detail::read_file(p);
    if (bytes.size() % kCifarRecord != 0) {
      throw FormatError(p.string() + ": size " + std::to_string(bytes.size()) +
                        " is not a multiple of 3073");
    }
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  const std::size_t n = all.size() / kCifarRecord;
  Dataset ds;
  ds.name = "cifar10";
  ds.split = split;
  ds.images = Tensor({n, 3, 32, 32});
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* rec = all.data() + i * kCifarRecord;
    if (rec[0] >= kNumClasses) {
      throw FormatError("record " + std::to_string(i) + ": label " + std::to_string(rec[0]) + " >= 10");
    }
    ds.labels[i] = rec[0];
    double* dst = ds.images.raw() + i * 3072;
    for (std::size_t j = 0; j < 3072; ++j) dst[j] = rec[1 + j] / 255.0;
  }
  return ds;
}

inline ChannelStats channel_stats(const Dataset& ds) {
  const Shape s = ds.image_shape();
  if (s.size() != 3) throw DimensionError("channel_stats needs [C x H x W] images");
  const std::size_t c = s[0], plane = s[1] * s[2];
  ChannelStats st{std::vector<double>(c, 0.0), std::vector<double>(c, 0.0)};
  const double count = static_cast<double>(ds.size() * plane);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const double* p = ds.image(i) + ch * plane;
      for (std::size_t j = 0; j < plane; ++j) sum += p[j];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const double* p = ds.image(i) + ch * plane;
      for (std::size_t j = 0; j < plane; ++j) sq += (p[j] - mean) * (p[j] - mean);
    }
    st.mean[ch] = mean;
    st.stddev[ch] = std::sqrt(sq / count);
  }
  return st;
}

inline void standardize(Dataset& ds, const ChannelStats& st) {
  const Shape s = ds.image_shape();
  const std::size_t c = s.at(0), plane = s.at(1) * s.at(2);
  if (st.mean.size() != c || st.stddev.size() != c) throw DimensionError("channel stats size mismatch");
  for (std::size_t ch = 0; ch < c; ++ch) {
    if (!(st.stddev[ch] > 0.0)) throw NumericalError("channel " + std::to_string(ch) + " has zero variance");
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    double* p = ds.images.raw() + i * c * plane;
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t j = 0; j < plane; ++j) {
        p[ch * plane + j] = (p[ch * plane + j] - st.mean[ch]) / st.stddev[ch];
      }
    }
  }
}

struct CifarSplits {
  Dataset train;
  Dataset test;
  ChannelStats stats;
};

// Loads `dir`/data_batch_{1..5}.bin and test_batch.bin, standardized with the
// training-split statistics.
inline CifarSplits load_cifar10(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> train_paths;
  for (int i = 1; i <= 5; ++i) train_paths.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
  CifarSplits out;
  out.train = load_cifar10_bin(train_paths, Split::kTrain);
  out.test = load_cifar10_bin({dir / "test_batch.bin"}, Split::kTest);
  out.stats = channel_stats(out.train);
  standardize(out.train, out.stats);
  standardize(out.test, out.stats);
  return out;
}

// ---------------------------------------------------------------------------
// Subsets

inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.name = ds.name;
  out.split = ds.split;
  Shape s = ds.images.shape();
  s[0] = indices.size();
  out.images = Tensor(s);
  out.labels.resize(indices.size());
  const std::size_t sz = ds.image_size();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= ds.size()) throw IndexError("subset index out of range");
    std::copy_n(ds.image(indices[k]), sz, out.images.raw() + k * sz);
    out.labels[k] = ds.labels[indices[k]];
  }
  return out;
}

inline Dataset head(const Dataset& ds, std::size_t n) {
  std::vector<std::size_t> idx(std::min(n, ds.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return subset(ds, idx);
}

// Fisher-Yates permutation of [0, n) driven by `stream`.
inline std::vector<std::size_t> permutation(std::size_t n, RngStream& stream) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[stream.below(i)]);
  return p;
}

// Seeded validation subset drawn from a training split.
inline Dataset validation_subset(const Dataset& train, std::size_t count, std::uint64_t seed) {
  RngStream rng{seed, stream_key(0x5A11DA7Eull), 0};
  std::vector<std::size_t> p = permutation(train.size(), rng);
  p.resize(std::min(count, p.size()));
  return subset(train, p);
}

// ---------------------------------------------------------------------------
// Augmentation

struct AugmentConfig {
  bool flip = true;
  bool rotate = true;
  bool crop = true;
  double flip_prob = 0.5;
  double max_degrees = 15.0;
  std::size_t pad = 4;

  static AugmentConfig none() { return {false, false, false}; }
};

inline Tensor flip_horizontal(const Tensor& img) {
  const std::size_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  Tensor out(img.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) out.at(ch, y, x) = img.at(ch, y, w - 1 - x);
    }
  }
  return out;
}

// Rotation about the image centre; bilinear, zero outside the source.
inline Tensor rotate_bilinear(const Tensor& img, double degrees) {
  const std::size_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  const double rad = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const double cy = (static_cast<double>(h) - 1.0) / 2.0, cx = (static_cast<double>(w) - 1.0) / 2.0;
  Tensor out(img.shape());
  auto px = [&](std::size_t ch, long y, long x) {
    if (y < 0 || x < 0 || y >= static_cast<long>(h) || x >= static_cast<long>(w)) return 0.0;
    return img.at(ch, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
  };
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
      const double sy = cs * dy - sn * dx + cy;
      const double sx = sn * dy + cs * dx + cx;
      const double fy = std::floor(sy), fx = std::floor(sx);
      const double ay = sy - fy, ax = sx - fx;
      const long y0 = static_cast<long>(fy), x0 = static_cast<long>(fx);
      for (std::size_t ch = 0; ch < c; ++ch) {
        out.at(ch, y, x) = (1 - ay) * ((1 - ax) * px(ch, y0, x0) + ax * px(ch, y0, x0 + 1)) +
                           ay * ((1 - ax) * px(ch, y0 + 1, x0) + ax * px(ch, y0 + 1, x0 + 1));
      }
    }
  }
  return out;
}

// Zero-pads by `pad` on every side, then crops an HxW window at (dy, dx).
inline Tensor pad_crop(const Tensor& img, std::size_t pad, std::size_t dy, std::size_t dx) {
  const std::size_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  if (dy > 2 * pad || dx > 2 * pad) throw IndexError("crop offset outside the padded image");
  Tensor out(img.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const long sy = static_cast<long>(y + dy) - static_cast<long>(pad);
        const long sx = static_cast<long>(x + dx) - static_cast<long>(pad);
        if (sy >= 0 && sx >= 0 && sy < static_cast<long>(h) && sx < static_cast<long>(w)) {
          out.at(ch, y, x) = img.at(ch, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
        }
      }
    }
  }
  return out;
}

// Flip, rotate, pad-crop, in that order. Draws are taken only for enabled
// stages.
inline LabeledImage augment(const LabeledImage& image, const AugmentConfig& cfg, RngStream& stream) {
  if (image.pixels.rank() != 3) throw DimensionError("augment expects a [C x H x W] image");
  Tensor px = image.pixels;
  if (cfg.flip && stream.uniform() < cfg.flip_prob) px = flip_horizontal(px);
  if (cfg.rotate) px = rotate_bilinear(px, (2.0 * stream.uniform() - 1.0) * cfg.max_degrees);
  if (cfg.crop) {
    const std::size_t dy = stream.below(2 * cfg.pad + 1);
    const std::size_t dx = stream.below(2 * cfg.pad + 1);
    px = pad_crop(px, cfg.pad, dy, dx);
  }
  return {std::move(px), image.label};
}

// ---------------------------------------------------------------------------
// Encoding

// The same analog frame at every one of T steps: [T x C x H x W].
inline Tensor encode_direct(const Tensor& image, std::size_t timesteps) {
  if (timesteps < 1) throw ParameterError("encode_direct: T must be >= 1");
  Shape s{timesteps};
  s.insert(s.end(), image.shape().begin(), image.shape().end());
  Tensor out(s);
  for (std::size_t t = 0; t < timesteps; ++t) {
    std::copy_n(image.raw(), image.size(), out.raw() + t * image.size());
  }
  return out;
}

// Batch of samples `indices` as a direct-encoded network input.
inline EncodedBatch make_batch(const Dataset& ds, const std::vector<std::size_t>& indices,
                               std::size_t timesteps) {
  const std::size_t sz = ds.image_size();
  Tensor px({indices.size(), sz});
  for (std::size_t k = 0; k < indices.size(); ++k) {
    std::copy_n(ds.image(indices.at(k)), sz, px.raw() + k * sz);
  }
  return EncodedBatch::direct(std::move(px), timesteps);
}

}  // namespace spikefirst

#endif  // SPIKEFIRST_DATASETS_HPP_
