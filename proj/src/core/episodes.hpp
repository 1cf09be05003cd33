// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

// Class-indexed image datasets, class-disjoint splits and episode sampling.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "rng.hpp"
#include "set_data.hpp"

namespace hfsgm {

/// Grayscale image, row-major, values in [0,1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int h, int w, double fill = 0.0) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {}
  double& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }
  double at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }
};

struct ClassRecord {
  std::string class_id;
  std::vector<Image> images;
};

class ClassIndexedDataset {
 public:
  ClassIndexedDataset() = default;

  /// Appends a class; enforces unique ids, nonempty image lists and a
  /// uniform image size across the dataset.
  void add_class(ClassRecord record);

  const std::vector<ClassRecord>& classes() const { return classes_; }
  std::size_t class_count() const { return classes_.size(); }
  const ClassRecord& at(const std::string& class_id) const;
  bool contains(const std::string& class_id) const { return index_.count(class_id) != 0; }
  int height() const { return height_; }
  int width() const { return width_; }

 private:
  std::vector<ClassRecord> classes_;
  std::unordered_map<std::string, std::size_t> index_;
  int height_ = 0;
  int width_ = 0;
};

enum class SplitTag { train, val, test };

const char* split_name(SplitTag tag);
/// Throws ConfigError listing the valid names.
SplitTag parse_split(const std::string& name);

struct ClassSplits {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;

  const std::vector<std::string>& get(SplitTag tag) const;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

/// Deterministic seeded shuffle of the class ids cut into disjoint splits.
ClassSplits build_splits(const ClassIndexedDataset& dataset, SplitCounts counts, std::uint64_t seed);

enum class BinarizeMode { static_threshold, dynamic };

BinarizeMode parse_binarize_mode(const std::string& name);

/// static: pixel >= 0.5 -> 1. dynamic: Bernoulli(pixel) per pixel.
Image binarize(const Image& image, BinarizeMode mode, Rng& rng);

/// One homogeneous episode: S binarized observations of a single class.
struct SetBatch {
  std::string class_id;
  SplitTag split = SplitTag::train;
  int height = 0;
  int width = 0;
  SetData observations;

  int set_size() const { return observations.size; }
};

/// Uniform class from the split, then S images of that class (distinct when
/// the class has at least S images, with replacement otherwise).
SetBatch sample_episode(const ClassIndexedDataset& dataset, const ClassSplits& splits, SplitTag split,
                        int set_size, BinarizeMode mode, Rng& rng);

/// Same as sample_episode for a fixed class.
SetBatch sample_class_episode(const ClassIndexedDataset& dataset, const std::string& class_id, SplitTag split,
                              int set_size, BinarizeMode mode, Rng& rng);

/// Area-averaging resize.
Image box_resize(const Image& image, int height, int width);

// I/O.

/// Binary (P5) or ASCII (P2) PGM.
Image read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Image& image);
/// Grayscale PNG (other color types are converted by luminance).
Image read_png(const std::filesystem::path& path);

/// root/<class_id>/<image>.pgm|png, classes and files in lexicographic order.
/// Images are box-resized to (height, width) when both are positive.
ClassIndexedDataset load_directory(const std::filesystem::path& root, int height = 0, int width = 0);

/// Packed "SETS1" container.
ClassIndexedDataset load_packed(const std::filesystem::path& path);
void save_packed(const ClassIndexedDataset& dataset, const std::filesystem::path& path);

/// Dispatches on whether `path` is a directory or a packed file.
ClassIndexedDataset load_dataset(const std::filesystem::path& path, int height = 0, int width = 0);

/// Synthetic handwritten-stroke classes: each class is a random glyph of 2-4
/// Bezier strokes; instances are jittered, re-thickened renderings.
struct StrokeDatasetOptions {
  int classes = 100;
  int images_per_class = 20;
  int size = 28;
  std::uint64_t seed = 7;
};
ClassIndexedDataset make_stroke_dataset(const StrokeDatasetOptions& options);

}  // namespace hfsgm
