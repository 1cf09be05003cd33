// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "episodes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#ifdef HFSGM_HAVE_PNG
#include <png.h>
#endif

namespace hfsgm {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- dataset

void ClassIndexedDataset::add_class(ClassRecord record) {
  if (record.images.empty()) throw DataError("class '" + record.class_id + "' has no images");
  if (index_.count(record.class_id)) throw DataError("duplicate class id '" + record.class_id + "'");
  for (const Image& img : record.images) {
    if (img.height <= 0 || img.width <= 0 ||
        img.pixels.size() != static_cast<std::size_t>(img.height) * img.width) {
      throw DataError("class '" + record.class_id + "' contains a malformed image");
    }
    if (height_ == 0) {
      height_ = img.height;
      width_ = img.width;
    } else if (img.height != height_ || img.width != width_) {
      throw DataError("class '" + record.class_id + "' has a " + std::to_string(img.height) + "x" +
                      std::to_string(img.width) + " image; dataset images are " + std::to_string(height_) +
                      "x" + std::to_string(width_));
    }
  }
  index_.emplace(record.class_id, classes_.size());
  classes_.push_back(std::move(record));
}

const ClassRecord& ClassIndexedDataset::at(const std::string& class_id) const {
  auto it = index_.find(class_id);
  if (it == index_.end()) throw DataError("unknown class id '" + class_id + "'");
  return classes_[it->second];
}

// ---------------------------------------------------------------- splits

const char* split_name(SplitTag tag) {
  switch (tag) {
    case SplitTag::train: return "train";
    case SplitTag::val: return "val";
    case SplitTag::test: return "test";
  }
  return "?";
}

SplitTag parse_split(const std::string& name) {
  if (name == "train") return SplitTag::train;
  if (name == "val") return SplitTag::val;
  if (name == "test") return SplitTag::test;
  throw ConfigError("unknown split '" + name + "'; valid splits: train, val, test");
}

const std::vector<std::string>& ClassSplits::get(SplitTag tag) const {
  switch (tag) {
    case SplitTag::train: return train;
    case SplitTag::val: return val;
    case SplitTag::test: return test;
  }
  return train;
}

ClassSplits build_splits(const ClassIndexedDataset& dataset, SplitCounts counts, std::uint64_t seed) {
  const std::size_t total = counts.train + counts.val + counts.test;
  if (total != dataset.class_count()) {
    throw ConfigError("split counts sum to " + std::to_string(total) + " but the dataset has " +
                      std::to_string(dataset.class_count()) + " classes");
  }
  std::vector<std::string> ids;
  ids.reserve(total);
  for (const auto& c : dataset.classes()) ids.push_back(c.class_id);
  Rng rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.index(i)]);
  ClassSplits out;
  auto first = ids.begin();
  out.train.assign(first, first + static_cast<std::ptrdiff_t>(counts.train));
  first += static_cast<std::ptrdiff_t>(counts.train);
  out.val.assign(first, first + static_cast<std::ptrdiff_t>(counts.val));
  first += static_cast<std::ptrdiff_t>(counts.val);
  out.test.assign(first, ids.end());
  return out;
}

// ---------------------------------------------------------------- binarization

BinarizeMode parse_binarize_mode(const std::string& name) {
  if (name == "static") return BinarizeMode::static_threshold;
  if (name == "dynamic") return BinarizeMode::dynamic;
  throw ConfigError("unknown binarization '" + name + "'; valid: static, dynamic");
}

Image binarize(const Image& image, BinarizeMode mode, Rng& rng) {
  Image out(image.height, image.width);
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      const double v = image.at(r, c);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw DataError("pixel value " + std::to_string(v) + " outside [0,1] at (" + std::to_string(r) + ", " +
                        std::to_string(c) + ")");
      }
      if (mode == BinarizeMode::static_threshold) {
        out.at(r, c) = v >= 0.5 ? 1.0 : 0.0;
      } else {
        out.at(r, c) = rng.bernoulli(v) ? 1.0 : 0.0;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- episodes

SetBatch sample_class_episode(const ClassIndexedDataset& dataset, const std::string& class_id, SplitTag split,
                              int set_size, BinarizeMode mode, Rng& rng) {
  if (set_size < 1) throw ConfigError("set size must be >= 1, got " + std::to_string(set_size));
  const ClassRecord& cls = dataset.at(class_id);
  const std::size_t n = cls.images.size();
  std::vector<std::size_t> picks;
  if (n >= static_cast<std::size_t>(set_size)) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (int i = 0; i < set_size; ++i) {
      const std::size_t j = static_cast<std::size_t>(i) + rng.index(n - static_cast<std::size_t>(i));
      std::swap(order[static_cast<std::size_t>(i)], order[j]);
    }
    picks.assign(order.begin(), order.begin() + set_size);
  } else {
    for (int i = 0; i < set_size; ++i) picks.push_back(rng.index(n));
  }
  SetBatch batch;
  batch.class_id = class_id;
  batch.split = split;
  batch.height = dataset.height();
  batch.width = dataset.width();
  batch.observations = SetData(set_size, dataset.height() * dataset.width());
  for (int s = 0; s < set_size; ++s) {
    Image b = binarize(cls.images[picks[static_cast<std::size_t>(s)]], mode, rng);
    std::copy(b.pixels.begin(), b.pixels.end(), batch.observations.row(s).begin());
  }
  return batch;
}

SetBatch sample_episode(const ClassIndexedDataset& dataset, const ClassSplits& splits, SplitTag split,
                        int set_size, BinarizeMode mode, Rng& rng) {
  const auto& ids = splits.get(split);
  if (ids.empty()) throw ConfigError(std::string("split '") + split_name(split) + "' is empty");
  if (set_size < 1) throw ConfigError("set size must be >= 1, got " + std::to_string(set_size));
  const std::string& id = ids[rng.index(ids.size())];
  return sample_class_episode(dataset, id, split, set_size, mode, rng);
}

// ---------------------------------------------------------------- resize

Image box_resize(const Image& image, int height, int width) {
  if (height <= 0 || width <= 0) throw ContractError("box_resize: target size must be positive");
  if (image.height == height && image.width == width) return image;
  Image out(height, width);
  const double sy = static_cast<double>(image.height) / height;
  const double sx = static_cast<double>(image.width) / width;
  for (int r = 0; r < height; ++r) {
    const double y0 = r * sy, y1 = (r + 1) * sy;
    for (int c = 0; c < width; ++c) {
      const double x0 = c * sx, x1 = (c + 1) * sx;
      double acc = 0.0, area = 0.0;
      for (int iy = static_cast<int>(std::floor(y0)); iy < static_cast<int>(std::ceil(y1)) && iy < image.height; ++iy) {
        const double wy = std::min<double>(iy + 1, y1) - std::max<double>(iy, y0);
        if (wy <= 0) continue;
        for (int ix = static_cast<int>(std::floor(x0)); ix < static_cast<int>(std::ceil(x1)) && ix < image.width; ++ix) {
          const double wx = std::min<double>(ix + 1, x1) - std::max<double>(ix, x0);
          if (wx <= 0) continue;
          acc += wy * wx * image.at(iy, ix);
          area += wy * wx;
        }
      }
      out.at(r, c) = area > 0 ? std::clamp(acc / area, 0.0, 1.0) : 0.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------- PGM / PNG

namespace {

std::string next_pgm_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

}  // namespace

Image read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string magic = next_pgm_token(in);
  if (magic != "P5" && magic != "P2") throw DataError(path.string() + ": not a PGM file");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_pgm_token(in));
    h = std::stoi(next_pgm_token(in));
    maxval = std::stoi(next_pgm_token(in));
  } catch (const std::exception&) {
    throw DataError(path.string() + ": malformed PGM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw DataError(path.string() + ": invalid PGM header");
  Image img(h, w);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    int v = 0;
    if (magic == "P2") {
      const std::string tok = next_pgm_token(in);
      if (tok.empty()) throw DataError(path.string() + ": truncated PGM data");
      v = std::stoi(tok);
    } else if (maxval < 256) {
      const int ch = in.get();
      if (ch == EOF) throw DataError(path.string() + ": truncated PGM data");
      v = ch;
    } else {
      const int hi = in.get(), lo = in.get();
      if (lo == EOF) throw DataError(path.string() + ": truncated PGM data");
      v = (hi << 8) | lo;
    }
    img.pixels[i] = std::clamp(static_cast<double>(v) / maxval, 0.0, 1.0);
  }
  return img;
}

void write_pgm(const fs::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << image.width << " " << image.height << "\n255\n";
  for (double v : image.pixels) {
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

Image read_png(const fs::path& path) {
#ifdef HFSGM_HAVE_PNG
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
    throw DataError(path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_GRAY;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&png);
    throw DataError(path.string() + ": " + png.message);
  }
  Image img(static_cast<int>(png.height), static_cast<int>(png.width));
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = buf[i] / 255.0;
  return img;
#else
  throw DataError(path.string() + ": PNG support not compiled in");
#endif
}

ClassIndexedDataset load_directory(const fs::path& root, int height, int width) {
  if (!fs::is_directory(root)) throw IoError("dataset root " + root.string() + " is not a directory");
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) class_dirs.push_back(e.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  ClassIndexedDataset ds;
  for (const auto& dir : class_dirs) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      const auto ext = e.path().extension().string();
      if (e.is_regular_file() && (ext == ".pgm" || ext == ".png")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) continue;
    ClassRecord rec{dir.filename().string(), {}};
    for (const auto& f : files) {
      Image img = f.extension() == ".png" ? read_png(f) : read_pgm(f);
      if (height > 0 && width > 0) img = box_resize(img, height, width);
      rec.images.push_back(std::move(img));
    }
    ds.add_class(std::move(rec));
  }
  if (ds.class_count() == 0) throw DataError("no class directories with images under " + root.string());
  return ds;
}

namespace {

constexpr char kPackedMagic[5] = {'S', 'E', 'T', 'S', '1'};

template <class T>
void put_le(std::ostream& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

template <class T>
T get_le(std::istream& in, const fs::path& path) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int ch = in.get();
    if (ch == EOF) throw DataError(path.string() + ": truncated packed dataset");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(ch)) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace

ClassIndexedDataset load_packed(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[5];
  if (!in.read(magic, 5) || !std::equal(magic, magic + 5, kPackedMagic)) {
    throw DataError(path.string() + ": bad magic, expected SETS1");
  }
  const auto count = get_le<std::uint32_t>(in, path);
  ClassIndexedDataset ds;
  for (std::uint32_t c = 0; c < count; ++c) {
    const auto id_len = get_le<std::uint16_t>(in, path);
    std::string id(id_len, '\0');
    if (!in.read(id.data(), id_len)) throw DataError(path.string() + ": truncated packed dataset");
    const auto n = get_le<std::uint32_t>(in, path);
    const auto h = get_le<std::uint16_t>(in, path);
    const auto w = get_le<std::uint16_t>(in, path);
    ClassRecord rec{id, {}};
    std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w);
    for (std::uint32_t i = 0; i < n; ++i) {
      if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
        throw DataError(path.string() + ": truncated packed dataset");
      }
      Image img(h, w);
      for (std::size_t k = 0; k < buf.size(); ++k) img.pixels[k] = buf[k] / 255.0;
      rec.images.push_back(std::move(img));
    }
    ds.add_class(std::move(rec));
  }
  return ds;
}

void save_packed(const ClassIndexedDataset& dataset, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kPackedMagic, 5);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.class_count()));
  for (const auto& cls : dataset.classes()) {
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(cls.class_id.size()));
    out.write(cls.class_id.data(), static_cast<std::streamsize>(cls.class_id.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cls.images.size()));
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(dataset.height()));
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(dataset.width()));
    for (const Image& img : cls.images) {
      for (double v : img.pixels) {
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
      }
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

ClassIndexedDataset load_dataset(const fs::path& path, int height, int width) {
  if (fs::is_directory(path)) return load_directory(path, height, width);
  if (!fs::exists(path)) throw IoError("dataset path " + path.string() + " does not exist");
  ClassIndexedDataset ds = load_packed(path);
  if (height > 0 && width > 0 && (ds.height() != height || ds.width() != width)) {
    ClassIndexedDataset resized;
    for (const auto& cls : ds.classes()) {
      ClassRecord rec{cls.class_id, {}};
      for (const Image& img : cls.images) rec.images.push_back(box_resize(img, height, width));
      resized.add_class(std::move(rec));
    }
    return resized;
  }
  return ds;
}

// ---------------------------------------------------------------- synthetic strokes

namespace {

struct Point {
  double x, y;
};

struct Stroke {
  Point p0, p1, p2;  // quadratic Bezier
};

Point bezier(const Stroke& s, double t) {
  const double u = 1 - t;
  return {u * u * s.p0.x + 2 * u * t * s.p1.x + t * t * s.p2.x, u * u * s.p0.y + 2 * u * t * s.p1.y + t * t * s.p2.y};
}

double segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = a.x + t * dx - p.x, ey = a.y + t * dy - p.y;
  return std::sqrt(ex * ex + ey * ey);
}

Image render(const std::vector<Stroke>& strokes, int size, double thickness) {
  std::vector<std::pair<Point, Point>> segments;
  constexpr int kSteps = 12;
  for (const Stroke& s : strokes) {
    Point prev = bezier(s, 0.0);
    for (int i = 1; i <= kSteps; ++i) {
      Point cur = bezier(s, static_cast<double>(i) / kSteps);
      segments.emplace_back(prev, cur);
      prev = cur;
    }
  }
  Image img(size, size);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const Point p{c + 0.5, r + 0.5};
      double d = 1e9;
      for (const auto& [a, b] : segments) d = std::min(d, segment_distance(p, a, b));
      img.at(r, c) = std::clamp(1.0 - (d - thickness) / 0.8, 0.0, 1.0);
    }
  }
  return img;
}

}  // namespace

ClassIndexedDataset make_stroke_dataset(const StrokeDatasetOptions& options) {
  if (options.classes < 1 || options.images_per_class < 1 || options.size < 8) {
    throw ConfigError("stroke dataset needs >= 1 class, >= 1 image per class and size >= 8");
  }
  Rng rng(options.seed);
  ClassIndexedDataset ds;
  const double lo = options.size * 0.18, span = options.size * 0.64;
  const double centre = options.size / 2.0;
  for (int k = 0; k < options.classes; ++k) {
    const int n_strokes = 2 + static_cast<int>(rng.index(3));
    std::vector<Stroke> glyph;
    for (int s = 0; s < n_strokes; ++s) {
      auto pt = [&] { return Point{lo + span * rng.uniform(), lo + span * rng.uniform()}; };
      glyph.push_back({pt(), pt(), pt()});
    }
    ClassRecord rec;
    char id[32];
    std::snprintf(id, sizeof id, "glyph_%04d", k);
    rec.class_id = id;
    for (int i = 0; i < options.images_per_class; ++i) {
      const double angle = (rng.uniform() - 0.5) * 0.35;
      const double scl = 0.9 + 0.2 * rng.uniform();
      const double tx = (rng.uniform() - 0.5) * 3.0, ty = (rng.uniform() - 0.5) * 3.0;
      const double ca = std::cos(angle) * scl, sa = std::sin(angle) * scl;
      auto warp = [&](Point p) {
        const double x = p.x - centre, y = p.y - centre;
        return Point{centre + ca * x - sa * y + tx + 0.6 * rng.normal() * 0.5,
                     centre + sa * x + ca * y + ty + 0.6 * rng.normal() * 0.5};
      };
      std::vector<Stroke> inst;
      for (const Stroke& s : glyph) inst.push_back({warp(s.p0), warp(s.p1), warp(s.p2)});
      rec.images.push_back(render(inst, options.size, 0.9 + 0.6 * rng.uniform()));
    }
    ds.add_class(std::move(rec));
  }
  return ds;
}

}  // namespace hfsgm
