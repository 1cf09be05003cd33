// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "errors.hpp"

namespace hfsgm {

namespace {

constexpr char kMagic[5] = {'H', 'F', 'S', 'G', '1'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void uint(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  const std::vector<char>& data() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> data) : buf_(std::move(data)) {}
  void bytes(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

void write_value(Writer& w, BlobType type, double v) {
  switch (type) {
    case BlobType::f64: w.uint(std::bit_cast<std::uint64_t>(v), 8); break;
    case BlobType::f32: w.uint(std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4); break;
    case BlobType::i64: w.uint(static_cast<std::uint64_t>(static_cast<std::int64_t>(v)), 8); break;
  }
}

double read_value(Reader& r, BlobType type) {
  switch (type) {
    case BlobType::f64: return std::bit_cast<double>(r.uint(8));
    case BlobType::f32: return static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(r.uint(4))));
    case BlobType::i64: return static_cast<double>(static_cast<std::int64_t>(r.uint(8)));
  }
  throw CheckpointError("unknown blob dtype");
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.uint(kCheckpointVersion, 4);
  const std::string cfg = to_json(ckpt.config).dump();
  w.uint(cfg.size(), 4);
  w.bytes(cfg.data(), cfg.size());
  w.uint(ckpt.blobs.size(), 4);
  for (const auto& [name, blob] : ckpt.blobs) {
    if (name.size() > 0xffff) throw CheckpointError("blob name too long: " + name);
    w.uint(name.size(), 2);
    w.bytes(name.data(), name.size());
    w.uint(static_cast<std::uint8_t>(blob.type), 1);
    const Shape& s = blob.value.shape();
    if (s.size() > 0xff) throw CheckpointError("blob rank too large: " + name);
    w.uint(s.size(), 1);
    for (int d : s) w.uint(static_cast<std::uint32_t>(d), 4);
    for (double v : blob.value.data()) write_value(w, blob.type, v);
  }

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
    if (!out) throw IoError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  Reader r(std::vector<char>((std::istreambuf_iterator<char>(in)), {}));

  char magic[sizeof kMagic];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw CheckpointError(path.string() + " is not a checkpoint");
  const auto version = r.uint(4);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  std::string cfg(r.uint(4), '\0');
  r.bytes(cfg.data(), cfg.size());
  Checkpoint ckpt;
  try {
    ckpt.config = model_config_from_json(nlohmann::json::parse(cfg));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint config: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("invalid checkpoint config: ") + e.what());
  }
  const auto count = r.uint(4);
  for (std::uint64_t b = 0; b < count; ++b) {
    std::string name(r.uint(2), '\0');
    r.bytes(name.data(), name.size());
    const auto type = static_cast<BlobType>(r.uint(1));
    if (static_cast<int>(type) > 2) throw CheckpointError("blob " + name + " has unknown dtype");
    const auto rank = r.uint(1);
    Shape shape;
    std::uint64_t total = 1;
    for (std::uint64_t d = 0; d < rank; ++d) {
      shape.push_back(static_cast<int>(r.uint(4)));
      total *= static_cast<std::uint64_t>(shape.back());
      if (total > (1ull << 32)) throw CheckpointError("blob " + name + " is implausibly large");
    }
    Tensor value(shape, 0.0);
    for (double& v : value.data()) v = read_value(r, type);
    if (!ckpt.blobs.emplace(name, Blob{type, std::move(value)}).second) {
      throw CheckpointError("duplicate blob " + name);
    }
  }
  if (!r.done()) throw CheckpointError("trailing bytes after the last blob");
  return ckpt;
}

Checkpoint make_checkpoint(const ModelConfig& config, const ParamStore& store, std::map<std::string, Blob> extra) {
  Checkpoint ckpt{config, std::move(extra)};
  for (const auto& [name, entry] : store.entries()) ckpt.blobs[name] = Blob{BlobType::f64, entry.value};
  return ckpt;
}

void restore_parameters(const Checkpoint& ckpt, const ModelConfig& expected, ParamStore& store) {
  if (!(ckpt.config == expected)) {
    throw CheckpointError("checkpoint config mismatch: stored " + to_json(ckpt.config).dump() + ", expected " +
                          to_json(expected).dump());
  }
  for (const auto& [name, entry] : store.entries()) {
    auto it = ckpt.blobs.find(name);
    if (it == ckpt.blobs.end()) throw CheckpointError("checkpoint lacks parameter " + name);
    if (it->second.value.shape() != entry.value.shape()) {
      throw CheckpointError("parameter " + name + " has shape " + shape_str(it->second.value.shape()) +
                            ", expected " + shape_str(entry.value.shape()));
    }
  }
  for (auto& [name, entry] : store.entries()) entry.value = ckpt.blobs.at(name).value;
}

}  // namespace hfsgm
