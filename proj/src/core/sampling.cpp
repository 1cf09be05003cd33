// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "sampling.hpp"

#include <algorithm>
#include <fstream>

#include "episodes.hpp"
#include "errors.hpp"

namespace hfsgm {

namespace {

std::vector<double> first_row(const SetData& s) {
  auto r = s.row(0);
  return {r.begin(), r.end()};
}

}  // namespace

Trajectory sample_refined(SetModel& model, const SetData& x, const RefineOptions& opts, Rng& rng) {
  if (opts.iters < 0) throw ConfigError("refinement iterations must be >= 0, got " + std::to_string(opts.iters));
  if (x.size < 1) throw ContractError("sample_refined: empty conditioning set");
  Trajectory t;
  Generated g = model.sample_conditional(x, rng);
  t.samples.push_back(first_row(g.samples));
  t.means.push_back(first_row(g.means));
  for (int k = 0; k < opts.iters; ++k) {
    const std::vector<double>& carry = opts.hard ? t.samples.back() : t.means.back();
    const SetData augmented = x.appended(carry);
    Generated r = model.reconstruct(augmented, opts.mode, rng);
    t.samples.push_back({r.samples.row(x.size).begin(), r.samples.row(x.size).end()});
    t.means.push_back({r.means.row(x.size).begin(), r.means.row(x.size).end()});
  }
  return t;
}

void dump_images(const std::filesystem::path& dir, int height, int width,
                 const std::vector<std::vector<double>>& images, const std::vector<DumpEntry>& entries) {
  if (images.size() != entries.size()) throw ContractError("dump_images: one entry per image required");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const auto manifest = dir / "manifest.csv";
  const bool fresh = !std::filesystem::exists(manifest);
  std::ofstream out(manifest, std::ios::app);
  if (!out) throw IoError("cannot open " + manifest.string());
  if (fresh) out << "file,class_id,seed,iteration,kind\n";
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (static_cast<int>(images[i].size()) != height * width) throw ContractError("dump_images: bad image size");
    Image img(height, width);
    std::transform(images[i].begin(), images[i].end(), img.pixels.begin(),
                   [](double v) { return std::clamp(v, 0.0, 1.0); });
    write_pgm(dir / entries[i].file, img);
    out << entries[i].file << ',' << entries[i].class_id << ',' << entries[i].seed << ',' << entries[i].iteration
        << ',' << entries[i].kind << '\n';
  }
  if (!out) throw IoError("write failed for " + manifest.string());
}

}  // namespace hfsgm
