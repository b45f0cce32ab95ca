#pragma once

// Dataset handling: ingestion of paired image/mask directories into a split
// manifest, and the synthetic generators (textured backgrounds with thin
// polyline cracks) used for desk-scale training and tests.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "srseg/common.hpp"
#include "srseg/grid.hpp"
#include "srseg/png_io.hpp"

namespace srseg {

namespace fs = std::filesystem;

struct SampleRecord {
  std::string image;
  std::string mask;
  std::string split;  // "train" | "val" | "test"
  std::string sidecar;  // optional degradation sidecar
};

struct Manifest {
  int version = 1;
  uint64_t seed = 0;
  std::vector<SampleRecord> records;
  std::vector<std::string> warnings;

  std::vector<SampleRecord> split(const std::string& name) const {
    std::vector<SampleRecord> out;
    for (const auto& r : records)
      if (r.split == name) out.push_back(r);
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : records) {
      nlohmann::json j{{"image", r.image}, {"mask", r.mask}, {"split", r.split}};
      if (!r.sidecar.empty()) j["sidecar"] = r.sidecar;
      recs.push_back(j);
    }
    return nlohmann::json{{"version", version},
                          {"seed", seed},
                          {"records", recs},
                          {"warnings", warnings}};
  }

  static Manifest from_json(const nlohmann::json& j) {
    Manifest m;
    m.version = j.at("version").get<int>();
    m.seed = j.at("seed").get<uint64_t>();
    for (const auto& r : j.at("records")) {
      SampleRecord rec;
      rec.image = r.at("image").get<std::string>();
      rec.mask = r.at("mask").get<std::string>();
      rec.split = r.at("split").get<std::string>();
      if (r.contains("sidecar")) rec.sidecar = r.at("sidecar").get<std::string>();
      m.records.push_back(rec);
    }
    if (j.contains("warnings"))
      m.warnings = j.at("warnings").get<std::vector<std::string>>();
    return m;
  }
};

/// Split assignment as a pure function of (stem, seed): stable under
/// reordering and incremental dataset growth.
inline std::string split_for_stem(const std::string& stem, uint64_t seed,
                                  double train_frac = 0.7, double val_frac = 0.15) {
  const double u = static_cast<double>(splitmix64(fnv1a64(stem) ^ seed) >> 11) * 0x1.0p-53;
  if (u < train_frac) return "train";
  if (u < train_frac + val_frac) return "val";
  return "test";
}

/// Scans root/images and root/masks (falling back to *.png / *_mask.png pairs
/// in root itself) and builds a manifest. Unpaired files and dimension
/// mismatches are reported as warnings; mismatched records are rejected.
inline Manifest ingest(const fs::path& root, uint64_t seed, double train_frac = 0.7,
                       double val_frac = 0.15) {
  if (!fs::is_directory(root)) throw DataError("ingest: not a directory: " + root.string());

  std::map<std::string, fs::path> images, masks;
  const fs::path img_dir = fs::is_directory(root / "images") ? root / "images" : root;
  const fs::path mask_dir = fs::is_directory(root / "masks") ? root / "masks" : root;
  const bool flat = img_dir == mask_dir;

  for (const auto& e : fs::directory_iterator(img_dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".png") continue;
    std::string stem = e.path().stem().string();
    if (flat && stem.ends_with("_mask")) continue;
    images[stem] = e.path();
  }
  for (const auto& e : fs::directory_iterator(mask_dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".png") continue;
    std::string stem = e.path().stem().string();
    if (flat) {
      if (!stem.ends_with("_mask")) continue;
      stem = stem.substr(0, stem.size() - 5);
    }
    masks[stem] = e.path();
  }

  Manifest m;
  m.seed = seed;
  for (const auto& [stem, img_path] : images) {
    auto it = masks.find(stem);
    if (it == masks.end()) {
      m.warnings.push_back("unpaired image: " + img_path.string());
      continue;
    }
    const Image img = read_png(img_path);
    const Image msk = read_png(it->second);
    if (img.height != msk.height || img.width != msk.width) {
      m.warnings.push_back("dimension mismatch, record rejected: " + img_path.string());
      continue;
    }
    SampleRecord rec;
    rec.image = img_path.string();
    rec.mask = it->second.string();
    rec.split = split_for_stem(stem, seed, train_frac, val_frac);
    m.records.push_back(rec);
  }
  for (const auto& [stem, mask_path] : masks)
    if (!images.count(stem)) m.warnings.push_back("unpaired mask: " + mask_path.string());

  if (m.records.empty()) throw DataError("ingest: no image/mask pairs under " + root.string());
  return m;
}

inline void save_manifest(const Manifest& m, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path.string());
  out << m.to_json().dump(2) << "\n";
}

inline Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read manifest: " + path.string());
  nlohmann::json j;
  in >> j;
  return Manifest::from_json(j);
}

struct SynthSample {
  Image image;
  BinaryMask mask;
};

namespace detail {

// Smooth low-frequency background: a few random cosine gratings over a base
// gray level, plus mild per-pixel noise.
inline Grid synth_background(int size, Rng& rng) {
  Grid g(size, size, rng.uniform(0.55, 0.8));
  const int waves = 3 + static_cast<int>(rng.uniform_int(3));
  for (int k = 0; k < waves; ++k) {
    const double fx = rng.uniform(0.5, 3.0) * 2.0 * kPi / size;
    const double fy = rng.uniform(0.5, 3.0) * 2.0 * kPi / size;
    const double phase = rng.uniform(0.0, 2.0 * kPi);
    const double amp = rng.uniform(0.01, 0.05);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        g.at(y, x) += amp * std::cos(fx * x + fy * y + phase);
  }
  for (double& v : g.v) v = std::clamp(v + 0.015 * (rng.uniform() - 0.5), 0.0, 1.0);
  return g;
}

// Stamps a disk of the given radius; returns pixels newly added to the mask.
inline int stamp(Grid& img, BinaryMask& mask, double cy, double cx, double radius,
                 double depth) {
  int added = 0;
  const int r = static_cast<int>(std::ceil(radius));
  for (int y = std::max(0, static_cast<int>(cy) - r);
       y <= std::min(img.height - 1, static_cast<int>(cy) + r); ++y)
    for (int x = std::max(0, static_cast<int>(cx) - r);
         x <= std::min(img.width - 1, static_cast<int>(cx) + r); ++x) {
      const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
      if (d2 <= radius * radius) {
        img.at(y, x) = std::min(img.at(y, x), depth);
        if (!mask.at(y, x)) {
          mask.at(y, x) = 1;
          ++added;
        }
      }
    }
  return added;
}

// Draws one random polyline crack, 1-3 px wide (2-3 px dominant so cracks
// survive blur + x4 downsampling). Stops early if the total crack fraction
// would exceed the budget.
inline void draw_crack(Grid& img, BinaryMask& mask, Rng& rng, size_t budget) {
  const int size = img.height;
  double y = rng.uniform(0.1, 0.9) * size;
  double x = rng.uniform(0.1, 0.9) * size;
  double heading = rng.uniform(0.0, 2.0 * kPi);
  const uint64_t width_draw = rng.uniform_int(4);
  const double width = width_draw == 0 ? 1.0 : (width_draw < 3 ? 2.0 : 3.0);
  const double depth = rng.uniform(0.02, 0.22);
  const int segments = 8 + static_cast<int>(rng.uniform_int(10));
  size_t drawn = mask.foreground_count();

  for (int s = 0; s < segments; ++s) {
    const double len = rng.uniform(2.0, 6.0);
    heading += rng.uniform(-0.5, 0.5);
    const double step = 0.7;
    for (double t = 0.0; t <= len; t += step) {
      const double py = y + t * std::sin(heading);
      const double px = x + t * std::cos(heading);
      if (py < 1 || py >= size - 1 || px < 1 || px >= size - 1) return;
      drawn += static_cast<size_t>(stamp(img, mask, py, px, width / 2.0, depth));
      if (drawn > budget) return;
    }
    y += len * std::sin(heading);
    x += len * std::cos(heading);
  }
}

}  // namespace detail

/// Deterministic synthetic crack dataset: textured backgrounds crossed by
/// 1-3 px polyline cracks with exact masks. About `crack_free_frac` of the
/// images carry no crack at all; the crack pixel fraction per image stays
/// below 5%.
inline std::vector<SynthSample> synth_cracks(int count, int size, uint64_t seed,
                                             double crack_free_frac = 0.1) {
  if (size < 32) throw ParameterError("synth_cracks: size must be >= 32");
  std::vector<SynthSample> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(i), 0xda7aull));
    SynthSample s;
    Grid g = detail::synth_background(size, rng);
    s.mask = BinaryMask(size, size);
    if (rng.uniform() >= crack_free_frac) {
      const size_t budget = static_cast<size_t>(0.045 * size * size);
      const int cracks = 1 + static_cast<int>(rng.uniform_int(2));
      for (int c = 0; c < cracks; ++c) detail::draw_crack(g, s.mask, rng, budget);
    }
    s.image = Image(size, size, 1);
    s.image.plane(0) = std::move(g);
    s.image.clamp01();
    out.push_back(std::move(s));
  }
  return out;
}

/// Crack-free textured images for SR pre-training.
inline std::vector<Image> synth_textures(int count, int size, uint64_t seed) {
  std::vector<Image> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(i), 0x7e47ull));
    Image img(size, size, 1);
    img.plane(0) = detail::synth_background(size, rng);
    // Sprinkle a few darker blobs so the SR task is not pure low-frequency.
    BinaryMask scratch(size, size);
    const int blobs = 2 + static_cast<int>(rng.uniform_int(4));
    for (int b = 0; b < blobs; ++b)
      detail::stamp(img.plane(0), scratch, rng.uniform(0.0, 1.0) * size,
                    rng.uniform(0.0, 1.0) * size, rng.uniform(1.0, 3.0),
                    rng.uniform(0.2, 0.5));
    img.clamp01();
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace srseg
