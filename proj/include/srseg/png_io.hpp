#pragma once

// PNG read/write via libpng. Images are exchanged with the rest of the
// library as [0,1] doubles; 8-bit and 16-bit files are scaled by their
// bit-depth maximum. Writers can embed tEXt metadata (config hash, seed).

#include <png.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "srseg/common.hpp"
#include "srseg/grid.hpp"

namespace srseg {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

/// Reads an 8- or 16-bit PNG as a 1- or 3-channel image in [0,1]. Palette
/// images are expanded to RGB and alpha is dropped.
inline Image read_png(const std::filesystem::path& path) {
  detail::FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw DataError("read_png: cannot open " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("read_png: libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("read_png: libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("read_png: failed to decode " + path.string());
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const png_byte color_type = png_get_color_type(png, info);
  png_byte bit_depth = png_get_bit_depth(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (bit_depth == 16) png_set_swap(png);  // little-endian in memory

  png_read_update_info(png, info);
  bit_depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("read_png: unsupported channel count in " + path.string());
  }

  const size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<png_byte> data(row_bytes * height);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = data.data() + y * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image out(static_cast<int>(height), static_cast<int>(width), channels);
  const double scale = bit_depth == 16 ? 65535.0 : 255.0;
  for (png_uint_32 y = 0; y < height; ++y) {
    for (png_uint_32 x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        double value;
        if (bit_depth == 16) {
          const uint16_t* row16 = reinterpret_cast<const uint16_t*>(rows[y]);
          value = row16[x * channels + c];
        } else {
          value = rows[y][x * channels + c];
        }
        out.plane(c).at(static_cast<int>(y), static_cast<int>(x)) = value / scale;
      }
    }
  }
  return out;
}

namespace detail {

inline void write_png_impl(const std::filesystem::path& path, int height, int width,
                           int channels, int bit_depth, const std::vector<png_byte>& data,
                           const std::map<std::string, std::string>& text) {
  detail::FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw DataError("write_png: cannot open " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("write_png: libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("write_png: libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("write_png: failed to encode " + path.string());
  }

  png_init_io(png, fp.get());
  const int color_type = channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);

  std::vector<png_text> chunks;
  chunks.reserve(text.size());
  for (const auto& [key, value] : text) {
    png_text t{};
    t.compression = PNG_TEXT_COMPRESSION_NONE;
    t.key = const_cast<char*>(key.c_str());
    t.text = const_cast<char*>(value.c_str());
    t.text_length = value.size();
    chunks.push_back(t);
  }
  if (!chunks.empty()) png_set_text(png, info, chunks.data(), static_cast<int>(chunks.size()));

  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);

  const size_t row_bytes = static_cast<size_t>(width) * channels * (bit_depth / 8);
  std::vector<png_bytep> rows(static_cast<size_t>(height));
  for (int y = 0; y < height; ++y)
    rows[static_cast<size_t>(y)] = const_cast<png_bytep>(data.data() + y * row_bytes);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace detail

/// Writes an image as 8-bit gray or RGB PNG.
inline void write_png8(const std::filesystem::path& path, const Image& img,
                       const std::map<std::string, std::string>& text = {}) {
  const int channels = img.channels();
  if (channels != 1 && channels != 3) throw ParameterError("write_png8: 1 or 3 channels only");
  std::vector<png_byte> data(static_cast<size_t>(img.height) * img.width * channels);
  size_t i = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < channels; ++c) {
        const double v = std::clamp(img.plane(c).at(y, x), 0.0, 1.0);
        data[i++] = static_cast<png_byte>(std::lround(v * 255.0));
      }
  detail::write_png_impl(path, img.height, img.width, channels, 8, data, text);
}

/// Writes a [0,1] grid as 16-bit grayscale PNG (probability maps).
inline void write_png16(const std::filesystem::path& path, const Grid& g,
                        const std::map<std::string, std::string>& text = {}) {
  std::vector<png_byte> data(static_cast<size_t>(g.height) * g.width * 2);
  size_t i = 0;
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) {
      const double v = std::clamp(g.at(y, x), 0.0, 1.0);
      const uint16_t q = static_cast<uint16_t>(std::lround(v * 65535.0));
      std::memcpy(&data[i], &q, 2);
      i += 2;
    }
  detail::write_png_impl(path, g.height, g.width, 1, 16, data, text);
}

/// Writes a binary mask as 8-bit grayscale (0 / 255).
inline void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask,
                           const std::map<std::string, std::string>& text = {}) {
  Image img(mask.height, mask.width, 1);
  for (size_t i = 0; i < mask.size(); ++i) img.plane(0).v[i] = mask.v[i] ? 1.0 : 0.0;
  write_png8(path, img, text);
}

/// Reads a mask PNG; grayscale values are binarized at 0.5.
inline BinaryMask read_mask_png(const std::filesystem::path& path) {
  const Image img = read_png(path);
  BinaryMask mask(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double v = 0.0;
      for (int c = 0; c < img.channels(); ++c) v += img.plane(c).at(y, x);
      v /= img.channels();
      mask.at(y, x) = v >= 0.5 ? 1 : 0;
    }
  return mask;
}

/// Reads a 16-bit (or 8-bit) grayscale PNG as a probability map.
inline ProbabilityMap read_probability_png(const std::filesystem::path& path) {
  const Image img = read_png(path);
  if (img.channels() != 1) throw DataError("probability map must be grayscale: " + path.string());
  return img.plane(0);
}

}  // namespace srseg
