#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "omnisynth/geometry/types.hpp"

namespace omnisynth::io {

/// Decoded PNG samples widened to 16 bits.
struct RawPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

namespace detail {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) throw Error("cannot open " + path.string());
  return f;
}
}  // namespace detail

inline RawPng read_png(const std::filesystem::path& path) {
  auto file = detail::open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw FormatError(path.string() + " is not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("libpng initialisation failed");
  }
  RawPng out;
  std::vector<png_bytep> rows;
  std::vector<png_byte> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("corrupt PNG data in " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color_type = png_get_color_type(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (bit_depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  bit_depth = png_get_bit_depth(png, info);
  out.bit_depth = bit_depth;
  const std::size_t stride = png_get_rowbytes(png, info);
  buffer.resize(stride * out.height);
  rows.resize(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = buffer.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t count = static_cast<std::size_t>(out.width) * out.height * out.channels;
  out.samples.resize(count);
  if (bit_depth == 16) {
    for (std::size_t i = 0; i < count; ++i)
      out.samples[i] = static_cast<std::uint16_t>(buffer[2 * i] | (buffer[2 * i + 1] << 8));
  } else {
    for (std::size_t i = 0; i < count; ++i) out.samples[i] = buffer[i];
  }
  return out;
}

inline void write_png(const std::filesystem::path& path, const RawPng& img) {
  OMNISYNTH_REQUIRE(img.channels == 1 || img.channels == 3, "only gray and RGB PNGs are written");
  OMNISYNTH_REQUIRE(img.bit_depth == 8 || img.bit_depth == 16, "bit depth must be 8 or 16");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto file = detail::open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng initialisation failed");
  }
  const int bytes = img.bit_depth / 8;
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels * bytes;
  std::vector<png_byte> buffer(stride * img.height);
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    if (bytes == 2) {
      buffer[2 * i] = static_cast<png_byte>(img.samples[i] >> 8);
      buffer[2 * i + 1] = static_cast<png_byte>(img.samples[i] & 0xff);
    } else {
      buffer[i] = static_cast<png_byte>(img.samples[i]);
    }
  }
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y) rows[y] = buffer.data() + y * stride;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, img.width, img.height, img.bit_depth,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline std::uint16_t to_u8(float x) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(x, 0.f, 1.f) * 255.f));
}

inline void write_rgb(const std::filesystem::path& path, const std::vector<Color>& rgb, int width, int height) {
  RawPng raw{width, height, 3, 8, {}};
  raw.samples.reserve(rgb.size() * 3);
  for (const auto& c : rgb)
    for (int k = 0; k < 3; ++k) raw.samples.push_back(to_u8(c[k]));
  write_png(path, raw);
}

inline void write_image(const std::filesystem::path& path, const Image& img) {
  write_rgb(path, img.rgb, img.width, img.height);
}

inline Image read_image(const std::filesystem::path& path) {
  const RawPng raw = read_png(path);
  Image img(raw.width, raw.height);
  const float scale = raw.bit_depth == 16 ? 1.f / 65535.f : 1.f / 255.f;
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const std::uint16_t* p = raw.samples.data() + i * raw.channels;
    if (raw.channels >= 3)
      img.rgb[i] = Color(p[0], p[1], p[2]) * scale;
    else
      img.rgb[i] = Color::Constant(p[0] * scale);
  }
  return img;
}

struct PanoramaPaths {
  std::filesystem::path rgb;
  std::filesystem::path depth;
  std::filesystem::path mask;  // optional; empty = derive from depth > 0
};

/// Writes RGB (8-bit), depth (16-bit, `depth_scale` units per metre, 0 =
/// invalid) and mask (8-bit, 255 = valid).
inline void write_panorama(const PanoramaPaths& paths, const RgbdPanorama& pano, double depth_scale = 1000.0) {
  OMNISYNTH_REQUIRE(depth_scale > 0.0, "depth_scale must be positive");
  write_rgb(paths.rgb, pano.rgb, pano.width, pano.height);
  RawPng depth{pano.width, pano.height, 1, 16, std::vector<std::uint16_t>(pano.pixel_count(), 0)};
  RawPng mask{pano.width, pano.height, 1, 8, std::vector<std::uint16_t>(pano.pixel_count(), 0)};
  for (std::size_t i = 0; i < pano.pixel_count(); ++i) {
    if (!pano.valid[i]) continue;
    const double q = std::round(pano.depth[i] * depth_scale);
    depth.samples[i] = static_cast<std::uint16_t>(std::clamp(q, 1.0, 65535.0));
    mask.samples[i] = 255;
  }
  write_png(paths.depth, depth);
  if (!paths.mask.empty()) write_png(paths.mask, mask);
}

inline RgbdPanorama read_panorama(const PanoramaPaths& paths, double depth_scale = 1000.0) {
  OMNISYNTH_REQUIRE(depth_scale > 0.0, "depth_scale must be positive");
  const Image rgb = read_image(paths.rgb);
  const RawPng depth = read_png(paths.depth);
  if (depth.channels != 1 || depth.width != rgb.width || depth.height != rgb.height)
    throw FormatError("depth PNG must be single-channel and match the RGB image size");
  RgbdPanorama pano(rgb.width, rgb.height);
  pano.rgb = rgb.rgb;
  for (auto& c : pano.rgb) c = c.cwiseMax(0.f).cwiseMin(1.f);
  for (std::size_t i = 0; i < pano.pixel_count(); ++i) {
    pano.depth[i] = depth.samples[i] / depth_scale;
    pano.valid[i] = depth.samples[i] != 0;
  }
  if (!paths.mask.empty() && std::filesystem::exists(paths.mask)) {
    const RawPng mask = read_png(paths.mask);
    if (mask.width != rgb.width || mask.height != rgb.height) throw FormatError("mask PNG size mismatch");
    for (std::size_t i = 0; i < pano.pixel_count(); ++i)
      pano.valid[i] = pano.valid[i] && mask.samples[i * mask.channels] >= 128;
  }
  for (std::size_t i = 0; i < pano.pixel_count(); ++i)
    if (!pano.valid[i]) pano.depth[i] = 0.0;
  return pano;
}

inline void write_mask(const std::filesystem::path& path, const std::vector<std::uint8_t>& mask, int width,
                       int height) {
  RawPng raw{width, height, 1, 8, std::vector<std::uint16_t>(mask.size())};
  for (std::size_t i = 0; i < mask.size(); ++i) raw.samples[i] = mask[i] ? 255 : 0;
  write_png(path, raw);
}

inline std::vector<std::uint8_t> read_mask(const std::filesystem::path& path) {
  const RawPng raw = read_png(path);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(raw.width) * raw.height);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = raw.samples[i * raw.channels] >= 128;
  return mask;
}

}  // namespace omnisynth::io
