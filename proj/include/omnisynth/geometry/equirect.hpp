#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

#include "omnisynth/geometry/types.hpp"

namespace omnisynth::geometry {

// Pixel centres sit at (u + 0.5, v + 0.5). Longitude runs over [-pi, pi)
// left to right, latitude over (pi/2, -pi/2) top to bottom.

inline double pixel_longitude(double u, int width) {
  return 2.0 * std::numbers::pi * (u + 0.5) / width - std::numbers::pi;
}

inline double pixel_latitude(double v, int height) {
  return std::numbers::pi / 2.0 - std::numbers::pi * (v + 0.5) / height;
}

inline Vec3 lonlat_to_direction(double lon, double lat) {
  const double c = std::cos(lat);
  return {c * std::cos(lon), c * std::sin(lon), std::sin(lat)};
}

/// Unit viewing direction through the centre of pixel (u, v).
inline Vec3 pixel_to_direction(int u, int v, int width, int height) {
  OMNISYNTH_REQUIRE(width > 0 && height > 0, "image dimensions must be positive");
  OMNISYNTH_REQUIRE(u >= 0 && u < width && v >= 0 && v < height, "pixel index out of range");
  return lonlat_to_direction(pixel_longitude(u, width), pixel_latitude(v, height));
}

/// Continuous pixel coordinates of a direction; u is wrapped into
/// [-0.5, width - 0.5), i.e. onto the column whose centre is nearest.
/// Integer coordinates are pixel centres.
inline std::pair<double, double> direction_to_pixel(const Vec3& dir, int width, int height) {
  const double n = dir.norm();
  OMNISYNTH_REQUIRE(n > 0.0 && std::isfinite(n), "direction must be a non-zero finite vector");
  const double lon = std::atan2(dir.y(), dir.x());
  const double lat = std::asin(std::clamp(dir.z() / n, -1.0, 1.0));
  double u = (lon + std::numbers::pi) * width / (2.0 * std::numbers::pi) - 0.5;
  const double v = (std::numbers::pi / 2.0 - lat) * height / std::numbers::pi - 0.5;
  if (u < -0.5) u += width;
  if (u >= width - 0.5) u -= width;
  return {u, v};
}

inline int wrap_column(long u, int width) {
  long r = u % width;
  return static_cast<int>(r < 0 ? r + width : r);
}

/// Bilinear lookup with horizontal wrap and vertical clamp.
inline Color sample_bilinear(const std::vector<Color>& plane, int width, int height, double u, double v) {
  const double fu = std::floor(u);
  const double fv = std::floor(v);
  const float au = static_cast<float>(u - fu);
  const float av = static_cast<float>(v - fv);
  const int u0 = wrap_column(static_cast<long>(fu), width);
  const int u1 = wrap_column(static_cast<long>(fu) + 1, width);
  const int v0 = std::clamp(static_cast<int>(fv), 0, height - 1);
  const int v1 = std::clamp(static_cast<int>(fv) + 1, 0, height - 1);
  auto at = [&](int x, int y) -> const Color& { return plane[static_cast<std::size_t>(y) * width + x]; };
  const Color top = (1.f - au) * at(u0, v0) + au * at(u1, v0);
  const Color bottom = (1.f - au) * at(u0, v1) + au * at(u1, v1);
  return (1.f - av) * top + av * bottom;
}

/// Rotation about the gravity axis by whole pixels: column u moves to u + shift.
template <class T>
std::vector<T> shift_columns(const std::vector<T>& plane, int width, int height, int shift) {
  std::vector<T> out(plane.size());
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u)
      out[static_cast<std::size_t>(v) * width + wrap_column(u + shift, width)] =
          plane[static_cast<std::size_t>(v) * width + u];
  return out;
}

inline RgbdPanorama shift_columns(const RgbdPanorama& pano, int shift) {
  RgbdPanorama out = pano;
  out.rgb = shift_columns(pano.rgb, pano.width, pano.height, shift);
  out.depth = shift_columns(pano.depth, pano.width, pano.height, shift);
  out.valid = shift_columns(pano.valid, pano.width, pano.height, shift);
  return out;
}

}  // namespace omnisynth::geometry
