#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <vector>

#include "omnisynth/core/error.hpp"

namespace omnisynth {

using Vec3 = Eigen::Vector3d;
using Color = Eigen::Vector3f;

/// Plain RGB image, row-major, values nominally in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<Color> rgb;

  Image() = default;
  Image(int w, int h, const Color& fill = Color::Zero())
      : width(w), height(h), rgb(static_cast<std::size_t>(w) * h, fill) {}

  std::size_t index(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
  Color& at(int u, int v) { return rgb[index(u, v)]; }
  const Color& at(int u, int v) const { return rgb[index(u, v)]; }
  std::size_t pixel_count() const { return rgb.size(); }
};

/// Equirectangular RGB-D panorama with a per-pixel validity mask.
///
/// Longitude maps linearly to columns and latitude to rows, so a horizontal
/// cyclic shift of the pixels is a rotation about the gravity (Z) axis.
/// Depth is the metric distance from the camera centre along the pixel ray.
struct RgbdPanorama {
  int width = 0;
  int height = 0;
  std::vector<Color> rgb;
  std::vector<double> depth;
  std::vector<std::uint8_t> valid;

  RgbdPanorama() = default;
  RgbdPanorama(int w, int h)
      : width(w),
        height(h),
        rgb(static_cast<std::size_t>(w) * h, Color::Zero()),
        depth(static_cast<std::size_t>(w) * h, 0.0),
        valid(static_cast<std::size_t>(w) * h, 0) {
    OMNISYNTH_REQUIRE(w > 0 && h > 0 && w == 2 * h, "panorama width must be twice its height");
  }

  std::size_t index(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
  std::size_t pixel_count() const { return rgb.size(); }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto m : valid) n += m != 0;
    return n;
  }

  Image color_image() const {
    Image img(width, height);
    img.rgb = rgb;
    return img;
  }

  // Checks the documented invariants; throws InvalidArgument on violation.
  void validate() const {
    OMNISYNTH_REQUIRE(width == 2 * height && width > 0, "panorama width must be twice its height");
    const std::size_t n = static_cast<std::size_t>(width) * height;
    OMNISYNTH_REQUIRE(rgb.size() == n && depth.size() == n && valid.size() == n,
                      "panorama plane sizes disagree with dimensions");
    for (std::size_t i = 0; i < n; ++i) {
      if (!valid[i]) continue;
      OMNISYNTH_REQUIRE(std::isfinite(depth[i]) && depth[i] >= 0.0, "valid depth must be finite and >= 0");
      for (int c = 0; c < 3; ++c)
        OMNISYNTH_REQUIRE(rgb[i][c] >= 0.f && rgb[i][c] <= 1.f, "rgb components must lie in [0,1]");
    }
  }
};

/// Camera position in the world frame (Z parallel to gravity). Poses carry
/// translation only.
struct CameraPose {
  Vec3 position = Vec3::Zero();

  CameraPose() = default;
  explicit CameraPose(const Vec3& p) : position(p) {
    OMNISYNTH_REQUIRE(p.allFinite(), "camera position must be finite");
  }
  CameraPose(double x, double y, double z) : CameraPose(Vec3(x, y, z)) {}
};

struct ColoredPoint {
  Vec3 position;
  Color color;
};

struct PointCloud {
  std::vector<ColoredPoint> points;
  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Horizontal extent of the lifted input depth, input camera at the origin.
struct DepthBounds {
  double x_min = -1.0;
  double x_max = 1.0;
  double y_min = -1.0;
  double y_max = 1.0;

  void validate() const {
    OMNISYNTH_REQUIRE(std::isfinite(x_min) && std::isfinite(x_max) && std::isfinite(y_min) &&
                          std::isfinite(y_max),
                      "depth bounds must be finite");
    OMNISYNTH_REQUIRE(x_min < 0.0 && 0.0 < x_max && y_min < 0.0 && 0.0 < y_max,
                      "depth bounds must enclose the origin");
  }
};

}  // namespace omnisynth
