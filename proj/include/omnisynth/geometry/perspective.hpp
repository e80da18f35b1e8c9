#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "omnisynth/geometry/equirect.hpp"
#include "omnisynth/geometry/types.hpp"

namespace omnisynth::geometry {

/// Pinhole camera looking along `forward` with the world Z axis as up
/// reference. Horizontal field of view in degrees.
class PinholeView {
 public:
  PinholeView(const Vec3& forward, double fov_deg, int width, int height) : width_(width), height_(height) {
    OMNISYNTH_REQUIRE(fov_deg > 0.0 && fov_deg < 180.0, "field of view must lie in (0, 180) degrees");
    OMNISYNTH_REQUIRE(width > 0 && height > 0, "image dimensions must be positive");
    const double n = forward.norm();
    OMNISYNTH_REQUIRE(n > 0.0 && std::isfinite(n), "view direction must be non-zero");
    forward_ = forward / n;
    Vec3 up_ref = Vec3::UnitZ();
    if (std::abs(forward_.dot(up_ref)) > 1.0 - 1e-9) up_ref = Vec3::UnitX();
    right_ = forward_.cross(up_ref).normalized();
    up_ = right_.cross(forward_);
    tan_x_ = std::tan(fov_deg * std::numbers::pi / 360.0);
    tan_y_ = tan_x_ * height / width;
  }

  Vec3 direction(int i, int j) const {
    const double sx = (2.0 * (i + 0.5) / width_ - 1.0) * tan_x_;
    const double sy = (1.0 - 2.0 * (j + 0.5) / height_) * tan_y_;
    return (forward_ + sx * right_ + sy * up_).normalized();
  }

  int width() const { return width_; }
  int height() const { return height_; }
  const Vec3& forward() const { return forward_; }

 private:
  int width_;
  int height_;
  Vec3 forward_, right_, up_;
  double tan_x_ = 1.0;
  double tan_y_ = 1.0;
};

inline Color sample_direction(const RgbdPanorama& pano, const Vec3& dir) {
  const auto [u, v] = direction_to_pixel(dir, pano.width, pano.height);
  return sample_bilinear(pano.rgb, pano.width, pano.height, u, v);
}

/// Gnomonic resampling of the panorama colours.
inline Image perspective_crop(const RgbdPanorama& pano, const Vec3& view_dir, double fov_deg, int out_w, int out_h) {
  const PinholeView view(view_dir, fov_deg, out_w, out_h);
  Image out(out_w, out_h);
  for (int j = 0; j < out_h; ++j)
    for (int i = 0; i < out_w; ++i) out.at(i, j) = sample_direction(pano, view.direction(i, j));
  return out;
}

/// View direction from yaw (about Z, from +X) and pitch (elevation), degrees.
inline Vec3 yaw_pitch_direction(double yaw_deg, double pitch_deg) {
  return lonlat_to_direction(yaw_deg * std::numbers::pi / 180.0, pitch_deg * std::numbers::pi / 180.0);
}

}  // namespace omnisynth::geometry
