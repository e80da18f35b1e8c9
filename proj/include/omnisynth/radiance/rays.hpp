#pragma once

#include <cmath>
#include <vector>

#include "omnisynth/geometry/equirect.hpp"
#include "omnisynth/geometry/perspective.hpp"
#include "omnisynth/geometry/types.hpp"

namespace omnisynth::radiance {

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();  // unit length
  Color target = Color::Zero();    // meaningful only for supervised rays
};

/// One ray per pixel in row-major order.
inline std::vector<Ray> rays_for_panorama(const CameraPose& pose, int width, int height) {
  OMNISYNTH_REQUIRE(width > 0 && height > 0 && width == 2 * height, "panorama width must be twice its height");
  std::vector<Ray> rays;
  rays.reserve(static_cast<std::size_t>(width) * height);
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u) rays.push_back({pose.position, geometry::pixel_to_direction(u, v, width, height)});
  return rays;
}

inline std::vector<Ray> rays_for_pinhole(const CameraPose& pose, const geometry::PinholeView& view) {
  std::vector<Ray> rays;
  rays.reserve(static_cast<std::size_t>(view.width()) * view.height());
  for (int j = 0; j < view.height(); ++j)
    for (int i = 0; i < view.width(); ++i) rays.push_back({pose.position, view.direction(i, j)});
  return rays;
}

/// [x, sin(2^0 x), cos(2^0 x), ..., sin(2^{L-1} x), cos(2^{L-1} x)], each
/// frequency block holding all components.
inline std::vector<double> positional_encode(const std::vector<double>& x, int L) {
  OMNISYNTH_REQUIRE(L >= 0, "frequency count must be non-negative");
  std::vector<double> out(x.begin(), x.end());
  out.reserve(x.size() * (1 + 2 * static_cast<std::size_t>(L)));
  for (int k = 0; k < L; ++k) {
    const double f = std::ldexp(1.0, k);
    for (double xi : x) out.push_back(std::sin(f * xi));
    for (double xi : x) out.push_back(std::cos(f * xi));
  }
  return out;
}

inline std::size_t encoded_size(std::size_t dim, int L) { return dim * (1 + 2 * static_cast<std::size_t>(L)); }

/// Same layout as positional_encode for a 3-vector, written to `out`.
/// Higher frequencies come from the double-angle recurrence.
template <class T>
void encode3(const Vec3& x, int L, T* out) {
  double s[3], c[3];
  for (int k = 0; k < 3; ++k) {
    out[k] = static_cast<T>(x[k]);
    s[k] = std::sin(x[k]);
    c[k] = std::cos(x[k]);
  }
  T* p = out + 3;
  for (int f = 0; f < L; ++f) {
    for (int k = 0; k < 3; ++k) {
      p[k] = static_cast<T>(s[k]);
      p[3 + k] = static_cast<T>(c[k]);
      const double s2 = 2.0 * s[k] * c[k];
      c[k] = (c[k] - s[k]) * (c[k] + s[k]);
      s[k] = s2;
    }
    p += 6;
  }
}

}  // namespace omnisynth::radiance
