#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "omnisynth/geometry/equirect.hpp"
#include "omnisynth/geometry/types.hpp"

namespace omnisynth::geometry {

/// Lifts every valid pixel to a coloured 3D point at depth * direction.
inline PointCloud panorama_to_points(const RgbdPanorama& pano) {
  PointCloud cloud;
  cloud.points.reserve(pano.valid_count());
  for (int v = 0; v < pano.height; ++v) {
    for (int u = 0; u < pano.width; ++u) {
      const std::size_t i = pano.index(u, v);
      if (!pano.valid[i]) continue;
      cloud.points.push_back({pano.depth[i] * pixel_to_direction(u, v, pano.width, pano.height), pano.rgb[i]});
    }
  }
  return cloud;
}

/// Splats the cloud into a panorama centred at `target`, one pixel per point,
/// nearest point wins. Ties keep the lower point index. Pixels that receive
/// nothing stay invalid.
inline RgbdPanorama reproject(const PointCloud& cloud, const CameraPose& target, int width, int height) {
  OMNISYNTH_REQUIRE(!cloud.empty(), "cannot reproject an empty point cloud");
  RgbdPanorama out(width, height);
  std::vector<double> zbuf(out.pixel_count(), std::numeric_limits<double>::infinity());
  for (const auto& pt : cloud.points) {
    const Vec3 d = pt.position - target.position;
    const double dist = d.norm();
    if (!(dist > 0.0)) continue;
    const auto [uf, vf] = direction_to_pixel(d, width, height);
    const int u = wrap_column(static_cast<long>(std::floor(uf + 0.5)), width);
    const int v = std::clamp(static_cast<int>(std::floor(vf + 0.5)), 0, height - 1);
    const std::size_t i = out.index(u, v);
    if (dist < zbuf[i]) {
      zbuf[i] = dist;
      out.depth[i] = dist;
      out.rgb[i] = pt.color;
      out.valid[i] = 1;
    }
  }
  return out;
}

struct DepthPlane {
  int width = 0;
  int height = 0;
  std::vector<double> depth;
  std::vector<std::uint8_t> valid;
};

namespace detail {
inline double median_of(std::vector<double>& values) {
  const std::size_t n = values.size();
  const std::size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}
}  // namespace detail

/// Median filter over valid depths, wrapping horizontally at the seam.
/// Invalid pixels are filled when at least half of the window is valid.
inline DepthPlane densify_depth(const DepthPlane& in, int window) {
  OMNISYNTH_REQUIRE(window >= 3 && window % 2 == 1, "median window must be odd and >= 3");
  const std::size_t n = static_cast<std::size_t>(in.width) * in.height;
  OMNISYNTH_REQUIRE(in.depth.size() == n && in.valid.size() == n, "depth plane size mismatch");
  DepthPlane out{in.width, in.height, std::vector<double>(n, 0.0), std::vector<std::uint8_t>(n, 0)};
  const int r = window / 2;
  const int area = window * window;
  std::vector<double> values;
  values.reserve(area);
  for (int v = 0; v < in.height; ++v) {
    for (int u = 0; u < in.width; ++u) {
      values.clear();
      for (int dv = -r; dv <= r; ++dv) {
        const int y = v + dv;
        if (y < 0 || y >= in.height) continue;
        for (int du = -r; du <= r; ++du) {
          const std::size_t j = static_cast<std::size_t>(y) * in.width + wrap_column(u + du, in.width);
          if (in.valid[j]) values.push_back(in.depth[j]);
        }
      }
      const std::size_t i = static_cast<std::size_t>(v) * in.width + u;
      if (values.empty()) continue;
      if (in.valid[i] || 2 * static_cast<int>(values.size()) >= area) {
        out.depth[i] = detail::median_of(values);
        out.valid[i] = 1;
      }
    }
  }
  return out;
}

/// Applies the depth median filter to a reprojected panorama and reconciles
/// colours with it. A pixel whose splatted point lies well behind the filtered
/// depth is a see-through background point; it and newly filled pixels take
/// the mean colour of window neighbours lying on the filtered surface.
inline RgbdPanorama densify_panorama(const RgbdPanorama& pano, int window, double tolerance = 0.1) {
  const DepthPlane filtered = densify_depth({pano.width, pano.height, pano.depth, pano.valid}, window);
  RgbdPanorama out(pano.width, pano.height);
  const int r = window / 2;
  for (int v = 0; v < pano.height; ++v) {
    for (int u = 0; u < pano.width; ++u) {
      const std::size_t i = pano.index(u, v);
      if (!filtered.valid[i]) continue;
      const double target = filtered.depth[i];
      const double band = tolerance * target;
      if (pano.valid[i] && std::abs(pano.depth[i] - target) <= band) {
        out.rgb[i] = pano.rgb[i];
        out.depth[i] = pano.depth[i];
        out.valid[i] = 1;
        continue;
      }
      Color sum = Color::Zero();
      int count = 0;
      for (int dv = -r; dv <= r; ++dv) {
        const int y = v + dv;
        if (y < 0 || y >= pano.height) continue;
        for (int du = -r; du <= r; ++du) {
          const std::size_t j = pano.index(wrap_column(u + du, pano.width), y);
          if (pano.valid[j] && std::abs(pano.depth[j] - target) <= band) {
            sum += pano.rgb[j];
            ++count;
          }
        }
      }
      if (count == 0) continue;
      out.rgb[i] = sum / static_cast<float>(count);
      out.depth[i] = target;
      out.valid[i] = 1;
    }
  }
  return out;
}

/// Horizontal extent of the lifted points.
inline DepthBounds depth_bounds(const PointCloud& cloud) {
  OMNISYNTH_REQUIRE(!cloud.empty(), "cannot bound an empty point cloud");
  DepthBounds b{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& p : cloud.points) {
    b.x_min = std::min(b.x_min, p.position.x());
    b.x_max = std::max(b.x_max, p.position.x());
    b.y_min = std::min(b.y_min, p.position.y());
    b.y_max = std::max(b.y_max, p.position.y());
  }
  b.validate();
  return b;
}

inline double max_depth(const RgbdPanorama& pano) {
  double m = 0.0;
  for (std::size_t i = 0; i < pano.pixel_count(); ++i)
    if (pano.valid[i]) m = std::max(m, pano.depth[i]);
  return m;
}

}  // namespace omnisynth::geometry
