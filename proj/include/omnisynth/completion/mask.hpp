#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <vector>

#include "omnisynth/core/rng.hpp"
#include "omnisynth/geometry/png_io.hpp"
#include "omnisynth/geometry/types.hpp"

namespace omnisynth::completion {

/// Per-pixel observation flags of a panorama, row-major; 1 = observed.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> observed;

  Mask() = default;
  Mask(int w, int h, bool fill) : width(w), height(h), observed(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {
    OMNISYNTH_REQUIRE(w > 0 && h > 0, "mask dimensions must be positive");
  }

  static Mask from_valid(const RgbdPanorama& pano) {
    Mask m(pano.width, pano.height, false);
    m.observed = pano.valid;
    return m;
  }

  std::size_t index(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
  std::size_t pixel_count() const { return observed.size(); }

  std::size_t observed_count() const {
    std::size_t n = 0;
    for (auto o : observed) n += o != 0;
    return n;
  }

  double observed_fraction() const { return static_cast<double>(observed_count()) / static_cast<double>(pixel_count()); }

  void require_matches(int w, int h) const {
    OMNISYNTH_REQUIRE(width == w && height == h && observed.size() == static_cast<std::size_t>(w) * h,
                      "mask dimensions do not match the panorama");
  }
};

namespace detail {

inline int wrap_column(long x, int w) {
  long r = x % w;
  return static_cast<int>(r < 0 ? r + w : r);
}

// Marks a disc as missing; columns wrap, rows clip.
inline void stamp_disc(std::vector<std::uint8_t>& missing, int w, int h, double cx, double cy, double r) {
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - r)));
  const int y1 = std::min(h - 1, static_cast<int>(std::ceil(cy + r)));
  const long x0 = static_cast<long>(std::floor(cx - r));
  const long x1 = static_cast<long>(std::ceil(cx + r));
  for (int y = y0; y <= y1; ++y)
    for (long x = x0; x <= x1; ++x) {
      const double dx = static_cast<double>(x) + 0.5 - cx, dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r * r) missing[static_cast<std::size_t>(y) * w + wrap_column(x, w)] = 1;
    }
}

inline void stamp_rectangle(std::vector<std::uint8_t>& missing, int w, int h, Rng& rng) {
  const int rw = 2 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(std::max(1, w / 4 - 1))));
  const int rh = 2 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(std::max(1, h / 4 - 1))));
  const int x0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(w)));
  const int y0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(std::max(1, h - rh + 1))));
  for (int y = y0; y < std::min(h, y0 + rh); ++y)
    for (int x = x0; x < x0 + rw; ++x) missing[static_cast<std::size_t>(y) * w + wrap_column(x, w)] = 1;
}

inline void stamp_stroke(std::vector<std::uint8_t>& missing, int w, int h, Rng& rng) {
  const double radius = rng.uniform(1.0, std::max(1.5, h / 16.0));
  double x = rng.uniform(0.0, w), y = rng.uniform(0.0, h);
  const int segments = 1 + static_cast<int>(rng.uniform_int(4));
  for (int s = 0; s < segments; ++s) {
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double length = rng.uniform(h / 8.0, h / 2.0);
    const int steps = std::max(1, static_cast<int>(std::ceil(length / 0.5)));
    for (int k = 0; k <= steps; ++k) {
      const double f = static_cast<double>(k) / steps;
      stamp_disc(missing, w, h, x + f * length * std::cos(angle), std::clamp(y + f * length * std::sin(angle), 0.0, h - 1e-9),
                 radius);
    }
    x += length * std::cos(angle);
    y = std::clamp(y + length * std::sin(angle), 0.0, h - 1e-9);
  }
}

}  // namespace detail

/// Random free-form hole pattern: strokes and rectangles are added until the
/// missing fraction reaches 1 - coverage_target. The last shape is kept only
/// when it brings the fraction closer to the target. Shapes wrap across the
/// left/right seam.
inline Mask random_mask(int width, int height, Rng& rng, double coverage_target) {
  OMNISYNTH_REQUIRE(coverage_target > 0.0 && coverage_target < 1.0, "coverage_target must lie in (0, 1)");
  Mask m(width, height, true);
  const double n = static_cast<double>(m.pixel_count());
  const double target = (1.0 - coverage_target) * n;
  std::vector<std::uint8_t> missing(m.pixel_count(), 0);
  double count = 0.0;
  while (count < target) {
    std::vector<std::uint8_t> next = missing;
    if (rng.uniform() < 0.5)
      detail::stamp_rectangle(next, width, height, rng);
    else
      detail::stamp_stroke(next, width, height, rng);
    double next_count = 0.0;
    for (auto x : next) next_count += x;
    if (next_count >= target) {
      if (next_count - target < target - count) missing.swap(next);
      break;
    }
    missing.swap(next);
    count = next_count;
  }
  for (std::size_t i = 0; i < missing.size(); ++i) m.observed[i] = missing[i] ? 0 : 1;
  return m;
}

inline void save_mask(const std::filesystem::path& path, const Mask& mask) {
  io::write_mask(path, mask.observed, mask.width, mask.height);
}

inline Mask load_mask(const std::filesystem::path& path, int width, int height) {
  Mask m(width, height, false);
  m.observed = io::read_mask(path);
  m.require_matches(width, height);
  return m;
}

}  // namespace omnisynth::completion
