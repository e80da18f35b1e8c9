#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "omnisynth/completion/mask.hpp"

namespace omnisynth::completion {

struct DiffusionOptions {
  double tolerance = 1e-4;      // stop once no value moves by more than this in a sweep
  int max_iterations = 200000;  // hard cap; reaching it is not an error
};

/// Fills the unobserved entries of `planes` (channel-major, each width*height)
/// by Jacobi iteration of the 8-neighbour average. Columns wrap, rows clip.
/// Missing values start at the observed mean of their channel, so every fill
/// stays within the observed range of that channel.
inline int diffusion_fill(std::vector<std::vector<double>>& planes, const Mask& mask,
                          const DiffusionOptions& opt = {}) {
  const int w = mask.width, h = mask.height;
  const std::size_t n = mask.pixel_count();
  const std::size_t observed = mask.observed_count();
  OMNISYNTH_REQUIRE(observed > 0, "diffusion fill needs at least one observed pixel");
  if (observed == n) return 0;
  std::vector<std::size_t> holes;
  for (std::size_t i = 0; i < n; ++i)
    if (!mask.observed[i]) holes.push_back(i);

  for (auto& p : planes) {
    OMNISYNTH_REQUIRE(p.size() == n, "plane size does not match mask");
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask.observed[i]) mean += p[i];
    mean /= static_cast<double>(observed);
    for (auto i : holes) p[i] = mean;
  }

  std::vector<double> next(holes.size());
  int iter = 0;
  for (; iter < opt.max_iterations; ++iter) {
    double change = 0.0;
    for (auto& p : planes) {
      for (std::size_t k = 0; k < holes.size(); ++k) {
        const int u = static_cast<int>(holes[k] % w), v = static_cast<int>(holes[k] / w);
        double s = 0.0;
        int c = 0;
        for (int dv = -1; dv <= 1; ++dv) {
          const int y = v + dv;
          if (y < 0 || y >= h) continue;
          for (int du = -1; du <= 1; ++du) {
            if (du == 0 && dv == 0) continue;
            s += p[mask.index(detail::wrap_column(u + du, w), y)];
            ++c;
          }
        }
        next[k] = s / c;
      }
      for (std::size_t k = 0; k < holes.size(); ++k) {
        change = std::max(change, std::abs(next[k] - p[holes[k]]));
        p[holes[k]] = next[k];
      }
    }
    if (change < opt.tolerance) return iter + 1;
  }
  return iter;
}

/// Colour and depth of the missing pixels filled by diffusion; observed
/// pixels are copied unchanged and every output pixel is valid.
inline RgbdPanorama diffusion_complete(const RgbdPanorama& pano, const Mask& mask, const DiffusionOptions& opt = {}) {
  mask.require_matches(pano.width, pano.height);
  OMNISYNTH_REQUIRE(mask.observed_count() > 0, "baseline completion needs at least one observed pixel");
  const std::size_t n = pano.pixel_count();
  std::vector<std::vector<double>> planes(4, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) planes[c][i] = pano.rgb[i][c];
    planes[3][i] = pano.depth[i];
  }
  diffusion_fill(planes, mask, opt);
  RgbdPanorama out = pano;
  for (std::size_t i = 0; i < n; ++i) {
    out.valid[i] = 1;
    if (mask.observed[i]) continue;
    for (int c = 0; c < 3; ++c) out.rgb[i][c] = static_cast<float>(planes[c][i]);
    out.depth[i] = planes[3][i];
  }
  return out;
}

/// Depth of the missing pixels filled by diffusion, colour untouched.
inline void diffuse_depth(RgbdPanorama& pano, const Mask& mask, const DiffusionOptions& opt = {}) {
  mask.require_matches(pano.width, pano.height);
  std::vector<std::vector<double>> planes{pano.depth};
  diffusion_fill(planes, mask, opt);
  for (std::size_t i = 0; i < pano.pixel_count(); ++i)
    if (!mask.observed[i]) pano.depth[i] = planes[0][i];
}

}  // namespace omnisynth::completion
