#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "omnisynth/core/error.hpp"
#include "omnisynth/core/rng.hpp"

namespace omnisynth::radiance {

/// One draw per equal bin of [near, far]. Without an rng every draw is the
/// bin centre.
inline std::vector<double> stratified_samples(double near, double far, int n, Rng* rng) {
  OMNISYNTH_REQUIRE(near < far, "near must be below far");
  OMNISYNTH_REQUIRE(n >= 1, "sample count must be positive");
  std::vector<double> t(static_cast<std::size_t>(n));
  const double step = (far - near) / n;
  for (int i = 0; i < n; ++i) t[i] = near + step * (i + (rng ? rng->uniform() : 0.5));
  return t;
}

namespace detail {

// Enforces strict increase by nudging ties up one ulp at a time.
inline void make_strictly_increasing(std::vector<double>& t) {
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1])) t[i] = std::nextafter(t[i - 1], INFINITY);
}

}  // namespace detail

/// Bin edges around sorted sample depths: midpoints between neighbours,
/// outer edges mirrored (and kept non-negative).
inline std::vector<double> sample_bin_edges(const std::vector<double>& t) {
  const std::size_t n = t.size();
  std::vector<double> e(n + 1);
  if (n == 1) {
    const double half = std::max(1e-3, 0.01 * std::abs(t[0]));
    e[0] = std::max(0.0, t[0] - half);
    e[1] = t[0] + half;
    return e;
  }
  for (std::size_t i = 1; i < n; ++i) e[i] = 0.5 * (t[i - 1] + t[i]);
  e[0] = std::max(0.0, t[0] - 0.5 * (t[1] - t[0]));
  e[n] = t[n - 1] + 0.5 * (t[n - 1] - t[n - 2]);
  return e;
}

/// Draws n depths by inverse CDF over the bins of the coarse samples, bin
/// mass proportional to its weight (uniform when all weights vanish).
/// Without an rng the quantiles are evenly spaced. Unsorted, unmerged.
inline std::vector<double> inverse_cdf_samples(const std::vector<double>& coarse, const std::vector<double>& weights,
                                               int n, Rng* rng) {
  OMNISYNTH_REQUIRE(!coarse.empty() && coarse.size() == weights.size(), "coarse depths and weights must align");
  OMNISYNTH_REQUIRE(n >= 1, "fine sample count must be positive");
  for (std::size_t i = 1; i < coarse.size(); ++i)
    OMNISYNTH_REQUIRE(coarse[i] > coarse[i - 1], "coarse depths must be strictly increasing");
  const std::size_t m = coarse.size();
  const std::vector<double> edges = sample_bin_edges(coarse);
  double total = 0.0;
  for (double w : weights) {
    OMNISYNTH_REQUIRE(w >= 0.0 && std::isfinite(w), "weights must be finite and non-negative");
    total += w;
  }
  std::vector<double> cdf(m + 1, 0.0);
  for (std::size_t i = 0; i < m; ++i) cdf[i + 1] = cdf[i] + (total > 0.0 ? weights[i] / total : 1.0 / m);
  cdf[m] = 1.0;

  std::vector<double> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double u = rng ? rng->uniform() : (k + 0.5) / n;
    // First bin whose upper cdf exceeds u; empty bins are skipped.
    std::size_t b = static_cast<std::size_t>(std::upper_bound(cdf.begin() + 1, cdf.end(), u) - (cdf.begin() + 1));
    b = std::min(b, m - 1);
    const double mass = cdf[b + 1] - cdf[b];
    const double frac = mass > 0.0 ? std::clamp((u - cdf[b]) / mass, 0.0, 1.0) : 0.5;
    out[k] = edges[b] + frac * (edges[b + 1] - edges[b]);
  }
  return out;
}

/// Fine depths from inverse_cdf_samples merged with the coarse depths;
/// sorted and strictly increasing.
inline std::vector<double> importance_samples(const std::vector<double>& coarse, const std::vector<double>& weights,
                                              int n_fine, Rng* rng) {
  std::vector<double> out = inverse_cdf_samples(coarse, weights, n_fine, rng);
  out.insert(out.end(), coarse.begin(), coarse.end());
  std::sort(out.begin(), out.end());
  detail::make_strictly_increasing(out);
  return out;
}

}  // namespace omnisynth::radiance
