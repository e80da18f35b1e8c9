#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "omnisynth/diff/tape.hpp"

namespace omnisynth::radiance {

namespace detail {

// Composites one ray of n samples. sigma[n], color[n*3], t[n]; far closes
// the last interval. Writes rgb[3] and, when non-null, weights[n] and
// transmittance[n+1] (T_0 = 1, T_n = final transmittance).
template <class T>
void composite_ray(const T* sigma, const T* color, const T* t, T far, std::size_t n, T* rgb, T* weights,
                   T* transmittance) {
  rgb[0] = rgb[1] = rgb[2] = T(0);
  T trans = T(1);
  if (transmittance) transmittance[0] = trans;
  for (std::size_t i = 0; i < n; ++i) {
    const T delta = (i + 1 < n ? t[i + 1] : far) - t[i];
    const T keep = std::exp(-sigma[i] * delta);
    const T w = trans * (T(1) - keep);
    rgb[0] += w * color[3 * i];
    rgb[1] += w * color[3 * i + 1];
    rgb[2] += w * color[3 * i + 2];
    if (weights) weights[i] = w;
    trans *= keep;
    if (transmittance) transmittance[i + 1] = trans;
  }
}

}  // namespace detail

struct VolumeResult {
  Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
  std::vector<double> weights;
  double expected_depth = 0.0;
  double final_transmittance = 1.0;
};

/// Alpha compositing of per-sample density and colour along one ray.
/// The last sample's interval runs to `far`.
inline VolumeResult volume_render(const std::vector<double>& densities, const std::vector<Eigen::Vector3d>& colors,
                                  const std::vector<double>& distances, double far) {
  const std::size_t n = distances.size();
  OMNISYNTH_REQUIRE(n > 0 && densities.size() == n && colors.size() == n, "sample arrays must align");
  for (std::size_t i = 0; i < n; ++i) {
    OMNISYNTH_REQUIRE(densities[i] >= 0.0 && std::isfinite(densities[i]), "densities must be finite and >= 0");
    if (i > 0) OMNISYNTH_REQUIRE(distances[i] > distances[i - 1], "sample distances must be strictly increasing");
  }
  OMNISYNTH_REQUIRE(far >= distances[n - 1], "far must not precede the last sample");
  std::vector<double> flat(3 * n);
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) flat[3 * i + c] = colors[i][c];
  VolumeResult r;
  r.weights.resize(n);
  std::vector<double> trans(n + 1);
  detail::composite_ray(densities.data(), flat.data(), distances.data(), far, n, r.rgb.data(), r.weights.data(),
                        trans.data());
  for (std::size_t i = 0; i < n; ++i) r.expected_depth += r.weights[i] * distances[i];
  r.final_transmittance = trans[n];
  return r;
}

/// Differentiable batched compositing.
///
/// sigma: [R, N] non-negative densities; color: [R, N, 3]; t: R*N sample
/// depths (constant); far: per-ray far bound. Returns rgb [R, 3]. Weights are
/// copied to `weights_out` when given.
template <class T>
diff::Var<T> composite(diff::Var<T> sigma, diff::Var<T> color, const std::vector<T>& t, const std::vector<T>& far,
                       std::vector<T>* weights_out = nullptr) {
  const diff::Shape& ss = sigma.shape();
  if (ss.size() != 2) throw InvalidArgument("composite: sigma must be [rays, samples]");
  const std::size_t R = ss[0], N = ss[1];
  if (color.shape() != diff::Shape{R, N, 3}) throw InvalidArgument("composite: color must be [rays, samples, 3]");
  if (t.size() != R * N || far.size() != R) throw InvalidArgument("composite: depth arrays do not match");
  if (sigma.tape != color.tape) throw InvalidArgument("operands live on different tapes");

  diff::Tensor<T> out(diff::Shape{R, 3});
  std::vector<T> weights(R * N);
  std::vector<T> trans(R * (N + 1));
  const T* s = sigma.value().data();
  const T* c = color.value().data();
  for (std::size_t r = 0; r < R; ++r)
    detail::composite_ray(s + r * N, c + r * N * 3, t.data() + r * N, far[r], N, out.data() + 3 * r,
                          weights.data() + r * N, trans.data() + r * (N + 1));
  if (weights_out) *weights_out = weights;

  const std::size_t ids = sigma.id, idc = color.id;
  return sigma.tape->record(
      diff::Op::Custom, std::move(out), {ids, idc},
      [=, weights = std::move(weights), trans = std::move(trans)](diff::Tape<T>& tape, std::size_t self) {
        const auto& g = tape.grad_of(self);
        const T* cv = tape.value(idc).data();
        if (tape.requires_grad(idc)) {
          auto& gc = tape.grad_buffer(idc);
          for (std::size_t r = 0; r < R; ++r)
            for (std::size_t i = 0; i < N; ++i)
              for (int k = 0; k < 3; ++k) gc[(r * N + i) * 3 + k] += weights[r * N + i] * g[3 * r + k];
        }
        if (tape.requires_grad(ids)) {
          // d rgb / d sigma_k = delta_k (T_{k+1} c_k - sum_{i>k} w_i c_i).
          auto& gs = tape.grad_buffer(ids);
          for (std::size_t r = 0; r < R; ++r) {
            const T* gr = g.data() + 3 * r;
            T suffix = T(0);  // g . sum_{i>k} w_i c_i
            for (std::size_t k = N; k-- > 0;) {
              const std::size_t i = r * N + k;
              const T gc = gr[0] * cv[3 * i] + gr[1] * cv[3 * i + 1] + gr[2] * cv[3 * i + 2];
              const T delta = (k + 1 < N ? t[i + 1] : far[r]) - t[i];
              gs[i] += delta * (trans[r * (N + 1) + k + 1] * gc - suffix);
              suffix += weights[i] * gc;
            }
          }
        }
      });
}

}  // namespace omnisynth::radiance
