#pragma once

#include <variant>
#include <vector>

#include "omnisynth/core/parallel.hpp"
#include "omnisynth/radiance/field.hpp"
#include "omnisynth/radiance/sampling.hpp"
#include "omnisynth/radiance/volume.hpp"

namespace omnisynth::radiance {

template <class T>
struct BatchRender {
  diff::Var<T> coarse_rgb;  // [R, 3]
  diff::Var<T> fine_rgb;    // [R, 3]
  std::vector<double> depth;  // expected depth of the fine pass, per ray
};

namespace detail {

// Encoded inputs for samples laid out ray-major.
template <class T>
std::pair<diff::Tensor<T>, diff::Tensor<T>> encode_samples(const FieldConfig& config, const Ray* rays, std::size_t R,
                                                           const std::vector<double>& t, std::size_t N) {
  const std::size_t pd = config.pos_dim(), dd = config.dir_dim();
  diff::Tensor<T> pos(diff::Shape{R * N, pd});
  diff::Tensor<T> dir(diff::Shape{R * N, dd});
  std::vector<T> dir_code(dd);
  for (std::size_t r = 0; r < R; ++r) {
    encode3(rays[r].direction, config.l_dir, dir_code.data());
    for (std::size_t i = 0; i < N; ++i) {
      const std::size_t p = r * N + i;
      encode3<T>(rays[r].origin + t[p] * rays[r].direction, config.l_pos, pos.data() + p * pd);
      std::copy(dir_code.begin(), dir_code.end(), dir.data() + p * dd);
    }
  }
  return {std::move(pos), std::move(dir)};
}

template <class T>
diff::Var<T> render_pass(diff::Tape<T>& tape, const FieldConfig& config, const VarMap<T>& vars, const char* net,
                         const Ray* rays, std::size_t R, const std::vector<double>& t, std::size_t N,
                         std::vector<T>* weights) {
  auto [pos, dir] = encode_samples<T>(config, rays, R, t, N);
  const FieldOutput<T> out = field_forward(config, vars, net, tape.constant(std::move(pos)), tape.constant(std::move(dir)));
  std::vector<T> tt(t.begin(), t.end());
  std::vector<T> far(R, static_cast<T>(config.far));
  return composite(diff::reshape(out.sigma, {R, N}), diff::reshape(out.color, {R, N, 3}), tt, far, weights);
}

}  // namespace detail

/// Hierarchical render of R rays: stratified coarse pass, importance
/// samples from its weights, fine pass over the merged depths. With a null
/// rng sampling is deterministic (bin centres, evenly spaced quantiles).
template <class T>
BatchRender<T> render_batch(diff::Tape<T>& tape, const FieldConfig& config, const VarMap<T>& vars, const Ray* rays,
                            std::size_t R, int n_coarse, int n_fine, Rng* rng) {
  const std::size_t Nc = static_cast<std::size_t>(n_coarse);
  const std::size_t Nf = Nc + static_cast<std::size_t>(n_fine);
  std::vector<double> tc(R * Nc);
  for (std::size_t r = 0; r < R; ++r) {
    const auto s = stratified_samples(config.near, config.far, n_coarse, rng);
    std::copy(s.begin(), s.end(), tc.begin() + static_cast<std::ptrdiff_t>(r * Nc));
  }
  BatchRender<T> out;
  std::vector<T> wc;
  out.coarse_rgb = detail::render_pass(tape, config, vars, "coarse", rays, R, tc, Nc, &wc);

  std::vector<double> tf(R * Nf);
  std::vector<double> ray_t(Nc), ray_w(Nc);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t i = 0; i < Nc; ++i) {
      ray_t[i] = tc[r * Nc + i];
      ray_w[i] = static_cast<double>(wc[r * Nc + i]);
    }
    const auto s = importance_samples(ray_t, ray_w, n_fine, rng);
    std::copy(s.begin(), s.end(), tf.begin() + static_cast<std::ptrdiff_t>(r * Nf));
  }
  std::vector<T> wf;
  out.fine_rgb = detail::render_pass(tape, config, vars, "fine", rays, R, tf, Nf, &wf);
  out.depth.assign(R, 0.0);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t i = 0; i < Nf; ++i) out.depth[r] += static_cast<double>(wf[r * Nf + i]) * tf[r * Nf + i];
  return out;
}

struct RenderOptions {
  int n_coarse = 64;
  int n_fine = 128;
  std::size_t chunk = 256;  // rays per evaluation; fixed so results do not depend on threading
};

struct RenderedRays {
  std::vector<Color> rgb;
  std::vector<double> depth;
};

/// Deterministic inference over arbitrary rays, parallel over chunks.
inline RenderedRays render_rays(const RadianceField& field, const std::vector<Ray>& rays, const RenderOptions& opt) {
  OMNISYNTH_REQUIRE(opt.n_coarse >= 1 && opt.n_fine >= 1 && opt.chunk >= 1, "render sample counts must be positive");
  RenderedRays out;
  out.rgb.resize(rays.size());
  out.depth.resize(rays.size());
  const std::size_t chunks = (rays.size() + opt.chunk - 1) / opt.chunk;
  parallel_chunks(chunks, [&](std::size_t c) {
    const std::size_t begin = c * opt.chunk;
    const std::size_t R = std::min(opt.chunk, rays.size() - begin);
    diff::Tape<float> tape;
    const auto vars = bind_field(tape, field.params, false);
    const auto br = render_batch(tape, field.config, vars, rays.data() + begin, R, opt.n_coarse, opt.n_fine, nullptr);
    const auto& rgb = br.fine_rgb.value().values;
    for (std::size_t r = 0; r < R; ++r) {
      out.rgb[begin + r] = Color(rgb[3 * r], rgb[3 * r + 1], rgb[3 * r + 2]);
      out.depth[begin + r] = br.depth[r];
    }
  });
  return out;
}

struct EquirectCamera {
  int width;
  int height;
};

struct PinholeCamera {
  Vec3 view_dir;
  double fov_deg;
  int width;
  int height;
};

using Camera = std::variant<EquirectCamera, PinholeCamera>;

struct RenderedView {
  Image rgb;
  std::vector<double> depth;
};

inline RenderedView render_view(const RadianceField& field, const CameraPose& pose, const Camera& camera,
                                const RenderOptions& opt = {}) {
  std::vector<Ray> rays;
  int w = 0, h = 0;
  if (const auto* eq = std::get_if<EquirectCamera>(&camera)) {
    rays = rays_for_panorama(pose, eq->width, eq->height);
    w = eq->width;
    h = eq->height;
  } else {
    const auto& pin = std::get<PinholeCamera>(camera);
    rays = rays_for_pinhole(pose, geometry::PinholeView(pin.view_dir, pin.fov_deg, pin.width, pin.height));
    w = pin.width;
    h = pin.height;
  }
  RenderedRays rr = render_rays(field, rays, opt);
  RenderedView view;
  view.rgb = Image(w, h);
  view.rgb.rgb = std::move(rr.rgb);
  view.depth = std::move(rr.depth);
  return view;
}

}  // namespace omnisynth::radiance
