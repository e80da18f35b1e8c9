#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numbers>

#include <Eigen/Geometry>

#include "omnisynth/radiance.hpp"
#include "support/gradcheck.hpp"

using namespace omnisynth;
using namespace omnisynth::radiance;
using omnisynth::testing::grad_check;

namespace {

// Kolmogorov distribution tail, P(K > lambda).
double kolmogorov_tail(double lambda) {
  if (lambda < 0.2) return 1.0;
  double p = 0.0;
  for (int k = 1; k < 100; ++k) p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

// Two-sided KS p-value of samples against Uniform(lo, hi).
double ks_uniform_p(std::vector<double> x, double lo, double hi) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = (x[i] - lo) / (hi - lo);
    d = std::max({d, f - i / n, (i + 1) / n - f});
  }
  const double sn = std::sqrt(n);
  return kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d);
}

// Piecewise-constant density integrated with a fine midpoint rule on the
// optical depth; shares no code with the compositing recurrence.
Eigen::Vector3d riemann_composite(const std::vector<double>& sigma, const std::vector<Eigen::Vector3d>& c,
                                  const std::vector<double>& t, double far, int steps) {
  Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
  double tau = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double delta = (i + 1 < t.size() ? t[i + 1] : far) - t[i];
    const double h = delta / steps;
    for (int m = 0; m < steps; ++m) rgb += std::exp(-(tau + sigma[i] * (m + 0.5) * h)) * sigma[i] * h * c[i];
    tau += sigma[i] * delta;
  }
  return rgb;
}

SupervisionImage constant_panorama(const Color& color, double depth, int w, int h) {
  SupervisionImage s;
  s.pano = RgbdPanorama(w, h);
  std::fill(s.pano.rgb.begin(), s.pano.rgb.end(), color);
  std::fill(s.pano.depth.begin(), s.pano.depth.end(), depth);
  std::fill(s.pano.valid.begin(), s.pano.valid.end(), 1);
  return s;
}

FieldConfig small_field() {
  FieldConfig c;
  c.layers = 2;
  c.width = 32;
  c.l_pos = 4;
  c.l_dir = 2;
  c.far = 2.0;
  return c;
}

TrainConfig small_train(std::uint64_t iterations) {
  TrainConfig t;
  t.n_coarse = 16;
  t.n_fine = 16;
  t.batch = 128;
  t.iterations = iterations;
  t.lr_start = 5e-3;
  t.lr_end = 5e-4;
  t.seed = 3;
  t.hook_period = 5;
  return t;
}

}  // namespace

// ---- encoding and rays ----------------------------------------------------

TEST(PositionalEncode, IdentityZeroAndLength) {
  const std::vector<double> x{0.3, -1.2, 2.5};
  EXPECT_EQ(positional_encode(x, 0), x);
  const auto z = positional_encode({0.0, 0.0, 0.0}, 3);
  ASSERT_EQ(z.size(), 21u);
  for (int k = 0; k < 3; ++k)
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(z[3 + 6 * k + c], 0.0);
      EXPECT_EQ(z[6 + 6 * k + c], 1.0);
    }
  EXPECT_EQ(positional_encode(x, 10).size(), 63u);
  EXPECT_THROW(positional_encode(x, -1), InvalidArgument);
}

TEST(PositionalEncode, BatchLayoutMatches) {
  const Vec3 x(0.7, -0.4, 1.9);
  const auto ref = positional_encode({x.x(), x.y(), x.z()}, 5);
  std::vector<double> out(ref.size());
  encode3(x, 5, out.data());
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(out[i], ref[i], 1e-12);
}

TEST(PanoramaRays, OriginsCountAndCoverage) {
  const CameraPose pose(0.5, -0.25, 1.0);
  const int w = 64, h = 32;
  const auto rays = rays_for_panorama(pose, w, h);
  ASSERT_EQ(rays.size(), static_cast<std::size_t>(w * h));
  Vec3 mean = Vec3::Zero();
  for (const auto& r : rays) {
    EXPECT_EQ(r.origin, pose.position);
    EXPECT_NEAR(r.direction.norm(), 1.0, 1e-6);
    mean += r.direction;
  }
  mean /= static_cast<double>(rays.size());
  EXPECT_LT(mean.norm(), 1.0 / h);
}

// ---- volume rendering -------------------------------------------------------

TEST(VolumeRender, EmptySpaceAndOpaqueSurface) {
  const std::vector<Eigen::Vector3d> c{{0.2, 0.4, 0.6}, {0.9, 0.1, 0.3}, {0.5, 0.5, 0.5}};
  const std::vector<double> t{1.0, 1.5, 2.0};
  const auto empty = volume_render({0, 0, 0}, c, t, 3.0);
  EXPECT_EQ(empty.rgb, Eigen::Vector3d::Zero());
  EXPECT_EQ(empty.weights[0] + empty.weights[1] + empty.weights[2], 0.0);
  EXPECT_EQ(empty.final_transmittance, 1.0);

  const auto opaque = volume_render({1e4, 1.0, 1.0}, c, t, 3.0);
  EXPECT_EQ(opaque.weights[0], 1.0);
  EXPECT_EQ(opaque.rgb, c[0]);
  EXPECT_EQ(opaque.expected_depth, 1.0);
}

TEST(VolumeRender, HalfOpacityAtLnTwo) {
  const double sigma = 2.0;
  const auto r = volume_render({sigma}, {Eigen::Vector3d(1, 1, 1)}, {1.0}, 1.0 + std::log(2.0) / sigma);
  EXPECT_NEAR(r.weights[0], 0.5, 1e-15);
}

TEST(VolumeRender, Errors) {
  const std::vector<Eigen::Vector3d> c(2, Eigen::Vector3d::Zero());
  EXPECT_THROW(volume_render({1, 1}, c, {2.0, 1.0}, 3.0), InvalidArgument);
  EXPECT_THROW(volume_render({1, 1}, c, {1.0, 1.0}, 3.0), InvalidArgument);
  EXPECT_THROW(volume_render({-1, 1}, c, {1.0, 2.0}, 3.0), InvalidArgument);
  EXPECT_THROW(volume_render({1}, c, {1.0, 2.0}, 3.0), InvalidArgument);
}

TEST(VolumeRender, MatchesRiemannOracleAndWeightIdentity) {
  Rng rng(11);
  double worst = 0.0, worst_identity = 0.0;
  for (int ray = 0; ray < 1000; ++ray) {
    const int n = 1 + static_cast<int>(rng.uniform_int(12));
    std::vector<double> sigma(n), t(n);
    std::vector<Eigen::Vector3d> c(n);
    double depth = rng.uniform(0.05, 0.5);
    for (int i = 0; i < n; ++i) {
      sigma[i] = rng.uniform() < 0.2 ? 0.0 : rng.uniform(0.0, 6.0);
      c[i] = Eigen::Vector3d(rng.uniform(), rng.uniform(), rng.uniform());
      t[i] = depth;
      depth += rng.uniform(0.01, 0.5);
    }
    const double far = depth;
    const auto r = volume_render(sigma, c, t, far);
    worst = std::max(worst, (r.rgb - riemann_composite(sigma, c, t, far, 4000)).cwiseAbs().maxCoeff());
    double wsum = 0.0;
    for (double w : r.weights) {
      ASSERT_GE(w, 0.0);
      wsum += w;
    }
    ASSERT_LE(wsum, 1.0 + 1e-15);
    worst_identity = std::max(worst_identity, std::abs(wsum - (1.0 - r.final_transmittance)));
  }
  EXPECT_LE(worst, 1e-6);
  EXPECT_LE(worst_identity, 1e-15);
}

TEST(Composite, MatchesVolumeRender) {
  Rng rng(2);
  const std::size_t R = 4, N = 6;
  diff::Tape<double> tape;
  diff::Tensor<double> sigma(diff::Shape{R, N}), color(diff::Shape{R, N, 3});
  std::vector<double> t(R * N), far(R);
  for (std::size_t r = 0; r < R; ++r) {
    double d = 0.1;
    for (std::size_t i = 0; i < N; ++i) {
      sigma[r * N + i] = rng.uniform(0.0, 3.0);
      for (int k = 0; k < 3; ++k) color[(r * N + i) * 3 + k] = rng.uniform();
      t[r * N + i] = d;
      d += rng.uniform(0.05, 0.3);
    }
    far[r] = d;
  }
  const auto out = composite(tape.leaf(sigma), tape.leaf(color), t, far);
  for (std::size_t r = 0; r < R; ++r) {
    std::vector<double> s(sigma.values.begin() + r * N, sigma.values.begin() + (r + 1) * N);
    std::vector<double> tt(t.begin() + r * N, t.begin() + (r + 1) * N);
    std::vector<Eigen::Vector3d> c(N);
    for (std::size_t i = 0; i < N; ++i) c[i] = Eigen::Vector3d(&color[(r * N + i) * 3]);
    const auto ref = volume_render(s, c, tt, far[r]);
    for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(out.value()[3 * r + k], ref.rgb[k]);
  }
}

TEST(Composite, GradientCheck) {
  Rng rng(5);
  const std::size_t R = 3, N = 5;
  diff::Tensor<double> sigma(diff::Shape{R, N}), color(diff::Shape{R, N, 3}), target(diff::Shape{R, 3});
  std::vector<double> t(R * N), far(R);
  for (auto& x : sigma.values) x = rng.uniform(0.1, 4.0);
  for (auto& x : color.values) x = rng.uniform();
  for (auto& x : target.values) x = rng.uniform();
  for (std::size_t r = 0; r < R; ++r) {
    double d = 0.2;
    for (std::size_t i = 0; i < N; ++i) {
      t[r * N + i] = d;
      d += rng.uniform(0.05, 0.4);
    }
    far[r] = d;
  }
  const auto res = grad_check({sigma, color}, [&](diff::Tape<double>& tape, const std::vector<diff::Var<double>>& v) {
    const auto rgb = composite(v[0], v[1], t, far);
    const auto d = diff::sub(rgb, tape.constant(target));
    return diff::sum(diff::mul(d, d));
  });
  EXPECT_TRUE(res.ok) << "max rel error " << res.max_rel_error;
}

// Loss of a 4-parameter analytic field: sigma = softplus(a z + b),
// color = sigmoid(c0 + c1 x) per channel.
TEST(Composite, ToyFieldLossGradient) {
  Rng rng(8);
  const std::size_t R = 6, N = 8;
  std::vector<Ray> rays(R);
  for (auto& r : rays) {
    r.direction = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    r.target = Color(rng.uniform(), rng.uniform(), rng.uniform()).cast<float>();
  }
  std::vector<double> t(R * N), far(R, 3.0);
  diff::Tensor<double> x(diff::Shape{R * N, 3}), target(diff::Shape{R, 3});
  for (std::size_t r = 0; r < R; ++r) {
    const auto s = stratified_samples(0.1, 3.0, static_cast<int>(N), &rng);
    for (std::size_t i = 0; i < N; ++i) {
      t[r * N + i] = s[i];
      const Vec3 p = rays[r].origin + s[i] * rays[r].direction;
      for (int k = 0; k < 3; ++k) x[(r * N + i) * 3 + k] = p[k];
    }
    for (int k = 0; k < 3; ++k) target[3 * r + k] = rays[r].target[k];
  }
  const std::vector<diff::Tensor<double>> theta{diff::Tensor<double>({1}, 0.7), diff::Tensor<double>({1}, 0.3),
                                                 diff::Tensor<double>({1}, -0.2), diff::Tensor<double>({1}, 1.1)};
  const auto res = grad_check(theta, [&](diff::Tape<double>& tape, const std::vector<diff::Var<double>>& p) {
    const auto xv = tape.constant(x);
    const auto z = diff::slice(xv, 1, 2, 3);
    const auto sigma = diff::softplus(diff::add(diff::mul(z, p[0]), p[1]));
    const auto color = diff::sigmoid(diff::add(diff::mul(xv, p[3]), p[2]));
    const auto rgb = composite(diff::reshape(sigma, {R, N}), diff::reshape(color, {R, N, 3}), t, far);
    const auto d = diff::sub(rgb, tape.constant(target));
    return diff::mean(diff::mul(d, d));
  });
  EXPECT_TRUE(res.ok) << "max rel error " << res.max_rel_error;
  EXPECT_LE(res.max_rel_error, 1e-4);
}

TEST(VolumeRender, RotationInvariance) {
  // Analytic field and the same field rotated by Q; rays rotated alike.
  const Eigen::Matrix3d Q = (Eigen::AngleAxisd(0.8, Vec3(1, 2, 3).normalized())).toRotationMatrix();
  auto sigma_at = [](const Vec3& p) { return 3.0 * std::exp(-(p - Vec3(1.0, 0.5, -0.2)).squaredNorm()); };
  auto color_at = [](const Vec3& p) {
    return Eigen::Vector3d(0.5 + 0.5 * std::sin(p.x()), 0.5 + 0.5 * std::cos(p.y()), 1.0 / (1.0 + p.squaredNorm()));
  };
  Rng rng(4);
  for (int k = 0; k < 50; ++k) {
    const Vec3 o(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    const Vec3 d = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const auto t = stratified_samples(0.02, 4.0, 64, nullptr);
    std::vector<double> s1, s2;
    std::vector<Eigen::Vector3d> c1, c2;
    for (double ti : t) {
      s1.push_back(sigma_at(o + ti * d));
      c1.push_back(color_at(o + ti * d));
      const Vec3 p2 = Q * o + ti * (Q * d);
      s2.push_back(sigma_at(Q.transpose() * p2));
      c2.push_back(color_at(Q.transpose() * p2));
    }
    const auto a = volume_render(s1, c1, t, 4.0);
    const auto b = volume_render(s2, c2, t, 4.0);
    EXPECT_LE((a.rgb - b.rgb).cwiseAbs().maxCoeff(), 1e-6);
  }
}

// ---- sampling --------------------------------------------------------------

TEST(Stratified, BinsAndMonteCarloMean) {
  Rng rng(1);
  const auto one = stratified_samples(0.5, 2.0, 1, &rng);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_TRUE(one[0] >= 0.5 && one[0] <= 2.0);

  const double near = 0.02, far = 4.0;
  const int n = 8;
  const double bin = (far - near) / n;
  std::vector<double> mean(n, 0.0);
  const int trials = 10000;
  Rng r(1000);
  for (int s = 0; s < trials; ++s) {
    const auto t = stratified_samples(near, far, n, &r);
    for (int i = 0; i < n; ++i) {
      ASSERT_GE(t[i], near + i * bin);
      ASSERT_LE(t[i], near + (i + 1) * bin);
      if (i > 0) ASSERT_GT(t[i], t[i - 1]);
      mean[i] += t[i] / trials;
    }
  }
  const double sd = bin / std::sqrt(12.0) / std::sqrt(static_cast<double>(trials));
  for (int i = 0; i < n; ++i) EXPECT_NEAR(mean[i], near + (i + 0.5) * bin, 3 * sd);
  EXPECT_THROW(stratified_samples(1.0, 1.0, 4, &rng), InvalidArgument);
}

TEST(Importance, SingleBinConcentrates) {
  const auto coarse = stratified_samples(0.0, 4.0, 8, nullptr);
  std::vector<double> w(8, 0.0);
  w[5] = 0.7;
  Rng rng(3);
  const auto fine = inverse_cdf_samples(coarse, w, 64, &rng);
  const auto edges = sample_bin_edges(coarse);
  for (double x : fine) {
    EXPECT_GE(x, edges[5]);
    EXPECT_LE(x, edges[6]);
  }
}

TEST(Importance, UniformWeightsGiveUniformDepths) {
  const auto coarse = stratified_samples(0.0, 4.0, 16, nullptr);
  const auto edges = sample_bin_edges(coarse);
  Rng rng(17);
  const auto fine = inverse_cdf_samples(coarse, std::vector<double>(16, 0.25), 10000, &rng);
  EXPECT_GT(ks_uniform_p(fine, edges.front(), edges.back()), 0.01);
  // All-zero weights fall back to the same distribution.
  Rng rng2(18);
  const auto fallback = inverse_cdf_samples(coarse, std::vector<double>(16, 0.0), 10000, &rng2);
  EXPECT_GT(ks_uniform_p(fallback, edges.front(), edges.back()), 0.01);
}

TEST(Importance, MergedOutputStrictlyIncreasing) {
  const auto coarse = stratified_samples(0.0, 4.0, 8, nullptr);
  std::vector<double> w(8, 0.0);
  w[3] = 1.0;
  // Deterministic quantiles put the middle draw exactly on a coarse depth.
  const auto merged = importance_samples(coarse, w, 5, nullptr);
  ASSERT_EQ(merged.size(), 13u);
  for (std::size_t i = 1; i < merged.size(); ++i) EXPECT_GT(merged[i], merged[i - 1]);
  EXPECT_THROW(importance_samples(coarse, std::vector<double>(8, -1.0), 4, nullptr), InvalidArgument);
}

// ---- field -------------------------------------------------------------------

TEST(Field, ForwardGradientCheck) {
  FieldConfig cfg;
  cfg.layers = 2;
  cfg.width = 4;
  cfg.l_pos = 1;
  cfg.l_dir = 1;
  cfg.far = 2.0;
  const auto field = RadianceField::initialize(cfg, 9);
  auto params = field.params.cast<double>();
  // Nonzero biases keep relu inputs off the kink; a positive density bias
  // keeps the density head active.
  Rng bias_rng(10);
  for (auto& p : params)
    if (p.name.find(".bias") != std::string::npos)
      for (auto& b : p.value.values) b = p.name.find("sigma") != std::string::npos ? 0.5 : bias_rng.uniform(-0.3, 0.3);
  std::vector<Ray> rays(3);
  Rng rng(1);
  diff::Tensor<double> target(diff::Shape{3, 3});
  for (auto& r : rays) r.direction = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
  for (auto& x : target.values) x = rng.uniform();
  std::vector<double> tc, tf;
  for (std::size_t r = 0; r < rays.size(); ++r) {
    const auto c = stratified_samples(cfg.near, cfg.far, 4, &rng);
    const auto f = stratified_samples(cfg.near, cfg.far, 6, &rng);
    tc.insert(tc.end(), c.begin(), c.end());
    tf.insert(tf.end(), f.begin(), f.end());
  }
  std::vector<diff::Tensor<double>> inputs;
  for (const auto& p : params) inputs.push_back(p.value);
  const auto res = grad_check(inputs, [&](diff::Tape<double>& tape, const std::vector<diff::Var<double>>& v) {
    VarMap<double> vars;
    for (std::size_t i = 0; i < params.size(); ++i) vars.emplace(params[i].name, v[i]);
    // Depths are held fixed: sample placement is not differentiated.
    const auto rgb_c = detail::render_pass<double>(tape, cfg, vars, "coarse", rays.data(), rays.size(), tc, 4, nullptr);
    const auto rgb_f = detail::render_pass<double>(tape, cfg, vars, "fine", rays.data(), rays.size(), tf, 6, nullptr);
    const auto tv = tape.constant(target);
    const auto dc = diff::sub(rgb_c, tv);
    const auto df = diff::sub(rgb_f, tv);
    return diff::add(diff::mean(diff::mul(dc, dc)), diff::mean(diff::mul(df, df)));
  });
  EXPECT_TRUE(res.ok) << "max rel error " << res.max_rel_error;
}

TEST(RenderView, ZeroDensityHeadIsBlack) {
  auto field = RadianceField::initialize(small_field(), 1);
  field.zero_density_heads();
  RenderOptions opt{8, 8};
  const auto eq = render_view(field, CameraPose(), EquirectCamera{16, 8}, opt);
  for (const auto& c : eq.rgb.rgb) EXPECT_EQ(c, Color::Zero());
  const auto pin = render_view(field, CameraPose(), PinholeCamera{Vec3::UnitX(), 90.0, 8, 6}, opt);
  EXPECT_EQ(pin.rgb.width, 8);
  for (const auto& c : pin.rgb.rgb) EXPECT_EQ(c, Color::Zero());
}

TEST(RenderView, ThreadCountDoesNotChangePixels) {
  const auto field = RadianceField::initialize(small_field(), 2);
  RenderOptions opt{8, 8, 32};
  const auto a = render_view(field, CameraPose(0.1, 0, 0), EquirectCamera{32, 16}, opt);
  setenv("OMNISYNTH_THREADS", "3", 1);
  const auto b = render_view(field, CameraPose(0.1, 0, 0), EquirectCamera{32, 16}, opt);
  setenv("OMNISYNTH_THREADS", "0", 1);
  EXPECT_EQ(a.rgb.rgb, b.rgb.rgb);
  EXPECT_EQ(a.depth, b.depth);
}

TEST(Field, SaveLoadRoundTrip) {
  const auto field = RadianceField::initialize(small_field(), 4);
  const auto stem = std::filesystem::temp_directory_path() / "omnisynth_field_roundtrip";
  save_field(stem, field);
  const auto loaded = load_field(stem);
  RenderOptions opt{8, 8};
  const auto a = render_view(field, CameraPose(), EquirectCamera{16, 8}, opt);
  const auto b = render_view(loaded, CameraPose(), EquirectCamera{16, 8}, opt);
  EXPECT_EQ(a.rgb.rgb, b.rgb.rgb);
  std::filesystem::remove(stem.string() + ".osnf");
  std::filesystem::remove(stem.string() + ".json");
}

// ---- training ---------------------------------------------------------------

TEST(Train, OverfitsConstantSphere) {
  const Color color(0.3f, 0.6f, 0.8f);
  auto field = RadianceField::initialize(small_field(), 5);
  const auto trace = train(field, {constant_panorama(color, 1.5, 32, 16)}, {}, small_train(600));
  ASSERT_EQ(trace.size(), 600u);
  std::vector<double> window;
  for (std::size_t w = 0; w < 6; ++w) {
    double m = 0.0;
    for (std::size_t i = 100 * w; i < 100 * (w + 1); ++i) m += trace[i].fine_loss / 100.0;
    window.push_back(m);
  }
  for (std::size_t w = 1; w < window.size(); ++w) EXPECT_LT(window[w], window[w - 1]) << "window " << w;
  EXPECT_LT(window.back(), 1e-3);

  const auto view = render_view(field, CameraPose(), EquirectCamera{32, 16}, RenderOptions{16, 16});
  float worst = 0.f, seam = 0.f;
  for (const auto& c : view.rgb.rgb) worst = std::max(worst, (c - color).cwiseAbs().maxCoeff());
  for (int v = 0; v < 16; ++v) seam = std::max(seam, (view.rgb.at(0, v) - view.rgb.at(31, v)).cwiseAbs().maxCoeff());
  EXPECT_LT(worst, 0.05f);
  EXPECT_LT(seam, 0.02f);
}

TEST(Train, NoOpHookIsBitIdentical) {
  const auto sup = constant_panorama(Color(0.5f, 0.2f, 0.1f), 1.0, 16, 8);
  auto a = RadianceField::initialize(small_field(), 6);
  auto b = a;
  const auto cfg = small_train(20);
  const auto ta = train(a, {sup}, {}, cfg);
  int calls = 0;
  const auto tb = train(b, {sup}, {}, cfg, [&](std::uint64_t it, const RadianceField&) {
    EXPECT_EQ(it % cfg.hook_period, 0u);
    ++calls;
    return std::optional<std::vector<SupervisionImage>>{};
  });
  EXPECT_EQ(calls, 4);
  for (std::size_t i = 0; i < a.params.size(); ++i) EXPECT_EQ(a.params[i].value.values, b.params[i].value.values);
  for (std::size_t i = 0; i < ta.size(); ++i) EXPECT_EQ(ta[i].fine_loss, tb[i].fine_loss);
}

TEST(Train, HookSwapsSupervision) {
  auto field = RadianceField::initialize(small_field(), 7);
  const auto fixed = constant_panorama(Color(0.5f, 0.5f, 0.5f), 1.0, 16, 8);
  Trainer trainer(field, {fixed}, {}, small_train(10));
  EXPECT_EQ(trainer.supervised_pixels(), 128u);
  auto extra = constant_panorama(Color(0.1f, 0.1f, 0.1f), 1.0, 16, 8);
  extra.pano.valid[0] = 0;
  trainer.set_swappable({extra});
  EXPECT_EQ(trainer.supervised_pixels(), 255u);
}

TEST(Train, Errors) {
  auto field = RadianceField::initialize(small_field(), 8);
  EXPECT_THROW(Trainer(field, {}, {}, small_train(1)), InvalidArgument);
  auto blank = constant_panorama(Color::Zero(), 1.0, 16, 8);
  std::fill(blank.pano.valid.begin(), blank.pano.valid.end(), 0);
  EXPECT_THROW(Trainer(field, {blank}, {}, small_train(1)), InvalidArgument);
  TrainConfig bad = small_train(1);
  bad.batch = 0;
  EXPECT_THROW(Trainer(field, {constant_panorama(Color::Zero(), 1.0, 16, 8)}, {}, bad), InvalidArgument);
}

TEST(TrainConfig, FullScaleDefaults) {
  const TrainConfig t;
  EXPECT_EQ(t.iterations, 200000u);
  EXPECT_EQ(t.batch, 1400);
  EXPECT_EQ(t.n_coarse, 64);
  EXPECT_EQ(t.n_fine, 128);
}
