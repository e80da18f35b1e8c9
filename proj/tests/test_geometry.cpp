#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Geometry>

#include "omnisynth/core/rng.hpp"
#include "omnisynth/geometry.hpp"

using namespace omnisynth;
using namespace omnisynth::geometry;

namespace {

RgbdPanorama random_panorama(int w, int h, Rng& rng, double valid_prob = 1.0) {
  RgbdPanorama p(w, h);
  for (std::size_t i = 0; i < p.pixel_count(); ++i) {
    p.rgb[i] = Color(rng.uniform(), rng.uniform(), rng.uniform()).cast<float>();
    p.depth[i] = rng.uniform(0.5, 4.0);
    p.valid[i] = rng.uniform() < valid_prob;
  }
  return p;
}

}  // namespace

TEST(PixelDirection, ForwardAxisAndPole) {
  // 5x3 has a pixel centre at longitude 0, latitude 0.
  const Vec3 d = pixel_to_direction(2, 1, 5, 3);
  EXPECT_NEAR(d.x(), 1.0, 1e-15);
  EXPECT_NEAR(d.y(), 0.0, 1e-15);
  EXPECT_NEAR(d.z(), 0.0, 1e-15);

  const Vec3 pole = pixel_to_direction(0, 0, 2000, 1000);
  EXPECT_NEAR(pole.z(), 1.0, 1e-5);
  EXPECT_NEAR(pole.norm(), 1.0, 1e-12);
}

TEST(PixelDirection, RoundTripExhaustive) {
  const int w = 64, h = 32;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const Vec3 d = pixel_to_direction(u, v, w, h);
      ASSERT_NEAR(d.norm(), 1.0, 1e-12);
      const auto [uf, vf] = direction_to_pixel(d, w, h);
      ASSERT_NEAR(uf, u, 1e-9);
      ASSERT_NEAR(vf, v, 1e-9);
    }
}

TEST(PixelDirection, InverseConventions) {
  const int w = 64, h = 32;
  auto [u0, v0] = direction_to_pixel(Vec3(1, 0, 0), w, h);
  EXPECT_NEAR(u0, w / 2.0 - 0.5, 1e-12);
  EXPECT_NEAR(v0, h / 2.0 - 0.5, 1e-12);
  auto [un, vn] = direction_to_pixel(Vec3(0, 0, 1), w, h);
  (void)un;
  EXPECT_NEAR(vn, -0.5, 1e-12);
  // Seam: longitude +pi and -pi land on the same wrapped column.
  auto [us1, vs1] = direction_to_pixel(Vec3(-1, 0.0, 0), w, h);
  auto [us2, vs2] = direction_to_pixel(Vec3(-1, -0.0, 0), w, h);
  EXPECT_NEAR(std::fmod(us1 + 0.5, w), std::fmod(us2 + 0.5, w), 1e-12);
  EXPECT_NEAR(vs1, vs2, 1e-12);
  EXPECT_GE(us1, -0.5);
  EXPECT_LT(us1, w - 0.5);
}

TEST(PixelDirection, Errors) {
  EXPECT_THROW(pixel_to_direction(64, 0, 64, 32), InvalidArgument);
  EXPECT_THROW(pixel_to_direction(0, -1, 64, 32), InvalidArgument);
  EXPECT_THROW(direction_to_pixel(Vec3::Zero(), 64, 32), InvalidArgument);
}

TEST(PanoramaToPoints, UniformSphere) {
  RgbdPanorama p(32, 16);
  std::fill(p.depth.begin(), p.depth.end(), 2.0);
  std::fill(p.valid.begin(), p.valid.end(), 1);
  const auto cloud = panorama_to_points(p);
  ASSERT_EQ(cloud.size(), p.pixel_count());
  for (const auto& pt : cloud.points) EXPECT_NEAR(pt.position.norm(), 2.0, 1e-9);
}

TEST(PanoramaToPoints, SingleValidPixelAndCount) {
  const int w = 2000, h = 1000;
  RgbdPanorama p(w, h);
  const int u = w / 2, v = h / 2;  // pixel adjacent to longitude 0, latitude 0
  p.valid[p.index(u, v)] = 1;
  p.depth[p.index(u, v)] = 3.0;
  p.rgb[p.index(u, v)] = Color(0.2f, 0.4f, 0.6f);
  const auto cloud = panorama_to_points(p);
  ASSERT_EQ(cloud.size(), 1u);
  EXPECT_NEAR((cloud.points[0].position - Vec3(3, 0, 0)).norm(), 0.0, 3.0 * std::numbers::pi / h);
  EXPECT_EQ(cloud.points[0].color, p.rgb[p.index(u, v)]);

  Rng rng(4);
  const auto q = random_panorama(32, 16, rng, 0.3);
  EXPECT_EQ(panorama_to_points(q).size(), q.valid_count());
}

TEST(Reproject, ZeroTranslationIdentity) {
  Rng rng(1);
  const auto p = random_panorama(64, 32, rng, 0.8);
  const auto out = reproject(panorama_to_points(p), CameraPose(), 64, 32);
  for (std::size_t i = 0; i < p.pixel_count(); ++i) {
    ASSERT_EQ(out.valid[i], p.valid[i]);
    if (!p.valid[i]) continue;
    EXPECT_EQ(out.rgb[i], p.rgb[i]);
    EXPECT_NEAR(out.depth[i], p.depth[i], 1e-12 * p.depth[i]);
  }
}

TEST(Reproject, TranslatedPointAndZBuffer) {
  PointCloud c;
  c.points.push_back({Vec3(2, 0, 0), Color(1, 0, 0)});
  const auto out = reproject(c, CameraPose(1, 0, 0), 64, 32);
  const auto [u, v] = direction_to_pixel(Vec3(1, 0, 0), 64, 32);
  const int pu = static_cast<int>(std::floor(u + 0.5)), pv = static_cast<int>(std::floor(v + 0.5));
  ASSERT_TRUE(out.valid[out.index(pu, pv)]);
  EXPECT_NEAR(out.depth[out.index(pu, pv)], 1.0, 1e-15);
  EXPECT_EQ(out.valid_count(), 1u);

  for (int order = 0; order < 2; ++order) {
    PointCloud two;
    const Vec3 dir = Vec3(1, 1, 0.3).normalized();
    two.points.push_back({(order ? 2.0 : 1.0) * dir, Color(order ? 0.f : 1.f, 0, 0)});
    two.points.push_back({(order ? 1.0 : 2.0) * dir, Color(order ? 1.f : 0.f, 0, 0)});
    const auto r = reproject(two, CameraPose(), 64, 32);
    EXPECT_EQ(r.valid_count(), 1u);
    for (std::size_t i = 0; i < r.pixel_count(); ++i)
      if (r.valid[i]) {
        EXPECT_NEAR(r.depth[i], 1.0, 1e-12);
        EXPECT_EQ(r.rgb[i].x(), 1.f);
      }
  }
}

TEST(Reproject, ZBufferMatchesBruteForce) {
  Rng rng(7);
  const int w = 32, h = 16;
  PointCloud cloud;
  for (int i = 0; i < 3000; ++i)
    cloud.points.push_back({Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-1.5, 1.5)),
                            Color(rng.uniform(), rng.uniform(), rng.uniform()).cast<float>()});
  const CameraPose target(0.3, -0.2, 0.1);
  const auto out = reproject(cloud, target, w, h);
  // Oracle: for every pixel scan every point.
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& pt : cloud.points) {
        const Vec3 d = pt.position - target.position;
        const auto [uf, vf] = direction_to_pixel(d, w, h);
        const int pu = wrap_column(static_cast<long>(std::floor(uf + 0.5)), w);
        const int pv = std::clamp(static_cast<int>(std::floor(vf + 0.5)), 0, h - 1);
        if (pu == u && pv == v) best = std::min(best, d.norm());
      }
      const std::size_t i = out.index(u, v);
      if (std::isinf(best)) {
        EXPECT_FALSE(out.valid[i]);
      } else {
        ASSERT_TRUE(out.valid[i]);
        EXPECT_EQ(out.depth[i], best);
        EXPECT_GE(out.depth[i], best);
      }
    }
}

TEST(DensifyDepth, ConstantUnchangedAndMedian) {
  DepthPlane plane{16, 8, std::vector<double>(128, 1.5), std::vector<std::uint8_t>(128, 1)};
  const auto out = densify_depth(plane, 3);
  for (std::size_t i = 0; i < 128; ++i) {
    EXPECT_EQ(out.depth[i], 1.5);
    EXPECT_TRUE(out.valid[i]);
  }

  DepthPlane m{8, 4, std::vector<double>(32, 0.0), std::vector<std::uint8_t>(32, 0)};
  const double vals[9] = {1, 2, 3, 4, 100, 5, 6, 7, 8};
  int k = 0;
  for (int y = 1; y <= 3; ++y)
    for (int x = 3; x <= 5; ++x) {
      m.depth[y * 8 + x] = vals[k++];
      m.valid[y * 8 + x] = 1;
    }
  EXPECT_EQ(densify_depth(m, 3).depth[2 * 8 + 4], 5.0);
  EXPECT_THROW(densify_depth(m, 4), InvalidArgument);
  EXPECT_THROW(densify_depth(m, 1), InvalidArgument);
}

TEST(DensifyDepth, FillRule) {
  DepthPlane p{8, 4, std::vector<double>(32, 2.0), std::vector<std::uint8_t>(32, 1)};
  p.valid[1 * 8 + 3] = 0;  // single pinhole: 8 of 9 valid -> filled
  auto out = densify_depth(p, 3);
  EXPECT_TRUE(out.valid[1 * 8 + 3]);
  EXPECT_EQ(out.depth[1 * 8 + 3], 2.0);

  DepthPlane sparse{8, 4, std::vector<double>(32, 0.0), std::vector<std::uint8_t>(32, 0)};
  sparse.valid[1 * 8 + 3] = 1;
  sparse.depth[1 * 8 + 3] = 1.0;
  out = densify_depth(sparse, 3);
  EXPECT_FALSE(out.valid[1 * 8 + 4]);  // 1 of 9 valid: left invalid
  EXPECT_TRUE(out.valid[1 * 8 + 3]);
}

TEST(DensifyDepth, CommutesWithCyclicShift) {
  Rng rng(11);
  const auto p = random_panorama(32, 16, rng, 0.7);
  const DepthPlane plane{32, 16, p.depth, p.valid};
  for (int shift : {1, 5, 16, 31}) {
    const auto a = densify_depth({32, 16, shift_columns(plane.depth, 32, 16, shift),
                                  shift_columns(plane.valid, 32, 16, shift)},
                                 5);
    const auto filtered = densify_depth(plane, 5);
    const auto b_depth = shift_columns(filtered.depth, 32, 16, shift);
    const auto b_valid = shift_columns(filtered.valid, 32, 16, shift);
    EXPECT_EQ(a.depth, b_depth);
    EXPECT_EQ(a.valid, b_valid);
  }
}

TEST(Equivariance, LiftingRotatesWithColumnShift) {
  Rng rng(12);
  const int w = 32, h = 16;
  const auto p = random_panorama(w, h, rng, 1.0);
  const int shift = 8;
  const auto shifted = shift_columns(p, shift);
  const double angle = 2.0 * std::numbers::pi * shift / w;
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
  const auto a = panorama_to_points(p);
  const auto b = panorama_to_points(shifted);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const auto& pa = a.points[static_cast<std::size_t>(v) * w + u];
      const auto& pb = b.points[static_cast<std::size_t>(v) * w + wrap_column(u + shift, w)];
      EXPECT_NEAR((rot * pa.position - pb.position).norm(), 0.0, 1e-12);
      EXPECT_EQ(pa.color, pb.color);
    }
  // Reprojection to a pose on the gravity axis commutes with the shift.
  const CameraPose up(0, 0, 0.2);
  const auto ra = shift_columns(reproject(a, up, w, h), shift);
  const auto rb = reproject(b, up, w, h);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < ra.pixel_count(); ++i) agree += ra.valid[i] == rb.valid[i];
  EXPECT_EQ(agree, ra.pixel_count());
}

TEST(ReprojectionGrid, BoundsFromDepthExtent) {
  const DepthBounds b{-2, 2, -2, 2};
  const auto grid = reprojection_grid(b, 50);
  ASSERT_EQ(grid.size(), 100u);
  EXPECT_DOUBLE_EQ(grid[0].pose.position.x(), -1.0);
  EXPECT_DOUBLE_EQ(grid[49].pose.position.x(), 1.0);
  EXPECT_DOUBLE_EQ(grid[50].pose.position.y(), -1.0);
  EXPECT_DOUBLE_EQ(grid[99].pose.position.y(), 1.0);
  for (const auto& g : grid) EXPECT_EQ(g.pose.position.z(), 0.0);
  EXPECT_EQ(grid[0].neighbors.size(), 1u);
  EXPECT_EQ(grid[49].neighbors.size(), 1u);
  EXPECT_EQ(grid[50].neighbors.size(), 1u);
  EXPECT_EQ(grid[10].neighbors.size(), 2u);
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (auto j : grid[i].neighbors) {
      EXPECT_EQ(grid[j].axis, grid[i].axis);
      EXPECT_NE(std::find(grid[j].neighbors.begin(), grid[j].neighbors.end(), i), grid[j].neighbors.end());
    }
  const double step = 2.0 / 49.0;
  for (int k = 1; k < 50; ++k) {
    EXPECT_NEAR(grid[k].pose.position.x() - grid[k - 1].pose.position.x(), step, 1e-12);
    EXPECT_NEAR(grid[50 + k].pose.position.y() - grid[49 + k].pose.position.y(), step, 1e-12);
  }
}

TEST(ReprojectionGrid, Errors) {
  EXPECT_THROW(reprojection_grid({-2, 2, -2, 2}, 1), InvalidArgument);
  EXPECT_THROW(reprojection_grid({0.5, 2, -2, 2}, 10), InvalidArgument);
  EXPECT_THROW(reprojection_grid({-2, -1, -2, 2}, 10), InvalidArgument);
}

TEST(EvaluationPoints, QuarterExtent) {
  const auto pts = evaluation_points({-2, 2, -2, 2});
  ASSERT_EQ(pts.size(), 4u);
  EXPECT_EQ(pts[0].position, Vec3(-0.5, -0.5, 0));
  EXPECT_EQ(pts[1].position, Vec3(-0.5, 0.5, 0));
  EXPECT_EQ(pts[2].position, Vec3(0.5, -0.5, 0));
  EXPECT_EQ(pts[3].position, Vec3(0.5, 0.5, 0));
  const auto asym = evaluation_points({-4, 2, -1, 3});
  EXPECT_EQ(asym[0].position, Vec3(-1, -0.25, 0));
  EXPECT_EQ(asym[3].position, Vec3(0.5, 0.75, 0));
  Vec3 sum = Vec3::Zero();
  for (const auto& p : pts) sum += p.position;
  EXPECT_NEAR(sum.norm(), 0.0, 1e-15);
}

TEST(PerspectiveCrop, ConstantAndChecker) {
  RgbdPanorama p(64, 32);
  std::fill(p.rgb.begin(), p.rgb.end(), Color(0.3f, 0.6f, 0.9f));
  const Image c = perspective_crop(p, Vec3(1, 0.2, 0.1), 90.0, 17, 11);
  for (const auto& px : c.rgb) EXPECT_NEAR((px - Color(0.3f, 0.6f, 0.9f)).norm(), 0.0, 1e-6);

  // 8x4 checker, each cell 8x8 pixels.
  for (int v = 0; v < 32; ++v)
    for (int u = 0; u < 64; ++u) p.rgb[p.index(u, v)] = ((u / 8 + v / 8) % 2) ? Color(1, 1, 1) : Color(0, 0, 0);
  // Cell (col 2, row 1) has its centre at pixel coordinates (19.5, 11.5).
  const double lon = pixel_longitude(19.5, 64), lat = pixel_latitude(11.5, 32);
  const Image cell = perspective_crop(p, lonlat_to_direction(lon, lat), 20.0, 9, 9);
  EXPECT_NEAR((cell.at(4, 4) - Color(1, 1, 1)).norm(), 0.0, 1e-6);
  EXPECT_THROW(perspective_crop(p, Vec3(1, 0, 0), 180.0, 8, 8), InvalidArgument);
  EXPECT_THROW(perspective_crop(p, Vec3(1, 0, 0), 0.0, 8, 8), InvalidArgument);
}

TEST(PerspectiveCrop, NarrowFovMatchesDirectSample) {
  Rng rng(3);
  const auto p = random_panorama(64, 32, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 dir = yaw_pitch_direction(rng.uniform(-180, 180), rng.uniform(-60, 60));
    const Image c = perspective_crop(p, dir, 1e-3, 5, 5);
    // Oracle: bilinear sample at the view direction itself.
    const auto [u, v] = direction_to_pixel(dir, 64, 32);
    const Color expect = sample_bilinear(p.rgb, 64, 32, u, v);
    EXPECT_NEAR((c.at(2, 2) - expect).norm(), 0.0, 1e-5);
  }
}
