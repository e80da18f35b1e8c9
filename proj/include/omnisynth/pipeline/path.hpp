#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>
#include <vector>

#include "omnisynth/geometry/png_io.hpp"
#include "omnisynth/radiance/render.hpp"

namespace omnisynth::pipeline {

/// Camera positions along the polyline through `waypoints`, at
/// t = k / (frames - 1) of the way with every segment taking an equal share.
/// A single frame is the first waypoint.
inline std::vector<CameraPose> path_poses(const std::vector<Vec3>& waypoints, int frames) {
  OMNISYNTH_REQUIRE(!waypoints.empty(), "camera path is empty");
  OMNISYNTH_REQUIRE(waypoints.size() >= 2, "camera path needs at least two waypoints");
  OMNISYNTH_REQUIRE(frames >= 1, "camera path needs at least one frame");
  const std::size_t segments = waypoints.size() - 1;
  std::vector<CameraPose> poses;
  poses.reserve(static_cast<std::size_t>(frames));
  for (int k = 0; k < frames; ++k) {
    const double t = frames == 1 ? 0.0 : static_cast<double>(k) / (frames - 1);
    const double s = t * static_cast<double>(segments);
    const std::size_t i = std::min(static_cast<std::size_t>(s), segments - 1);
    const double f = s - static_cast<double>(i);
    poses.emplace_back((1.0 - f) * waypoints[i] + f * waypoints[i + 1]);
  }
  return poses;
}

struct PathRenderOptions {
  double fov_deg = 90.0;
  int width = 64;
  int height = 64;
  std::optional<Vec3> view_dir;  // default: direction of travel
  radiance::RenderOptions render;
};

/// Renders perspective frames along the path as frame_0000.png, ...
/// Returns the written files in order.
inline std::vector<std::filesystem::path> path_render(const radiance::RadianceField& field,
                                                      const std::vector<Vec3>& waypoints, int frames,
                                                      const std::filesystem::path& out_dir,
                                                      const PathRenderOptions& opt = {}) {
  const auto poses = path_poses(waypoints, frames);
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> files;
  const std::size_t segments = waypoints.size() - 1;
  for (std::size_t k = 0; k < poses.size(); ++k) {
    Vec3 dir = Vec3::UnitX();
    if (opt.view_dir) {
      dir = *opt.view_dir;
    } else {
      const double t = frames == 1 ? 0.0 : static_cast<double>(k) / (frames - 1);
      const std::size_t i = std::min(static_cast<std::size_t>(t * segments), segments - 1);
      const Vec3 travel = waypoints[i + 1] - waypoints[i];
      if (travel.norm() > 1e-12) dir = travel;
    }
    const auto view = radiance::render_view(
        field, poses[k], radiance::PinholeCamera{dir.normalized(), opt.fov_deg, opt.width, opt.height}, opt.render);
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04zu.png", k);
    files.push_back(out_dir / name);
    io::write_image(files.back(), view.rgb);
  }
  return files;
}

}  // namespace omnisynth::pipeline
