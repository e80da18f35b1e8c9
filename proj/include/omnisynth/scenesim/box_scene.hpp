#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <algorithm>
#include <string>
#include <vector>

#include <json.hpp>

#include "omnisynth/core/rng.hpp"
#include "omnisynth/geometry/equirect.hpp"
#include "omnisynth/geometry/types.hpp"

namespace omnisynth::scenesim {

/// Procedural surface texture over normalised face coordinates (s, t).
struct Texture {
  enum class Kind { Checker, Gradient };
  Kind kind = Kind::Checker;
  Color a = Color(0.9f, 0.9f, 0.9f);
  Color b = Color(0.2f, 0.2f, 0.2f);
  int cells_s = 4;  // checker cells along s
  int cells_t = 2;  // checker cells along t
  int axis = 0;     // gradient runs along s (0) or t (1)

  Color eval(double s, double t) const {
    s = std::clamp(s, 0.0, 1.0);
    t = std::clamp(t, 0.0, 1.0);
    if (kind == Kind::Gradient) {
      const float f = static_cast<float>(axis == 0 ? s : t);
      return (1.f - f) * a + f * b;
    }
    const int i = std::min(static_cast<int>(s * cells_s), cells_s - 1);
    const int j = std::min(static_cast<int>(t * cells_t), cells_t - 1);
    return (i + j) % 2 == 0 ? a : b;
  }
};

struct Box {
  Vec3 min;
  Vec3 max;
  Texture texture;
};

enum Face { kNegX = 0, kPosX, kNegY, kPosY, kFloor, kCeiling };

/// Axis-aligned room seen from inside, with optional box obstacles.
/// Shading is flat: a surface point has the same colour from every pose.
struct BoxScene {
  Vec3 room_min = Vec3(-2, -2, -1.2);
  Vec3 room_max = Vec3(2, 2, 1.3);
  std::array<Texture, 6> walls;  // -X, +X, -Y, +Y, floor, ceiling
  std::vector<Box> obstacles;

  void validate() const {
    OMNISYNTH_REQUIRE((room_min.array() < 0.0).all() && (room_max.array() > 0.0).all(),
                      "room must contain the origin");
    for (const auto& o : obstacles) {
      OMNISYNTH_REQUIRE((o.min.array() < o.max.array()).all(), "obstacle extents must be positive");
      OMNISYNTH_REQUIRE((o.min.array() > room_min.array()).all() && (o.max.array() < room_max.array()).all(),
                        "obstacles must lie strictly inside the room");
    }
  }

  bool in_free_space(const Vec3& p) const {
    if (!((p.array() > room_min.array()).all() && (p.array() < room_max.array()).all())) return false;
    for (const auto& o : obstacles)
      if ((p.array() >= o.min.array()).all() && (p.array() <= o.max.array()).all()) return false;
    return true;
  }
};

struct Hit {
  double distance = 0.0;
  Color color = Color::Zero();
};

namespace detail {

inline Color face_color(const Texture& tex, const Vec3& p, int axis, const Vec3& lo, const Vec3& hi) {
  const int a1 = (axis + 1) % 3;
  const int a2 = (axis + 2) % 3;
  // s runs horizontally where possible, t vertically.
  const int s_axis = axis == 2 ? 0 : (a1 == 2 ? a2 : a1);
  const int t_axis = axis == 2 ? 1 : 2;
  const double s = (p[s_axis] - lo[s_axis]) / (hi[s_axis] - lo[s_axis]);
  const double t = (p[t_axis] - lo[t_axis]) / (hi[t_axis] - lo[t_axis]);
  return tex.eval(s, t);
}

}  // namespace detail

/// Nearest surface along a ray starting inside the room.
inline Hit trace(const BoxScene& scene, const Vec3& origin, const Vec3& dir) {
  double best = std::numeric_limits<double>::infinity();
  int face = -1;
  for (int k = 0; k < 3; ++k) {
    if (dir[k] == 0.0) continue;
    const double bound = dir[k] > 0 ? scene.room_max[k] : scene.room_min[k];
    const double t = (bound - origin[k]) / dir[k];
    if (t < best) {
      best = t;
      face = 2 * k + (dir[k] > 0 ? 1 : 0);
    }
  }
  Hit hit;
  hit.distance = best;
  const Vec3 p = origin + best * dir;
  hit.color = detail::face_color(scene.walls[face], p, face / 2, scene.room_min, scene.room_max);

  for (const auto& box : scene.obstacles) {
    double t_near = -std::numeric_limits<double>::infinity();
    double t_far = std::numeric_limits<double>::infinity();
    int entry_axis = -1;
    bool miss = false;
    for (int k = 0; k < 3; ++k) {
      if (dir[k] == 0.0) {
        if (origin[k] < box.min[k] || origin[k] > box.max[k]) miss = true;
        continue;
      }
      double t0 = (box.min[k] - origin[k]) / dir[k];
      double t1 = (box.max[k] - origin[k]) / dir[k];
      if (t0 > t1) std::swap(t0, t1);
      if (t0 > t_near) {
        t_near = t0;
        entry_axis = k;
      }
      t_far = std::min(t_far, t1);
    }
    if (miss || entry_axis < 0 || t_near > t_far || t_near <= 0.0 || t_near >= hit.distance) continue;
    hit.distance = t_near;
    hit.color = detail::face_color(box.texture, origin + t_near * dir, entry_axis, box.min, box.max);
  }
  return hit;
}

/// Analytic RGB-D panorama at `pose`; every pixel is valid.
inline RgbdPanorama render_ground_truth(const BoxScene& scene, const CameraPose& pose, int width, int height) {
  scene.validate();
  OMNISYNTH_REQUIRE(scene.in_free_space(pose.position), "camera pose must lie in the free space of the room");
  RgbdPanorama out(width, height);
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u) {
      const Hit h = trace(scene, pose.position, geometry::pixel_to_direction(u, v, width, height));
      const std::size_t i = out.index(u, v);
      out.rgb[i] = h.color;
      out.depth[i] = h.distance;
      out.valid[i] = 1;
    }
  return out;
}

/// Fills the invalid pixels of a reprojection with analytic ground truth.
inline RgbdPanorama oracle_completion(const BoxScene& scene, const CameraPose& pose, const RgbdPanorama& reprojected) {
  const RgbdPanorama truth = render_ground_truth(scene, pose, reprojected.width, reprojected.height);
  RgbdPanorama out = reprojected;
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    if (out.valid[i]) continue;
    out.rgb[i] = truth.rgb[i];
    out.depth[i] = truth.depth[i];
    out.valid[i] = 1;
  }
  return out;
}

// ---- scene description (JSON) ------------------------------------------

inline nlohmann::json to_json(const Texture& t) {
  return {{"kind", t.kind == Texture::Kind::Checker ? "checker" : "gradient"},
          {"a", {t.a.x(), t.a.y(), t.a.z()}},
          {"b", {t.b.x(), t.b.y(), t.b.z()}},
          {"cells", {t.cells_s, t.cells_t}},
          {"axis", t.axis}};
}

inline Texture texture_from_json(const nlohmann::json& j) {
  Texture t;
  const std::string kind = j.value("kind", "checker");
  if (kind == "checker")
    t.kind = Texture::Kind::Checker;
  else if (kind == "gradient")
    t.kind = Texture::Kind::Gradient;
  else
    throw FormatError("unknown texture kind '" + kind + "'");
  auto color = [](const nlohmann::json& c) {
    return Color(c.at(0).get<float>(), c.at(1).get<float>(), c.at(2).get<float>());
  };
  if (j.contains("a")) t.a = color(j["a"]);
  if (j.contains("b")) t.b = color(j["b"]);
  if (j.contains("cells")) {
    t.cells_s = j["cells"].at(0).get<int>();
    t.cells_t = j["cells"].at(1).get<int>();
  }
  t.axis = j.value("axis", 0);
  if (t.cells_s < 1 || t.cells_t < 1) throw FormatError("checker cell counts must be positive");
  return t;
}

inline nlohmann::json to_json(const BoxScene& s) {
  auto vec = [](const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); };
  nlohmann::json walls = nlohmann::json::array();
  for (const auto& w : s.walls) walls.push_back(to_json(w));
  nlohmann::json obstacles = nlohmann::json::array();
  for (const auto& o : s.obstacles)
    obstacles.push_back({{"min", vec(o.min)}, {"max", vec(o.max)}, {"texture", to_json(o.texture)}});
  return {{"room", {{"min", vec(s.room_min)}, {"max", vec(s.room_max)}}},
          {"walls", walls},
          {"obstacles", obstacles}};
}

inline BoxScene scene_from_json(const nlohmann::json& j) {
  auto vec = [](const nlohmann::json& v) { return Vec3(v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>()); };
  BoxScene s;
  try {
    s.room_min = vec(j.at("room").at("min"));
    s.room_max = vec(j.at("room").at("max"));
    if (j.contains("walls")) {
      const auto& walls = j["walls"];
      if (walls.size() != 6) throw FormatError("scene needs exactly six wall textures");
      for (std::size_t i = 0; i < 6; ++i) s.walls[i] = texture_from_json(walls[i]);
    }
    if (j.contains("obstacles"))
      for (const auto& o : j["obstacles"])
        s.obstacles.push_back({vec(o.at("min")), vec(o.at("max")),
                               o.contains("texture") ? texture_from_json(o["texture"]) : Texture{}});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed scene description: ") + e.what());
  }
  s.validate();
  return s;
}

inline BoxScene load_scene(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open scene file " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("scene file " + path.string() + " is not valid JSON: " + e.what());
  }
  return scene_from_json(j);
}

inline void save_scene(const std::filesystem::path& path, const BoxScene& scene) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  os << to_json(scene).dump(2) << '\n';
}

// ---- stock scenes ---------------------------------------------------------

/// 4 x 4 m room, checkered walls (4 x 2 cells each), gradient floor and
/// ceiling, one box obstacle.
inline BoxScene default_room() {
  BoxScene s;
  const Color palette[6][2] = {{{0.85f, 0.30f, 0.25f}, {0.95f, 0.85f, 0.70f}},
                               {{0.25f, 0.45f, 0.80f}, {0.85f, 0.90f, 0.95f}},
                               {{0.30f, 0.70f, 0.35f}, {0.90f, 0.95f, 0.80f}},
                               {{0.80f, 0.70f, 0.20f}, {0.35f, 0.25f, 0.15f}},
                               {{0.45f, 0.35f, 0.25f}, {0.75f, 0.65f, 0.50f}},
                               {{0.95f, 0.95f, 0.95f}, {0.70f, 0.75f, 0.80f}}};
  for (int f = 0; f < 6; ++f) {
    Texture t;
    t.a = palette[f][0];
    t.b = palette[f][1];
    if (f >= kFloor) {
      t.kind = Texture::Kind::Gradient;
      t.axis = f == kFloor ? 0 : 1;
    }
    s.walls[f] = t;
  }
  Texture box_tex;
  box_tex.kind = Texture::Kind::Gradient;
  box_tex.a = Color(0.60f, 0.20f, 0.60f);
  box_tex.b = Color(0.95f, 0.60f, 0.30f);
  box_tex.axis = 1;
  s.obstacles.push_back({Vec3(0.8, -1.4, -1.19), Vec3(1.5, -0.6, -0.3), box_tex});
  return s;
}

/// Randomised room for completion training sets.
inline BoxScene random_room(Rng& rng) {
  BoxScene s;
  s.room_min = Vec3(-rng.uniform(1.5, 3.0), -rng.uniform(1.5, 3.0), -rng.uniform(1.0, 1.6));
  s.room_max = Vec3(rng.uniform(1.5, 3.0), rng.uniform(1.5, 3.0), rng.uniform(0.9, 1.5));
  auto random_color = [&] {
    return Color(static_cast<float>(rng.uniform(0.1, 0.95)), static_cast<float>(rng.uniform(0.1, 0.95)),
                 static_cast<float>(rng.uniform(0.1, 0.95)));
  };
  for (int f = 0; f < 6; ++f) {
    Texture t;
    t.kind = rng.uniform() < 0.6 ? Texture::Kind::Checker : Texture::Kind::Gradient;
    t.a = random_color();
    t.b = random_color();
    t.cells_s = 4 + static_cast<int>(rng.uniform_int(4));  // at least 8 cells per face
    t.cells_t = 2 + static_cast<int>(rng.uniform_int(2));
    t.axis = static_cast<int>(rng.uniform_int(2));
    s.walls[f] = t;
  }
  const int boxes = static_cast<int>(rng.uniform_int(3));
  for (int b = 0; b < boxes; ++b) {
    Box box;
    for (int k = 0; k < 2; ++k) {
      const double lo = s.room_min[k] + 0.2, hi = s.room_max[k] - 0.2;
      double a = rng.uniform(lo, hi - 0.5);
      // Keep the origin free.
      if (a < 0.3 && a + 0.5 > -0.3) a = a < 0 ? -0.8 : 0.3;
      box.min[k] = a;
      box.max[k] = std::min(a + rng.uniform(0.3, 0.9), hi);
    }
    box.min[2] = s.room_min[2] + 1e-3;
    box.max[2] = s.room_min[2] + rng.uniform(0.4, 1.2);
    box.texture.kind = Texture::Kind::Gradient;
    box.texture.a = random_color();
    box.texture.b = random_color();
    box.texture.axis = 1;
    if (box.min.x() < box.max.x() && box.min.y() < box.max.y()) s.obstacles.push_back(box);
  }
  s.validate();
  return s;
}

}  // namespace omnisynth::scenesim
