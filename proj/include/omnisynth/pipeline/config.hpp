#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "omnisynth/completion/complete.hpp"
#include "omnisynth/radiance/field.hpp"
#include "omnisynth/radiance/train.hpp"

namespace omnisynth::pipeline {

namespace fs = std::filesystem;

/// Raised for malformed or inconsistent run configurations (exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Raised when a pipeline stage fails (exit code 2). `stage` names it.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

enum class Completer { Oracle, Baseline, Neural };

inline const char* completer_name(Completer c) {
  switch (c) {
    case Completer::Oracle: return "oracle";
    case Completer::Baseline: return "baseline";
    case Completer::Neural: return "neural";
  }
  return "?";
}

inline Completer parse_completer(const std::string& s) {
  if (s == "oracle") return Completer::Oracle;
  if (s == "baseline") return Completer::Baseline;
  if (s == "neural") return Completer::Neural;
  throw ConfigError("unknown completer '" + s + "' (expected oracle, baseline or neural)");
}

/// The input panorama: either a scene description rendered analytically at
/// the origin, or an RGB + depth PNG pair.
struct InputSpec {
  fs::path scene;
  fs::path rgb;
  fs::path depth;
  int width = 1024;  // synthesis resolution
  int height = 512;

  bool synthetic() const { return !scene.empty(); }
};

/// Discriminator used for the selection scores when the completer itself
/// brings none: loaded from `path`, or trained on random rooms.
struct DiscriminatorSpec {
  fs::path path;
  int steps = 300;
  double lr = 1e-4;
  int batch = 4;
};

struct RunConfig {
  InputSpec input;
  double depth_scale = 1000.0;  // depth PNG units per metre
  int grid_per_axis = 50;
  std::size_t M = 4;
  double epsilon = 0.25;
  std::uint64_t K = 500;  // NeRF iterations between selection updates
  radiance::FieldConfig field;
  bool auto_far = true;  // far bound from the input depth and grid extent
  radiance::TrainConfig train;
  Completer completer = Completer::Neural;
  fs::path completion_net;  // required by the neural completer
  DiscriminatorSpec discriminator;
  std::string extractor = "baseline64";
  bool selection = true;
  int densify_window = 5;
  int nllf_real_crops = 256;
  int nllf_view_crops = 16;
  int crop_size = 32;
  std::string scene_name = "scene";
  fs::path out_dir = "run";
  std::uint64_t seed = 0;

  std::size_t grid_size() const { return 2 * static_cast<std::size_t>(grid_per_axis); }
  int width() const { return input.width; }
  int height() const { return input.height; }

  /// Structural checks; file existence is checked by `check_inputs`.
  void validate() const {
    auto need = [](bool ok, const std::string& msg) {
      if (!ok) throw ConfigError(msg);
    };
    need(input.synthetic() || (!input.rgb.empty() && !input.depth.empty()),
         "input needs a scene description or an rgb + depth pair");
    need(input.width > 0 && input.height > 0 && input.width == 2 * input.height,
         "input resolution must be positive with width = 2 * height");
    need(depth_scale > 0.0, "depth_scale must be positive");
    need(grid_per_axis >= 2, "grid needs at least two positions per axis");
    need(M >= 1 && M <= grid_size(), "M must lie in [1, grid size]");
    need(epsilon >= 0.0 && epsilon * 2.0 <= 1.0, "epsilon must lie in [0, 1/2]");
    need(K >= 1, "K must be positive");
    need(extractor == "baseline64", "unknown extractor '" + extractor + "' (expected baseline64)");
    need(densify_window >= 1 && densify_window % 2 == 1, "densify window must be a positive odd number");
    need(nllf_view_crops >= 1 && crop_size >= 4, "invalid NLLF crop settings");
    need(nllf_real_crops > 64, "the feature Gaussian needs more real crops than feature dimensions (64)");
    need(discriminator.steps >= 0 && discriminator.lr > 0.0 && discriminator.batch >= 1,
         "invalid discriminator settings");
    need(completer != Completer::Neural || !completion_net.empty(), "the neural completer needs completion_net");
    need(!out_dir.empty(), "out_dir must be set");
    try {
      field.validate();
      radiance::TrainConfig t = train;
      t.hook_period = K;
      t.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }

  /// Every referenced input file must exist.
  void check_inputs() const {
    auto exists = [](const fs::path& p, const char* what) {
      if (!p.empty() && !fs::exists(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
    };
    exists(input.scene, "scene description");
    exists(input.rgb, "input rgb");
    exists(input.depth, "input depth");
    if (!completion_net.empty()) exists(fs::path(completion_net).concat(".osnf"), "completion network");
    if (!discriminator.path.empty()) exists(fs::path(discriminator.path).concat(".osnf"), "discriminator");
  }
};

/// Small synthetic configuration for a single CPU core: 64 x 32 panoramas,
/// 2000 NeRF iterations, oracle completion.
inline RunConfig desk_config() {
  RunConfig c;
  c.input.width = 64;
  c.input.height = 32;
  c.completer = Completer::Oracle;
  c.train.iterations = 2000;
  c.train.batch = 384;
  c.train.n_coarse = 32;
  c.train.n_fine = 32;
  c.train.lr_start = 5e-3;
  c.train.lr_end = 5e-4;
  c.field.layers = 4;
  c.field.width = 64;
  c.scene_name = "desk_room";
  return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["input"] = {{"scene", c.input.scene.string()},
                {"rgb", c.input.rgb.string()},
                {"depth", c.input.depth.string()},
                {"width", c.input.width},
                {"height", c.input.height}};
  j["depth_scale"] = c.depth_scale;
  j["grid_per_axis"] = c.grid_per_axis;
  j["M"] = c.M;
  j["epsilon"] = c.epsilon;
  j["K"] = c.K;
  j["field"] = radiance::to_json(c.field);
  j["auto_far"] = c.auto_far;
  j["train"] = {{"n_coarse", c.train.n_coarse}, {"n_fine", c.train.n_fine},   {"batch", c.train.batch},
                {"iterations", c.train.iterations}, {"lr_start", c.train.lr_start}, {"lr_end", c.train.lr_end}};
  j["completer"] = completer_name(c.completer);
  j["completion_net"] = c.completion_net.string();
  j["discriminator"] = {{"path", c.discriminator.path.string()},
                        {"steps", c.discriminator.steps},
                        {"lr", c.discriminator.lr},
                        {"batch", c.discriminator.batch}};
  j["extractor"] = c.extractor;
  j["selection"] = c.selection;
  j["densify_window"] = c.densify_window;
  j["nllf"] = {{"real_crops", c.nllf_real_crops}, {"view_crops", c.nllf_view_crops}, {"crop_size", c.crop_size}};
  j["scene_name"] = c.scene_name;
  j["out_dir"] = c.out_dir.string();
  j["seed"] = c.seed;
  return j;
}

/// Missing keys keep their defaults. Relative input paths resolve against
/// `base` (the config file's directory).
inline RunConfig run_config_from_json(const nlohmann::json& j, const fs::path& base = {}) {
  RunConfig c;
  try {
    auto resolve = [&](const std::string& s) -> fs::path {
      if (s.empty()) return {};
      fs::path p(s);
      return p.is_relative() && !base.empty() ? base / p : p;
    };
    if (j.contains("input")) {
      const auto& in = j.at("input");
      c.input.scene = resolve(in.value("scene", std::string()));
      c.input.rgb = resolve(in.value("rgb", std::string()));
      c.input.depth = resolve(in.value("depth", std::string()));
      c.input.width = in.value("width", c.input.width);
      c.input.height = in.value("height", c.input.height);
    }
    c.depth_scale = j.value("depth_scale", c.depth_scale);
    c.grid_per_axis = j.value("grid_per_axis", c.grid_per_axis);
    c.M = j.value("M", c.M);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.K = j.value("K", c.K);
    if (j.contains("field")) c.field = radiance::field_config_from_json(j.at("field"));
    c.auto_far = j.value("auto_far", c.auto_far);
    if (j.contains("train")) {
      const auto& t = j.at("train");
      c.train.n_coarse = t.value("n_coarse", c.train.n_coarse);
      c.train.n_fine = t.value("n_fine", c.train.n_fine);
      c.train.batch = t.value("batch", c.train.batch);
      c.train.iterations = t.value("iterations", c.train.iterations);
      c.train.lr_start = t.value("lr_start", c.train.lr_start);
      c.train.lr_end = t.value("lr_end", c.train.lr_end);
    }
    c.completer = parse_completer(j.value("completer", std::string(completer_name(c.completer))));
    c.completion_net = resolve(j.value("completion_net", std::string()));
    if (j.contains("discriminator")) {
      const auto& d = j.at("discriminator");
      c.discriminator.path = resolve(d.value("path", std::string()));
      c.discriminator.steps = d.value("steps", c.discriminator.steps);
      c.discriminator.lr = d.value("lr", c.discriminator.lr);
      c.discriminator.batch = d.value("batch", c.discriminator.batch);
    }
    c.extractor = j.value("extractor", c.extractor);
    c.selection = j.value("selection", c.selection);
    c.densify_window = j.value("densify_window", c.densify_window);
    if (j.contains("nllf")) {
      const auto& n = j.at("nllf");
      c.nllf_real_crops = n.value("real_crops", c.nllf_real_crops);
      c.nllf_view_crops = n.value("view_crops", c.nllf_view_crops);
      c.crop_size = n.value("crop_size", c.crop_size);
    }
    c.scene_name = j.value("scene_name", c.scene_name);
    c.out_dir = j.value("out_dir", c.out_dir.string());
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  c.validate();
  return c;
}

inline RunConfig load_run_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read run config " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed run config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

inline void save_run_config(const fs::path& path, const RunConfig& c) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << to_json(c).dump(2) << '\n';
}

}  // namespace omnisynth::pipeline
