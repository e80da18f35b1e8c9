#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "omnisynth/completion.hpp"
#include "omnisynth/geometry.hpp"
#include "omnisynth/metrics.hpp"
#include "omnisynth/pipeline/config.hpp"
#include "omnisynth/radiance.hpp"
#include "omnisynth/scenesim.hpp"
#include "omnisynth/selection.hpp"

namespace omnisynth::pipeline {

/// Output layout below the run directory.
struct RunLayout {
  fs::path root;

  fs::path input_dir() const { return root / "input"; }
  fs::path reprojection_dir() const { return root / "reprojections"; }
  fs::path completion_dir() const { return root / "completions"; }
  fs::path discriminator_stem() const { return root / "discriminator" / "net"; }
  fs::path checkpoint_stem() const { return root / "checkpoint" / "field"; }
  fs::path render_dir() const { return root / "renders"; }
  fs::path report() const { return root / "report.csv"; }
  fs::path metrics() const { return root / "metrics.json"; }
  fs::path loss_trace() const { return root / "loss_trace.csv"; }
  fs::path selection_trace() const { return root / "selection_trace.csv"; }

  static io::PanoramaPaths panorama(const fs::path& dir, const std::string& stem) {
    return {dir / (stem + "_rgb.png"), dir / (stem + "_depth.png"), dir / (stem + "_mask.png")};
  }
  static std::string index_stem(std::size_t i) {
    std::string s = std::to_string(i);
    return s.size() < 3 ? std::string(3 - s.size(), '0') + s : s;
  }
};

namespace detail {

inline bool panorama_exists(const io::PanoramaPaths& p) {
  return fs::exists(p.rgb) && fs::exists(p.depth) && fs::exists(p.mask);
}

// Writes the panorama and returns what reads back, so a fresh run and a
// cached rerun see the same quantised values.
inline RgbdPanorama persist(const io::PanoramaPaths& p, const RgbdPanorama& pano, double depth_scale) {
  fs::create_directories(p.rgb.parent_path());
  io::write_panorama(p, pano, depth_scale);
  return io::read_panorama(p, depth_scale);
}

// A stage cache is reused only when its stamp matches the inputs that
// produced it.
inline bool stamp_matches(const fs::path& path, const nlohmann::json& stamp) {
  std::ifstream is(path);
  if (!is) return false;
  try {
    return nlohmann::json::parse(is) == stamp;
  } catch (const nlohmann::json::exception&) {
    return false;
  }
}

inline void write_stamp(const fs::path& path, const nlohmann::json& stamp) {
  fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << stamp.dump(2) << '\n';
}

inline Image box_blur(const Image& img, int radius) {
  Image out(img.width, img.height);
  for (int v = 0; v < img.height; ++v)
    for (int u = 0; u < img.width; ++u) {
      Color s = Color::Zero();
      int n = 0;
      for (int dv = -radius; dv <= radius; ++dv) {
        const int y = v + dv;
        if (y < 0 || y >= img.height) continue;
        for (int du = -radius; du <= radius; ++du, ++n) s += img.at(geometry::wrap_column(u + du, img.width), y);
      }
      out.at(u, v) = s / static_cast<float>(n);
    }
  return out;
}

inline CameraPose free_pose(const scenesim::BoxScene& scene, Rng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const Vec3 lo = scene.room_min * 0.5, hi = scene.room_max * 0.5;
    const Vec3 p(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()), rng.uniform(lo.z(), hi.z()) * 0.5);
    if (scene.in_free_space(p)) return CameraPose(p);
  }
  throw Error("could not place a camera in the free space of the room");
}

inline RgbdPanorama as_panorama(const Image& img) {
  RgbdPanorama p(img.width, img.height);
  p.rgb = img.rgb;
  std::fill(p.valid.begin(), p.valid.end(), 1);
  return p;
}

}  // namespace detail

/// Everything a finished run produces besides the files it writes.
struct RunResult {
  radiance::RadianceField field;
  std::vector<radiance::LossRecord> loss_trace;
  std::vector<selection::SelectionRecord> selection_trace;
  std::vector<std::size_t> selected;  // final base positions (empty without selection)
  double input_psnr = 0.0;
  std::vector<double> heldout_psnr;  // per evaluation point; empty without ground truth
  double heldout_psnr_mean = 0.0;
  double nllf = 0.0;
};

/// One run of the method, stage by stage. Each stage caches its artifacts
/// below the run directory; a stage whose cache stamp matches is loaded
/// instead of recomputed.
class Pipeline {
 public:
  explicit Pipeline(RunConfig config, std::ostream* log = nullptr)
      : config_(std::move(config)), layout_{config_.out_dir}, log_(log) {
    config_.validate();
    config_.check_inputs();
  }

  const RunConfig& config() const { return config_; }
  const RunLayout& layout() const { return layout_; }
  const RgbdPanorama& input() const { return input_; }
  const std::optional<scenesim::BoxScene>& scene() const { return scene_; }
  const std::vector<geometry::GridPosition>& grid() const { return grid_; }
  const std::vector<RgbdPanorama>& reprojections() const { return reprojections_; }
  const std::vector<RgbdPanorama>& completions() const { return completions_; }
  const std::vector<double>& completion_scores() const { return completion_scores_; }
  const DepthBounds& bounds() const { return bounds_; }

  /// Input panorama, depth bounds and reprojection grid.
  void load_input() {
    stage("input", [&] {
      const auto paths = RunLayout::panorama(layout_.input_dir(), "input");
      if (config_.input.synthetic()) {
        scene_ = scenesim::load_scene(config_.input.scene);
        const auto truth =
            scenesim::render_ground_truth(*scene_, CameraPose(), config_.input.width, config_.input.height);
        input_ = detail::persist(paths, truth, config_.depth_scale);
      } else {
        input_ = io::read_panorama({config_.input.rgb, config_.input.depth, {}}, config_.depth_scale);
        detail::persist(paths, input_, config_.depth_scale);
      }
      OMNISYNTH_REQUIRE(input_.valid_count() > 0, "input panorama has no valid depth");
      log("input " + std::to_string(input_.width) + "x" + std::to_string(input_.height));
    });
    stage("grid", [&] {
      bounds_ = geometry::depth_bounds(geometry::panorama_to_points(input_));
      grid_ = geometry::reprojection_grid(bounds_, config_.grid_per_axis);
      field_config_ = config_.field;
      if (config_.auto_far) {
        const double reach = std::max({-bounds_.x_min, bounds_.x_max, -bounds_.y_min, bounds_.y_max}) / 2;
        field_config_.far = 1.05 * (geometry::max_depth(input_) + reach);
      }
      field_config_.validate();
    });
  }

  /// Reprojects the input to every grid position and densifies the result.
  void reproject_all() {
    require_loaded();
    stage("reproject", [&] {
      const nlohmann::json stamp = {{"input", input_stamp()}, {"grid_per_axis", config_.grid_per_axis},
                                    {"densify_window", config_.densify_window}};
      const fs::path stamp_path = layout_.reprojection_dir() / "stamp.json";
      const bool cached = detail::stamp_matches(stamp_path, stamp);
      const PointCloud cloud = geometry::panorama_to_points(input_);
      reprojections_.clear();
      for (std::size_t i = 0; i < grid_.size(); ++i) {
        const auto paths = RunLayout::panorama(layout_.reprojection_dir(), RunLayout::index_stem(i));
        if (cached && detail::panorama_exists(paths)) {
          reprojections_.push_back(io::read_panorama(paths, config_.depth_scale));
          continue;
        }
        const auto raw = geometry::reproject(cloud, grid_[i].pose, input_.width, input_.height);
        reprojections_.push_back(
            detail::persist(paths, geometry::densify_panorama(raw, config_.densify_window), config_.depth_scale));
      }
      detail::write_stamp(stamp_path, stamp);
      log(std::string(cached ? "loaded " : "wrote ") + std::to_string(reprojections_.size()) + " reprojections");
    });
  }

  /// Completes every reprojection and scores it with the discriminator.
  void complete_all() {
    if (reprojections_.empty()) reproject_all();
    stage("discriminator", [&] { prepare_discriminator(); });
    stage("complete", [&] {
      nlohmann::json stamp = {{"input", input_stamp()},
                              {"grid_per_axis", config_.grid_per_axis},
                              {"densify_window", config_.densify_window},
                              {"completer", completer_name(config_.completer)}};
      if (config_.completer == Completer::Neural) stamp["completion_net"] = fs::absolute(config_.completion_net).string();
      const fs::path stamp_path = layout_.completion_dir() / "stamp.json";
      const bool cached = detail::stamp_matches(stamp_path, stamp);
      if (config_.completer == Completer::Oracle)
        OMNISYNTH_REQUIRE(scene_.has_value(), "oracle completion needs a synthetic scene");
      completions_.clear();
      for (std::size_t i = 0; i < grid_.size(); ++i) {
        const std::string stem = RunLayout::index_stem(i);
        const auto paths = RunLayout::panorama(layout_.completion_dir(), stem);
        const fs::path mask_path = layout_.completion_dir() / (stem + "_hole.png");
        if (cached && detail::panorama_exists(paths) && fs::exists(mask_path)) {
          completions_.push_back(io::read_panorama(paths, config_.depth_scale));
          continue;
        }
        const RgbdPanorama& r = reprojections_[i];
        const auto mask = completion::Mask::from_valid(r);
        completion::save_mask(mask_path, mask);
        RgbdPanorama done;
        switch (config_.completer) {
          case Completer::Oracle: done = scenesim::oracle_completion(*scene_, grid_[i].pose, r); break;
          case Completer::Baseline: done = completion::complete(r, mask, completion::Method::Baseline).panorama; break;
          case Completer::Neural:
            done = completion::complete(r, mask, completion::Method::Neural, &*net_).panorama;
            break;
        }
        completions_.push_back(detail::persist(paths, done, config_.depth_scale));
      }
      detail::write_stamp(stamp_path, stamp);
      completion_scores_.assign(completions_.size(), 0.5);
      if (net_)
        for (std::size_t i = 0; i < completions_.size(); ++i)
          completion_scores_[i] = completion::discriminator_score(*net_, completions_[i].color_image());
      log(std::string(cached ? "loaded " : "wrote ") + std::to_string(completions_.size()) + " " +
          completer_name(config_.completer) + " completions");
    });
  }

  /// Trains the field with (or without) simultaneous position selection.
  RunResult train() {
    if (completions_.empty()) complete_all();
    RunResult result;
    stage("train", [&] {
      radiance::TrainConfig tc = config_.train;
      tc.hook_period = config_.K;
      tc.seed = config_.seed;
      result.field = radiance::RadianceField::initialize(field_config_, config_.seed);

      std::vector<radiance::SupervisionImage> fixed{{input_, CameraPose()}};
      for (std::size_t i = 0; i < grid_.size(); ++i) fixed.push_back({reprojections_[i], grid_[i].pose});

      if (!config_.selection) {
        std::vector<radiance::SupervisionImage> all;
        for (std::size_t i = 0; i < grid_.size(); ++i) all.push_back({completions_[i], grid_[i].pose});
        result.loss_trace = radiance::train(result.field, std::move(fixed), std::move(all), tc);
        return;
      }
      const auto prior = selection::PositionPrior::from_grid(grid_);
      Rng rng = Rng(config_.seed).fork(0x5e1ec7);
      auto state =
          selection::initialize_selection(prior, config_.M, config_.epsilon, config_.K, selection::InitMode::Spread, rng);
      const auto eval_poses = geometry::evaluation_points(bounds_);
      auto selected = [&](const std::vector<std::size_t>& t_c) {
        std::vector<radiance::SupervisionImage> out;
        for (std::size_t t : t_c) out.push_back({completions_[t], grid_[t].pose});
        return out;
      };
      radiance::SelectionHook hook = [&](std::uint64_t iteration, const radiance::RadianceField& field)
          -> std::optional<std::vector<radiance::SupervisionImage>> {
        std::vector<double> eval;
        for (const auto& pose : eval_poses) eval.push_back(view_score(render_panorama(field, pose)));
        const selection::ScoreFn score = [&](const std::vector<std::size_t>& t_c) {
          selection::Scores s;
          s.eval = eval;
          for (std::size_t t : t_c) s.comp.push_back(completion_scores_[t]);
          return s;
        };
        auto rec = selection::selection_step(state, prior, score, rng);
        log("iteration " + std::to_string(iteration) + " elbo " + std::to_string(rec.elbo) +
            (rec.accepted ? " accepted" : ""));
        result.selection_trace.push_back(std::move(rec));
        return selected(state.t_c);
      };
      result.loss_trace = radiance::train(result.field, std::move(fixed), selected(state.t_c), tc, hook);
      result.selected = state.q.mu;
    });
    stage("checkpoint", [&] {
      fs::create_directories(layout_.checkpoint_stem().parent_path());
      radiance::save_field(layout_.checkpoint_stem(), result.field);
      radiance::write_loss_trace(layout_.loss_trace(), result.loss_trace);
      selection::write_selection_trace(layout_.selection_trace(), result.selection_trace);
    });
    return result;
  }

  /// Renders the input and evaluation views and writes the report files.
  void evaluate(RunResult& result) {
    require_loaded();
    stage("evaluate", [&] {
      fs::create_directories(layout_.render_dir());
      const Image input_view = render_panorama(result.field, CameraPose());
      io::write_image(layout_.render_dir() / "input.png", input_view);
      result.input_psnr = metrics::psnr(input_view, input_.color_image());

      const auto eval_poses = geometry::evaluation_points(bounds_);
      std::vector<Image> views;
      result.heldout_psnr.clear();
      for (std::size_t k = 0; k < eval_poses.size(); ++k) {
        views.push_back(render_panorama(result.field, eval_poses[k]));
        io::write_image(layout_.render_dir() / ("eval_" + std::to_string(k) + ".png"), views.back());
        if (scene_) {
          const auto truth = scenesim::render_ground_truth(*scene_, eval_poses[k], input_.width, input_.height);
          result.heldout_psnr.push_back(metrics::psnr(views.back(), truth.color_image()));
        }
      }
      result.heldout_psnr_mean = 0.0;
      for (double p : result.heldout_psnr) result.heldout_psnr_mean += p / result.heldout_psnr.size();

      const auto extractor = metrics::baseline_extractor();
      Rng rng = Rng(config_.seed).fork(0x4e11f);
      const auto real = metrics::random_perspective_crops(input_, config_.nllf_real_crops, config_.crop_size, rng);
      const auto gaussian = metrics::fit_feature_gaussian(real, extractor);
      std::vector<Image> crops;
      for (const auto& v : views) {
        const auto c = metrics::random_perspective_crops(detail::as_panorama(v), config_.nllf_view_crops,
                                                         config_.crop_size, rng);
        crops.insert(crops.end(), c.begin(), c.end());
      }
      result.nllf = metrics::nllf(crops, extractor, gaussian);

      const std::string method = config_.selection ? "ours" : "ours_wo_selection";
      metrics::write_report(layout_.report(), {{config_.scene_name, method, result.input_psnr, result.nllf}});
      nlohmann::json m = {{"scene", config_.scene_name},
                          {"method", method},
                          {"completer", completer_name(config_.completer)},
                          {"input_psnr_db", metrics::capped_psnr(result.input_psnr)},
                          {"nllf", result.nllf},
                          {"selected", result.selected}};
      if (scene_) {
        nlohmann::json per = nlohmann::json::array();
        for (double p : result.heldout_psnr) per.push_back(metrics::capped_psnr(p));
        m["heldout_psnr_db"] = per;
        m["heldout_psnr_mean_db"] = result.heldout_psnr_mean;
      }
      std::ofstream os(layout_.metrics());
      if (!os) throw Error("cannot write " + layout_.metrics().string());
      os << m.dump(2) << '\n';
      log("input PSNR " + std::to_string(result.input_psnr) + " dB" +
          (scene_ ? ", held-out PSNR " + std::to_string(result.heldout_psnr_mean) + " dB" : std::string()));
    });
  }

  /// Re-evaluates the field checkpoint of an earlier run.
  RunResult evaluate_checkpoint() {
    require_loaded();
    RunResult r;
    stage("checkpoint", [&] { r.field = radiance::load_field(layout_.checkpoint_stem()); });
    evaluate(r);
    return r;
  }

  RunResult run() {
    load_input();
    reproject_all();
    complete_all();
    RunResult r = train();
    evaluate(r);
    return r;
  }

  Image render_panorama(const radiance::RadianceField& field, const CameraPose& pose) const {
    return radiance::render_view(field, pose, radiance::EquirectCamera{input_.width, input_.height},
                                 radiance::RenderOptions{config_.train.n_coarse, config_.train.n_fine})
        .rgb;
  }

 private:
  template <class Fn>
  void stage(const std::string& name, Fn&& fn) {
    try {
      fn();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  }

  void log(const std::string& msg) const {
    if (log_) *log_ << msg << std::endl;
  }

  void require_loaded() {
    if (grid_.empty()) load_input();
  }

  nlohmann::json input_stamp() const {
    if (config_.input.synthetic())
      return {{"scene", fs::absolute(config_.input.scene).string()}, {"width", input_.width}, {"height", input_.height}};
    return {{"rgb", fs::absolute(config_.input.rgb).string()}, {"depth", fs::absolute(config_.input.depth).string()}};
  }

  double view_score(const Image& view) const { return net_ ? completion::discriminator_score(*net_, view) : 0.5; }

  // The neural completer brings its own discriminator. Otherwise one is
  // loaded, or trained on random rooms (real panoramas against diffusion
  // completions and blurred copies), when selection needs scores.
  void prepare_discriminator() {
    if (config_.completer == Completer::Neural) {
      net_ = completion::load_completion_net(config_.completion_net);
      return;
    }
    if (!config_.discriminator.path.empty()) {
      net_ = completion::load_completion_net(config_.discriminator.path);
      return;
    }
    if (!config_.selection) return;
    completion::require_network_size(input_.width, input_.height);
    const nlohmann::json stamp = {{"width", input_.width},
                                  {"height", input_.height},
                                  {"steps", config_.discriminator.steps},
                                  {"lr", config_.discriminator.lr},
                                  {"batch", config_.discriminator.batch},
                                  {"seed", config_.seed}};
    const fs::path stem = layout_.discriminator_stem();
    const fs::path stamp_path = stem.parent_path() / "stamp.json";
    if (detail::stamp_matches(stamp_path, stamp) && fs::exists(fs::path(stem).concat(".osnf"))) {
      net_ = completion::load_completion_net(stem);
      log("loaded discriminator");
      return;
    }
    net_ = train_discriminator(config_.discriminator, input_.width, input_.height, config_.seed);
    fs::create_directories(stem.parent_path());
    completion::save_completion_net(stem, *net_);
    net_ = completion::load_completion_net(stem);
    detail::write_stamp(stamp_path, stamp);
    log("trained discriminator for " + std::to_string(config_.discriminator.steps) + " steps");
  }

 public:
  /// D trained on fresh random rooms each step.
  static completion::CompletionNet train_discriminator(const DiscriminatorSpec& spec, int width, int height,
                                                       std::uint64_t seed) {
    auto net = completion::CompletionNet::initialize(completion::NetConfig{}, seed);
    completion::DiscriminatorTrainer trainer(net, spec.lr);
    for (int step = 0; step < spec.steps; ++step) {
      Rng rng = Rng(seed).fork(0xd15c + static_cast<std::uint64_t>(step));
      std::vector<Image> real, fake;
      for (int b = 0; b < spec.batch; ++b) {
        const auto room = scenesim::random_room(rng);
        const auto truth = scenesim::render_ground_truth(room, detail::free_pose(room, rng), width, height);
        real.push_back(truth.color_image());
        if (b % 2 == 0) {
          const auto mask = completion::random_mask(width, height, rng, rng.uniform(0.5, 0.9));
          fake.push_back(completion::diffusion_complete(truth, mask).color_image());
        } else {
          fake.push_back(detail::box_blur(real.back(), 1 + static_cast<int>(rng.uniform_int(2))));
        }
      }
      trainer.step(real, fake);
    }
    return net;
  }

 private:
  RunConfig config_;
  RunLayout layout_;
  std::ostream* log_;
  RgbdPanorama input_;
  std::optional<scenesim::BoxScene> scene_;
  DepthBounds bounds_;
  radiance::FieldConfig field_config_;
  std::vector<geometry::GridPosition> grid_;
  std::vector<RgbdPanorama> reprojections_;
  std::vector<RgbdPanorama> completions_;
  std::vector<double> completion_scores_;
  std::optional<completion::CompletionNet> net_;
};

inline RunResult run_pipeline(const RunConfig& config, std::ostream* log = nullptr) {
  return Pipeline(config, log).run();
}

}  // namespace omnisynth::pipeline
