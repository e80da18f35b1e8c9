#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "omnisynth/diff/adam.hpp"
#include "omnisynth/radiance/render.hpp"

namespace omnisynth::radiance {

struct TrainConfig {
  int n_coarse = 64;
  int n_fine = 128;
  int batch = 1400;
  std::uint64_t iterations = 200000;
  double lr_start = 5e-4;
  double lr_end = 5e-5;
  std::uint64_t seed = 0;
  std::uint64_t hook_period = 500;  // iterations between selection_hook calls

  void validate() const {
    OMNISYNTH_REQUIRE(n_coarse >= 1 && n_fine >= 1, "sample counts must be positive");
    OMNISYNTH_REQUIRE(batch >= 1, "batch must hold at least one ray");
    OMNISYNTH_REQUIRE(lr_start > 0.0 && lr_end > 0.0, "learning rates must be positive");
    OMNISYNTH_REQUIRE(hook_period >= 1, "hook period must be positive");
  }
};

/// A panorama supervising the field from its camera pose; only valid
/// pixels contribute rays.
struct SupervisionImage {
  RgbdPanorama pano;
  CameraPose pose;
};

struct LossRecord {
  std::uint64_t iteration = 0;
  double coarse_loss = 0.0;
  double fine_loss = 0.0;
  double lr = 0.0;
};

/// Called after every hook_period-th iteration with the number of completed
/// iterations. A returned list replaces the swappable supervision images.
using SelectionHook =
    std::function<std::optional<std::vector<SupervisionImage>>(std::uint64_t iteration, const RadianceField& field)>;

/// Photometric trainer. Fixed images (input, reprojections) stay for the
/// whole run; swappable images are the currently selected completions.
class Trainer {
 public:
  Trainer(RadianceField& field, std::vector<SupervisionImage> fixed, std::vector<SupervisionImage> swappable,
          const TrainConfig& config)
      : field_(field), fixed_(std::move(fixed)), swappable_(std::move(swappable)), config_(config) {
    config_.validate();
    field_.config.validate();
    OMNISYNTH_REQUIRE(!fixed_.empty() || !swappable_.empty(), "supervision must not be empty");
    rebuild_pool();
  }

  void set_swappable(std::vector<SupervisionImage> images) {
    swappable_ = std::move(images);
    rebuild_pool();
  }

  std::uint64_t iteration() const { return iteration_; }
  std::size_t supervised_pixels() const { return pool_.size(); }

  /// One Adam step on a batch drawn uniformly from all valid pixels.
  LossRecord step() {
    Rng rng = Rng(config_.seed).fork(iteration_);
    std::vector<Ray> rays(static_cast<std::size_t>(config_.batch));
    for (auto& ray : rays) {
      const PixelRef px = pool_[rng.uniform_int(pool_.size())];
      const SupervisionImage& img = image(px.image);
      const int u = static_cast<int>(px.pixel % img.pano.width);
      const int v = static_cast<int>(px.pixel / img.pano.width);
      ray.origin = img.pose.position;
      ray.direction = geometry::pixel_to_direction(u, v, img.pano.width, img.pano.height);
      ray.target = img.pano.rgb[px.pixel];
    }
    diff::Tape<float> tape;
    std::vector<diff::Var<float>> ordered;
    const auto vars = bind_field(tape, field_.params, true, &ordered);
    const auto br = render_batch(tape, field_.config, vars, rays.data(), rays.size(), config_.n_coarse,
                                 config_.n_fine, &rng);
    diff::Tensor<float> target(diff::Shape{rays.size(), 3});
    for (std::size_t r = 0; r < rays.size(); ++r)
      for (int c = 0; c < 3; ++c) target.values[3 * r + c] = rays[r].target[c];
    const auto tv = tape.constant(std::move(target));
    auto mse = [&](diff::Var<float> pred) {
      const auto d = diff::sub(pred, tv);
      return diff::mean(diff::mul(d, d));
    };
    const auto lc = mse(br.coarse_rgb);
    const auto lf = mse(br.fine_rgb);
    const auto loss = diff::add(lc, lf);
    tape.backward(loss);

    const double lr = diff::lr_schedule(iteration_, std::max<std::uint64_t>(config_.iterations, iteration_),
                                        config_.lr_start, config_.lr_end);
    diff::adam_step(field_.params, diff::gradients(tape, ordered), adam_, static_cast<float>(lr));
    LossRecord rec{iteration_, lc.value()[0], lf.value()[0], lr};
    ++iteration_;
    return rec;
  }

 private:
  struct PixelRef {
    std::uint32_t image;
    std::uint32_t pixel;
  };

  const SupervisionImage& image(std::uint32_t i) const {
    return i < fixed_.size() ? fixed_[i] : swappable_[i - fixed_.size()];
  }

  void rebuild_pool() {
    pool_.clear();
    const std::size_t n = fixed_.size() + swappable_.size();
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto& pano = image(i).pano;
      for (std::uint32_t p = 0; p < pano.pixel_count(); ++p)
        if (pano.valid[p]) pool_.push_back({i, p});
    }
    OMNISYNTH_REQUIRE(!pool_.empty(), "supervision holds no valid pixels");
  }

  RadianceField& field_;
  std::vector<SupervisionImage> fixed_;
  std::vector<SupervisionImage> swappable_;
  TrainConfig config_;
  diff::AdamState<float> adam_;
  std::vector<PixelRef> pool_;
  std::uint64_t iteration_ = 0;
};

/// Runs config.iterations steps. The hook, when set, is called after every
/// hook_period-th step and may replace the swappable images.
inline std::vector<LossRecord> train(RadianceField& field, std::vector<SupervisionImage> fixed,
                                     std::vector<SupervisionImage> swappable, const TrainConfig& config,
                                     const SelectionHook& hook = {}) {
  Trainer trainer(field, std::move(fixed), std::move(swappable), config);
  std::vector<LossRecord> trace;
  trace.reserve(config.iterations);
  for (std::uint64_t i = 0; i < config.iterations; ++i) {
    trace.push_back(trainer.step());
    if (hook && trainer.iteration() % config.hook_period == 0) {
      if (auto next = hook(trainer.iteration(), field)) trainer.set_swappable(std::move(*next));
    }
  }
  return trace;
}

inline void write_loss_trace(const std::filesystem::path& path, const std::vector<LossRecord>& trace) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << "iteration,coarse_loss,fine_loss,lr\n";
  os.precision(9);
  for (const auto& r : trace) os << r.iteration << ',' << r.coarse_loss << ',' << r.fine_loss << ',' << r.lr << '\n';
}

}  // namespace omnisynth::radiance
