// Command-line front end: one subcommand per pipeline stage.
//
// Exit codes: 0 success, 1 configuration error, 2 stage failure.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "omnisynth/completion.hpp"
#include "omnisynth/pipeline.hpp"
#include "omnisynth/scenesim.hpp"

namespace {

namespace fs = std::filesystem;
using namespace omnisynth;

constexpr int kConfigError = 1;
constexpr int kStageFailure = 2;

Vec3 to_vec3(const std::vector<double>& v, const char* what) {
  if (v.size() != 3) throw pipeline::ConfigError(std::string(what) + " needs three components");
  return Vec3(v[0], v[1], v[2]);
}

// Run configuration sources and overrides shared by the stage commands.
struct RunOptions {
  std::string config;
  bool desk = false;
  std::string out_dir;
  std::string scene;
  std::string rgb;
  std::string depth;
  std::string completer;
  std::string completion_net;
  bool no_selection = false;
  std::vector<std::uint64_t> seed;
  std::vector<std::uint64_t> iterations;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "run configuration JSON");
    cmd->add_flag("--desk", desk, "start from the 64x32 single-core preset instead of the full-size defaults");
    cmd->add_option("--out-dir", out_dir, "run directory; every output path lives below it");
    cmd->add_option("--scene", scene, "scene description to synthesize the input from");
    cmd->add_option("--rgb", rgb, "input RGB panorama");
    cmd->add_option("--depth", depth, "input depth panorama (16-bit)");
    cmd->add_option("--completer", completer, "oracle, baseline or neural");
    cmd->add_option("--completion-net", completion_net, "completion network stem (neural completer)");
    cmd->add_flag("--no-selection", no_selection, "train on every completed image");
    cmd->add_option("--seed", seed, "random seed")->expected(1);
    cmd->add_option("--iterations", iterations, "NeRF iterations")->expected(1);
  }

  pipeline::RunConfig build() const {
    pipeline::RunConfig c = !config.empty() ? pipeline::load_run_config(config)
                            : desk             ? pipeline::desk_config()
                                               : pipeline::RunConfig{};
    if (!out_dir.empty()) c.out_dir = out_dir;
    if (!scene.empty()) c.input = {scene, {}, {}, c.input.width, c.input.height};
    if (!rgb.empty()) c.input.rgb = rgb;
    if (!depth.empty()) c.input.depth = depth;
    if (!rgb.empty() || !depth.empty()) c.input.scene.clear();
    if (!completer.empty()) c.completer = pipeline::parse_completer(completer);
    if (!completion_net.empty()) c.completion_net = completion_net;
    if (no_selection) c.selection = false;
    if (!seed.empty()) c.seed = seed.front();
    if (!iterations.empty()) c.train.iterations = iterations.front();
    c.validate();
    return c;
  }
};

int run(int argc, char** argv) {
  CLI::App app{"Omnidirectional novel-view synthesis from a single RGB-D panorama"};
  app.require_subcommand(1);

  // synth-scene
  auto* synth = app.add_subcommand("synth-scene", "write a scene description and its ground-truth panorama");
  std::string synth_scene, synth_out = "scene";
  std::vector<double> synth_pose{0, 0, 0};
  int synth_width = 1024;
  std::vector<std::uint64_t> synth_random;
  double synth_depth_scale = 1000.0;
  synth->add_option("--scene", synth_scene, "existing scene description (default: the stock room)");
  synth->add_option("--random", synth_random, "generate a random room from this seed")->expected(1);
  synth->add_option("--pose", synth_pose, "camera position x y z")->expected(3);
  synth->add_option("--width", synth_width, "panorama width (height = width / 2)");
  synth->add_option("--depth-scale", synth_depth_scale, "depth PNG units per metre");
  synth->add_option("--out-dir", synth_out, "output directory");
  synth->callback([&] {
    scenesim::BoxScene scene;
    if (!synth_scene.empty()) {
      scene = scenesim::load_scene(synth_scene);
    } else if (!synth_random.empty()) {
      Rng rng(synth_random.front());
      scene = scenesim::random_room(rng);
    } else {
      scene = scenesim::default_room();
    }
    if (synth_width <= 0 || synth_width % 2) throw pipeline::ConfigError("width must be a positive even number");
    const fs::path out(synth_out);
    scenesim::save_scene(out / "scene.json", scene);
    const auto pano =
        scenesim::render_ground_truth(scene, CameraPose(to_vec3(synth_pose, "--pose")), synth_width, synth_width / 2);
    io::write_panorama(pipeline::RunLayout::panorama(out, "panorama"), pano, synth_depth_scale);
    std::cout << "wrote " << (out / "scene.json").string() << " and panorama_{rgb,depth,mask}.png\n";
  });

  // reproject / complete / train / evaluate share the run options.
  RunOptions reproject_opts, complete_opts, train_opts, eval_opts;
  auto* reproject = app.add_subcommand("reproject", "reproject the input to every grid position");
  reproject_opts.attach(reproject);
  reproject->callback([&] {
    pipeline::Pipeline p(reproject_opts.build(), &std::cout);
    p.reproject_all();
  });

  auto* complete = app.add_subcommand("complete", "complete every reprojection");
  complete_opts.attach(complete);
  complete->callback([&] {
    pipeline::Pipeline p(complete_opts.build(), &std::cout);
    p.complete_all();
  });

  auto* train = app.add_subcommand("train", "run the full pipeline: reproject, complete, train with selection, evaluate");
  train_opts.attach(train);
  train->callback([&] { pipeline::run_pipeline(train_opts.build(), &std::cout); });

  auto* evaluate = app.add_subcommand("evaluate", "re-evaluate the field checkpoint of a run");
  eval_opts.attach(evaluate);
  evaluate->callback([&] {
    pipeline::Pipeline p(eval_opts.build(), &std::cout);
    p.evaluate_checkpoint();
  });

  // render
  auto* render = app.add_subcommand("render", "render one view from a field checkpoint");
  std::string render_ckpt, render_out = "view.png";
  std::vector<double> render_pose{0, 0, 0}, render_dir;
  int render_width = 512, render_height = 256, n_coarse = 64, n_fine = 128;
  double render_fov = 90.0;
  render->add_option("--checkpoint", render_ckpt, "field checkpoint stem")->required();
  render->add_option("--pose", render_pose, "camera position x y z")->expected(3);
  render->add_option("--view-dir", render_dir, "render a perspective view along this direction")->expected(3);
  render->add_option("--fov", render_fov, "horizontal field of view in degrees (perspective)");
  render->add_option("--width", render_width, "image width");
  render->add_option("--height", render_height, "image height");
  render->add_option("--n-coarse", n_coarse, "coarse samples per ray");
  render->add_option("--n-fine", n_fine, "fine samples per ray");
  render->add_option("--out", render_out, "output PNG");
  render->callback([&] {
    const auto field = radiance::load_field(render_ckpt);
    const CameraPose pose(to_vec3(render_pose, "--pose"));
    radiance::Camera camera = radiance::EquirectCamera{render_width, render_height};
    if (!render_dir.empty())
      camera = radiance::PinholeCamera{to_vec3(render_dir, "--view-dir").normalized(), render_fov, render_width,
                                       render_height};
    const auto view = radiance::render_view(field, pose, camera, radiance::RenderOptions{n_coarse, n_fine});
    io::write_image(render_out, view.rgb);
    std::cout << "wrote " << render_out << "\n";
  });

  // path-render
  auto* path = app.add_subcommand("path-render", "render perspective frames along a camera path");
  std::string path_ckpt, path_out = "frames";
  std::vector<double> waypoints;
  int frames = 30;
  pipeline::PathRenderOptions path_opt;
  path->add_option("--checkpoint", path_ckpt, "field checkpoint stem")->required();
  path->add_option("--waypoints", waypoints, "waypoint coordinates x1 y1 z1 x2 y2 z2 ...");
  path->add_option("--frames", frames, "number of frames");
  path->add_option("--fov", path_opt.fov_deg, "horizontal field of view in degrees");
  path->add_option("--width", path_opt.width, "frame width");
  path->add_option("--height", path_opt.height, "frame height");
  path->add_option("--n-coarse", path_opt.render.n_coarse, "coarse samples per ray");
  path->add_option("--n-fine", path_opt.render.n_fine, "fine samples per ray");
  path->add_option("--out-dir", path_out, "output directory");
  path->callback([&] {
    if (waypoints.size() % 3) throw pipeline::ConfigError("waypoints need three coordinates each");
    std::vector<Vec3> points;
    for (std::size_t i = 0; i < waypoints.size(); i += 3)
      points.emplace_back(waypoints[i], waypoints[i + 1], waypoints[i + 2]);
    const auto field = radiance::load_field(path_ckpt);
    const auto files = pipeline::path_render(field, points, frames, path_out, path_opt);
    std::cout << "wrote " << files.size() << " frames to " << path_out << "\n";
  });

  // train-completion
  auto* train_completion = app.add_subcommand("train-completion", "train the completion network on random rooms");
  std::string tc_out = "completion/net";
  int tc_rooms = 64, tc_width = 64;
  completion::CompletionTrainConfig tc;
  train_completion->add_option("--rooms", tc_rooms, "number of random training rooms");
  train_completion->add_option("--width", tc_width, "panorama width (height = width / 2)");
  train_completion->add_option("--iterations", tc.iterations, "training iterations");
  train_completion->add_option("--batch", tc.batch, "batch size");
  train_completion->add_option("--seed", tc.seed, "random seed");
  train_completion->add_option("--out", tc_out, "output network stem");
  train_completion->callback([&] {
    if (tc_rooms < 1) throw pipeline::ConfigError("--rooms must be positive");
    std::vector<Image> data;
    Rng rng(tc.seed);
    for (int i = 0; i < tc_rooms; ++i) {
      const auto room = scenesim::random_room(rng);
      data.push_back(scenesim::render_ground_truth(room, CameraPose(), tc_width, tc_width / 2).color_image());
    }
    completion::CompletionTrainer trainer(std::move(data), tc);
    for (int i = 0; i < tc.iterations; ++i) {
      const auto rec = trainer.step();
      if ((i + 1) % 50 == 0)
        std::cout << "iteration " << i + 1 << " l1 " << rec.l1 << " adv " << rec.adversarial << " d "
                  << rec.discriminator << "\n";
    }
    if (fs::path(tc_out).has_parent_path()) fs::create_directories(fs::path(tc_out).parent_path());
    completion::save_completion_net(tc_out, trainer.net());
    std::cout << "wrote " << tc_out << ".osnf\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  } catch (const pipeline::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const pipeline::StageError& e) {
    std::cerr << "stage failure " << e.what() << "\n";
    return kStageFailure;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return kStageFailure;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
