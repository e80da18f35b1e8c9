// Single-core walkthrough: synthesize the stock room, run the method at desk
// scale and render a short camera path through the trained field.
//
//   desk_room [out_dir] [iterations]

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "omnisynth/pipeline.hpp"
#include "omnisynth/scenesim.hpp"

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  using namespace omnisynth;

  const fs::path out = argc > 1 ? argv[1] : "desk_room_run";
  fs::create_directories(out);
  scenesim::save_scene(out / "scene.json", scenesim::default_room());

  pipeline::RunConfig config = pipeline::desk_config();
  config.input.scene = out / "scene.json";
  config.out_dir = out;
  config.completer = pipeline::Completer::Baseline;
  if (argc > 2) config.train.iterations = std::strtoull(argv[2], nullptr, 10);

  try {
    const auto result = pipeline::run_pipeline(config, &std::cout);
    std::cout << "input PSNR " << result.input_psnr << " dB, held-out PSNR " << result.heldout_psnr_mean
              << " dB, NLLF " << result.nllf << "\n";

    // A short walk away from the input pose.
    const auto frames = pipeline::path_render(result.field, {Vec3(0, 0, 0), Vec3(0.4, 0.2, 0), Vec3(-0.3, 0.3, 0)},
                                              12, out / "path");
    std::cout << "wrote " << frames.size() << " path frames to " << (out / "path").string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
