#pragma once

#include <string>

#include "omnisynth/completion/baseline.hpp"
#include "omnisynth/completion/network.hpp"

namespace omnisynth::completion {

enum class Method { Neural, Baseline };

inline const char* method_name(Method m) { return m == Method::Neural ? "neural" : "baseline"; }

inline Method parse_method(const std::string& s) {
  if (s == "neural") return Method::Neural;
  if (s == "baseline") return Method::Baseline;
  throw InvalidArgument("unknown completion method '" + s + "' (expected neural or baseline)");
}

struct CompletionResult {
  RgbdPanorama panorama;  // every pixel valid; observed pixels unchanged
  double score = 0.5;     // discriminator output in [0, 1]
};

/// Fills the pixels `mask` marks missing. Depth is always filled by
/// diffusion from observed depth. The score comes from `net`'s
/// discriminator when it is trained (or when the neural path runs), and is
/// 0.5 otherwise.
inline CompletionResult complete(const RgbdPanorama& pano, const Mask& mask, Method method,
                                 const CompletionNet* net = nullptr, const DiffusionOptions& opt = {}) {
  mask.require_matches(pano.width, pano.height);
  OMNISYNTH_REQUIRE(method == Method::Baseline || net != nullptr, "neural completion needs a network");
  CompletionResult r;
  if (mask.observed_count() == mask.pixel_count()) {
    r.panorama = pano;
  } else if (method == Method::Baseline) {
    r.panorama = diffusion_complete(pano, mask, opt);
  } else {
    OMNISYNTH_REQUIRE(mask.observed_count() > 0, "completion needs at least one observed pixel for depth");
    r.panorama = pano;
    r.panorama.rgb = neural_fill(*net, pano.color_image(), mask).rgb;
    for (std::size_t i = 0; i < pano.pixel_count(); ++i)
      if (mask.observed[i]) r.panorama.rgb[i] = pano.rgb[i];
    diffuse_depth(r.panorama, mask, opt);
    std::fill(r.panorama.valid.begin(), r.panorama.valid.end(), 1);
  }
  if (net && (net->discriminator_trained || method == Method::Neural))
    r.score = discriminator_score(*net, r.panorama.color_image());
  return r;
}

}  // namespace omnisynth::completion
