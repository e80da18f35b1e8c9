#pragma once

#include <cstdint>
#include <vector>

#include "omnisynth/completion/network.hpp"
#include "omnisynth/diff/adam.hpp"

namespace omnisynth::completion {

/// Self-supervised completion training: random masks over ground-truth
/// panoramas, L1 plus non-saturating adversarial loss for F and G, and a
/// real-versus-completed logistic loss for D.
struct CompletionTrainConfig {
  NetConfig net;
  int iterations = 1000;
  int batch = 4;
  double lr = 2e-3;      // decays exponentially to lr_end over `iterations`
  double lr_end = 2e-4;
  double beta1 = 0.5;
  double lambda_l1 = 10.0;
  double adv_weight = 1.0;
  double coverage_min = 0.5;  // observed fraction of the training masks
  double coverage_max = 0.9;
  std::uint64_t seed = 0;

  void validate() const {
    net.validate();
    OMNISYNTH_REQUIRE(iterations >= 0 && batch >= 1, "completion training needs iterations >= 0 and batch >= 1");
    OMNISYNTH_REQUIRE(lr > 0.0 && lr_end > 0.0 && beta1 >= 0.0 && beta1 < 1.0, "invalid optimiser settings");
    OMNISYNTH_REQUIRE(lambda_l1 >= 0.0 && adv_weight >= 0.0, "loss weights must be non-negative");
    OMNISYNTH_REQUIRE(0.0 < coverage_min && coverage_min <= coverage_max && coverage_max < 1.0,
                      "mask coverage range must satisfy 0 < min <= max < 1");
  }
};

struct CompletionLoss {
  std::uint64_t iteration = 0;
  double l1 = 0.0;             // mean |G(x) - x| over all pixels and channels
  double adversarial = 0.0;    // generator's softplus(-D(completed))
  double discriminator = 0.0;  // softplus(-D(real)) + softplus(D(completed))
};

namespace detail {

template <class T>
diff::Var<T> mean_softplus(diff::Var<T> logits, T sign) {
  return diff::mean(diff::softplus(diff::scale(logits, sign)));
}

// One logistic step on D: `real` labelled 1, `fake` labelled 0.
inline double discriminator_step(CompletionNet& net, const diff::Tensor<float>& real, const diff::Tensor<float>& fake,
                                 diff::AdamState<float>& adam, float lr) {
  diff::Tape<float> tape;
  std::vector<diff::Var<float>> ordered;
  const auto vars = bind_net(tape, net.discriminator, true, &ordered);
  auto loss = diff::add(mean_softplus(discriminator_forward(net, vars, tape.constant(real)), -1.f),
                        mean_softplus(discriminator_forward(net, vars, tape.constant(fake)), 1.f));
  tape.backward(loss);
  diff::adam_step(net.discriminator, diff::gradients(tape, ordered), adam, lr);
  return loss.value().values[0];
}

}  // namespace detail

class CompletionTrainer {
 public:
  CompletionTrainer(std::vector<Image> dataset, const CompletionTrainConfig& config)
      : config_(config), dataset_(std::move(dataset)) {
    config_.validate();
    OMNISYNTH_REQUIRE(!dataset_.empty(), "completion training needs at least one panorama");
    for (const auto& img : dataset_) {
      require_network_size(img.width, img.height);
      OMNISYNTH_REQUIRE(img.width == dataset_.front().width, "training panoramas must share one size");
    }
    net_ = CompletionNet::initialize(config_.net, config_.seed);
    adam_g_.beta1 = adam_d_.beta1 = static_cast<float>(config_.beta1);
  }

  CompletionLoss step() {
    using namespace diff;
    Rng rng = Rng(config_.seed).fork(iteration_);
    const int w = dataset_.front().width, h = dataset_.front().height;
    std::vector<Tensor<float>> inputs, truths, holes;
    for (int b = 0; b < config_.batch; ++b) {
      const Image& img = dataset_[rng.uniform_int(dataset_.size())];
      const Mask mask = random_mask(w, h, rng, rng.uniform(config_.coverage_min, config_.coverage_max));
      inputs.push_back(masked_input_tensor<float>(img, mask));
      truths.push_back(image_tensor<float>(img));
      Tensor<float> hole(Shape{1, 1, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
      for (std::size_t i = 0; i < mask.pixel_count(); ++i) hole.values[i] = mask.observed[i] ? 0.f : 1.f;
      holes.push_back(std::move(hole));
    }
    const Tensor<float> input = stack_batch(inputs), truth = stack_batch(truths), hole = stack_batch(holes);
    Tensor<float> kept = truth;  // observed colour, zero in holes
    const std::size_t plane = static_cast<std::size_t>(w) * h;
    for (std::size_t n = 0; n < truth.shape[0]; ++n)
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < plane; ++i) kept.values[(n * 3 + c) * plane + i] *= 1.f - hole.values[n * plane + i];

    CompletionLoss rec;
    rec.iteration = iteration_;
    const float lr = static_cast<float>(
        diff::lr_schedule(std::min<std::uint64_t>(iteration_, static_cast<std::uint64_t>(config_.iterations)),
                          static_cast<std::uint64_t>(std::max(1, config_.iterations)), config_.lr, config_.lr_end));
    Tensor<float> completed;
    {
      Tape<float> tape;
      std::vector<Var<float>> ordered;
      const auto gvars = bind_net(tape, net_.generator, true, &ordered);
      const auto dvars = bind_net(tape, net_.discriminator, false);
      Var<float> out = generator_forward(net_, gvars, tape.constant(input));
      Var<float> comp = add(tape.constant(kept), mul(out, tape.constant(hole)));
      Var<float> l1 = mean(abs(sub(out, tape.constant(truth))));
      Var<float> adv = detail::mean_softplus(discriminator_forward(net_, dvars, comp), -1.f);
      Var<float> loss = add(scale(l1, static_cast<float>(config_.lambda_l1)), scale(adv, static_cast<float>(config_.adv_weight)));
      tape.backward(loss);
      adam_step(net_.generator, gradients(tape, ordered), adam_g_, lr);
      rec.l1 = l1.value().values[0];
      rec.adversarial = adv.value().values[0];
      completed = comp.value();
    }
    rec.discriminator = detail::discriminator_step(net_, truth, completed, adam_d_, lr);
    net_.discriminator_trained = true;
    ++iteration_;
    return rec;
  }

  std::uint64_t iteration() const { return iteration_; }
  const CompletionNet& net() const { return net_; }
  CompletionNet release() { return std::move(net_); }

 private:
  CompletionTrainConfig config_;
  std::vector<Image> dataset_;
  CompletionNet net_;
  diff::AdamState<float> adam_g_, adam_d_;
  std::uint64_t iteration_ = 0;
};

inline CompletionNet train_completion(std::vector<Image> dataset, const CompletionTrainConfig& config,
                                      std::vector<CompletionLoss>* history = nullptr) {
  CompletionTrainer trainer(std::move(dataset), config);
  for (int i = 0; i < config.iterations; ++i) {
    const CompletionLoss rec = trainer.step();
    if (history) history->push_back(rec);
  }
  return trainer.release();
}

/// Logistic updates of D alone, real images labelled 1 and fake ones 0.
class DiscriminatorTrainer {
 public:
  explicit DiscriminatorTrainer(CompletionNet& net, double lr = 1e-4, double beta1 = 0.5) : net_(net), lr_(lr) {
    OMNISYNTH_REQUIRE(lr > 0.0, "discriminator learning rate must be positive");
    adam_.beta1 = static_cast<float>(beta1);
  }

  /// One step on a batch; returns the loss before the update.
  double step(const std::vector<Image>& real, const std::vector<Image>& fake) {
    OMNISYNTH_REQUIRE(!real.empty() && !fake.empty(), "discriminator training needs real and fake images");
    std::vector<diff::Tensor<float>> r, f;
    for (const auto& img : real) r.push_back(image_tensor<float>(img));
    for (const auto& img : fake) f.push_back(image_tensor<float>(img));
    const double loss = detail::discriminator_step(net_, stack_batch(r), stack_batch(f), adam_, static_cast<float>(lr_));
    net_.discriminator_trained = true;
    return loss;
  }

 private:
  CompletionNet& net_;
  double lr_;
  diff::AdamState<float> adam_;
};

}  // namespace omnisynth::completion
