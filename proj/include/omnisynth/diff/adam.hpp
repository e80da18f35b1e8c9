#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "omnisynth/diff/params.hpp"

namespace omnisynth::diff {

template <class T>
struct AdamState {
  std::vector<std::vector<T>> first;
  std::vector<std::vector<T>> second;
  std::uint64_t step = 0;
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

/// One bias-corrected Adam update in place.
template <class T>
void adam_step(ParameterSet<T>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state, T lr) {
  if (grads.size() != params.size()) throw InvalidArgument("adam_step: gradient count mismatch");
  if (state.first.empty()) {
    for (const auto& p : params) {
      state.first.emplace_back(p.value.size(), T(0));
      state.second.emplace_back(p.value.size(), T(0));
    }
  }
  if (state.first.size() != params.size()) throw InvalidArgument("adam_step: optimiser state mismatch");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (grads[i].size() != params[i].value.size() || state.first[i].size() != params[i].value.size())
      throw InvalidArgument("adam_step: shape mismatch for " + params[i].name);

  ++state.step;
  const T c1 = T(1) - static_cast<T>(std::pow(static_cast<double>(state.beta1), static_cast<double>(state.step)));
  const T c2 = T(1) - static_cast<T>(std::pow(static_cast<double>(state.beta2), static_cast<double>(state.step)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].value.values;
    const auto& g = grads[i].values;
    auto& m = state.first[i];
    auto& v = state.second[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = state.beta1 * m[k] + (T(1) - state.beta1) * g[k];
      v[k] = state.beta2 * v[k] + (T(1) - state.beta2) * g[k] * g[k];
      const T mhat = m[k] / c1;
      const T vhat = v[k] / c2;
      p[k] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

/// Exponential decay from lr_start at step 0 to lr_end at total_steps.
inline double lr_schedule(std::uint64_t step, std::uint64_t total_steps, double lr_start, double lr_end) {
  if (!(lr_start > 0.0) || !(lr_end > 0.0)) throw InvalidArgument("learning rates must be positive");
  if (total_steps == 0) return lr_start;
  if (step > total_steps) throw InvalidArgument("lr_schedule: step beyond total_steps");
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_start * std::pow(lr_end / lr_start, frac);
}

}  // namespace omnisynth::diff
