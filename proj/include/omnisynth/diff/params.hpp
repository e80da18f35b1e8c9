#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "omnisynth/core/rng.hpp"
#include "omnisynth/diff/tape.hpp"

namespace omnisynth::diff {

template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
};

/// Ordered, named collection of trainable tensors.
template <class T>
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor<T> value) {
    for (const auto& p : params_)
      if (p.name == name) throw InvalidArgument("duplicate parameter name " + name);
    params_.push_back({std::move(name), std::move(value)});
    return params_.size() - 1;
  }

  std::size_t size() const { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return params_[i]; }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  const Parameter<T>* find(const std::string& name) const {
    for (const auto& p : params_)
      if (p.name == name) return &p;
    return nullptr;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  template <class U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& p : params_) out.add(p.name, p.value.template cast<U>());
    return out;
  }

 private:
  std::vector<Parameter<T>> params_;
};

/// Places every parameter on the tape as a leaf, in set order.
template <class T>
std::vector<Var<T>> bind(Tape<T>& tape, const ParameterSet<T>& params, bool requires_grad = true) {
  std::vector<Var<T>> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(tape.leaf(p.value, requires_grad));
  return vars;
}

template <class T>
std::vector<Tensor<T>> gradients(const Tape<T>& tape, const std::vector<Var<T>>& vars) {
  std::vector<Tensor<T>> out;
  out.reserve(vars.size());
  for (const auto& v : vars) out.push_back(tape.gradient(v));
  return out;
}

/// Uniform(-a, a) with a = gain * sqrt(6 / (fan_in + fan_out)).
template <class T>
Tensor<T> glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng, double gain = 1.0) {
  Tensor<T> t(std::move(shape));
  const double a = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& x : t.values) x = static_cast<T>(rng.uniform(-a, a));
  return t;
}

}  // namespace omnisynth::diff
