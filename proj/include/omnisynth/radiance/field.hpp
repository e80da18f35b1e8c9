#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "omnisynth/diff/checkpoint.hpp"
#include "omnisynth/diff/ops.hpp"
#include "omnisynth/diff/params.hpp"
#include "omnisynth/radiance/rays.hpp"

namespace omnisynth::radiance {

/// Architecture and ray bounds shared by the coarse and fine networks.
struct FieldConfig {
  int layers = 4;  // hidden layers before the density head
  int width = 64;
  int l_pos = 10;
  int l_dir = 4;
  double near = 0.02;
  double far = 4.0;

  void validate() const {
    OMNISYNTH_REQUIRE(layers >= 1 && width >= 2, "field needs at least one hidden layer of width >= 2");
    OMNISYNTH_REQUIRE(l_pos >= 0 && l_dir >= 0, "encoding frequency counts must be non-negative");
    OMNISYNTH_REQUIRE(std::isfinite(near) && std::isfinite(far) && 0.0 < near && near < far,
                      "field bounds need 0 < near < far");
  }

  std::size_t pos_dim() const { return encoded_size(3, l_pos); }
  std::size_t dir_dim() const { return encoded_size(3, l_dir); }
  // Layer that re-injects the encoded position; none for shallow nets.
  int skip_layer() const { return layers >= 8 ? layers / 2 + 1 : -1; }
};

inline nlohmann::json to_json(const FieldConfig& c) {
  return {{"layers", c.layers}, {"width", c.width}, {"l_pos", c.l_pos},
          {"l_dir", c.l_dir},   {"near", c.near},   {"far", c.far}};
}

inline FieldConfig field_config_from_json(const nlohmann::json& j) {
  FieldConfig c;
  c.layers = j.value("layers", c.layers);
  c.width = j.value("width", c.width);
  c.l_pos = j.value("l_pos", c.l_pos);
  c.l_dir = j.value("l_dir", c.l_dir);
  c.near = j.value("near", c.near);
  c.far = j.value("far", c.far);
  c.validate();
  return c;
}

/// Coarse and fine density/colour MLPs. Parameters are named
/// "<net>.<layer>.<weight|bias>" with net in {coarse, fine}.
struct RadianceField {
  FieldConfig config;
  diff::ParameterSet<float> params;

  static constexpr const char* kNets[2] = {"coarse", "fine"};

  static RadianceField initialize(const FieldConfig& config, std::uint64_t seed) {
    config.validate();
    RadianceField f;
    f.config = config;
    Rng rng(seed);
    const std::size_t W = config.width, H = config.width / 2;
    for (const char* net : kNets) {
      const std::string p = net;
      auto dense = [&](const std::string& name, std::size_t in, std::size_t out) {
        f.params.add(p + "." + name + ".weight", diff::glorot_uniform<float>({in, out}, in, out, rng));
        f.params.add(p + "." + name + ".bias", diff::Tensor<float>({out}, 0.f));
      };
      for (int l = 0; l < config.layers; ++l) {
        std::size_t in = l == 0 ? config.pos_dim() : W;
        if (l == config.skip_layer()) in += config.pos_dim();
        dense("layer" + std::to_string(l), in, W);
      }
      dense("sigma", W, 1);
      dense("feature", W, W);
      dense("view", W + config.dir_dim(), H);
      dense("rgb", H, 3);
    }
    return f;
  }

  /// Zeroes both density heads so every density is exactly 0.
  void zero_density_heads() {
    for (auto& p : params)
      if (p.name.find(".sigma.") != std::string::npos) std::fill(p.value.values.begin(), p.value.values.end(), 0.f);
  }
};

template <class T>
using VarMap = std::map<std::string, diff::Var<T>>;

template <class T>
VarMap<T> bind_field(diff::Tape<T>& tape, const diff::ParameterSet<T>& params, bool requires_grad,
                     std::vector<diff::Var<T>>* ordered = nullptr) {
  VarMap<T> m;
  for (const auto& p : params) {
    auto v = tape.leaf(p.value, requires_grad);
    m.emplace(p.name, v);
    if (ordered) ordered->push_back(v);
  }
  return m;
}

template <class T>
struct FieldOutput {
  diff::Var<T> sigma;  // [P, 1], >= 0
  diff::Var<T> color;  // [P, 3], in (0, 1)
};

/// Evaluates one network on encoded positions [P, pos_dim] and encoded
/// directions [P, dir_dim].
template <class T>
FieldOutput<T> field_forward(const FieldConfig& config, const VarMap<T>& vars, const std::string& net,
                             diff::Var<T> pos, diff::Var<T> dir) {
  using namespace diff;
  auto get = [&](const std::string& name) {
    auto it = vars.find(net + "." + name);
    if (it == vars.end()) throw InvalidArgument("field is missing parameter " + net + "." + name);
    return it->second;
  };
  auto layer = [&](Var<T> x, const std::string& name, Activation act) {
    return dense(x, get(name + ".weight"), get(name + ".bias"), act);
  };
  Var<T> h = pos;
  for (int l = 0; l < config.layers; ++l) {
    if (l == config.skip_layer()) h = concat<T>({h, pos}, 1);
    h = layer(h, "layer" + std::to_string(l), Activation::Relu);
  }
  FieldOutput<T> out;
  out.sigma = layer(h, "sigma", Activation::Relu);
  Var<T> feature = layer(h, "feature", Activation::None);
  Var<T> v = layer(concat<T>({feature, dir}, 1), "view", Activation::Relu);
  out.color = layer(v, "rgb", Activation::Sigmoid);
  return out;
}

/// Writes `<stem>.osnf` (parameters) and `<stem>.json` (architecture).
inline void save_field(const std::filesystem::path& stem, const RadianceField& field) {
  auto params_path = stem;
  params_path += ".osnf";
  auto config_path = stem;
  config_path += ".json";
  diff::save_checkpoint(params_path, field.params);
  std::ofstream os(config_path);
  if (!os) throw Error("cannot write " + config_path.string());
  os << to_json(field.config).dump(2) << '\n';
}

inline RadianceField load_field(const std::filesystem::path& stem) {
  auto params_path = stem;
  params_path += ".osnf";
  auto config_path = stem;
  config_path += ".json";
  std::ifstream is(config_path);
  if (!is) throw Error("cannot open field description " + config_path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("field description " + config_path.string() + " is not valid JSON");
  }
  RadianceField field = RadianceField::initialize(field_config_from_json(j), 0);
  diff::restore_parameters(field.params, diff::load_checkpoint(params_path));
  return field;
}

}  // namespace omnisynth::radiance
