#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "omnisynth/completion/mask.hpp"
#include "omnisynth/diff/checkpoint.hpp"
#include "omnisynth/diff/conv.hpp"
#include "omnisynth/diff/params.hpp"

namespace omnisynth::completion {

/// Channel schedule and shift fraction of the encoder F, decoder G and
/// discriminator D. Channel counts double per down-sampling from `base`,
/// capped at `cap`.
struct NetConfig {
  int base = 16;
  int cap = 64;
  double shift_fraction = 0.375;
  float leak = 0.2f;

  // Feature widths c0..c4 after F's five blocks.
  std::size_t channels(int level) const {
    return static_cast<std::size_t>(std::min(cap, base << level));
  }

  void validate() const;
};

inline nlohmann::json to_json(const NetConfig& c) {
  return {{"base", c.base}, {"cap", c.cap}, {"shift_fraction", c.shift_fraction}, {"leak", c.leak}};
}

inline NetConfig net_config_from_json(const nlohmann::json& j) {
  NetConfig c;
  c.base = j.value("base", c.base);
  c.cap = j.value("cap", c.cap);
  c.shift_fraction = j.value("shift_fraction", c.shift_fraction);
  c.leak = j.value("leak", c.leak);
  c.validate();
  return c;
}

// ---- cyclic channel shift ------------------------------------------------

/// Horizontal shift per channel: the first floor(C*fraction) channels split
/// into three equal groups rolled by W/4, W/2 and 3W/4 columns, i.e. yaw
/// rotations of 90, 180 and 270 degrees. Remaining channels are not moved.
inline std::vector<int> cyclic_shift_plan(std::size_t channels, std::size_t width, double fraction) {
  OMNISYNTH_REQUIRE(fraction >= 0.0 && fraction <= 1.0, "shift fraction must lie in [0, 1]");
  const auto shifted = static_cast<std::size_t>(std::floor(static_cast<double>(channels) * fraction + 1e-9));
  OMNISYNTH_REQUIRE(shifted % 3 == 0, "shifted channel count must split into three equal groups");
  std::vector<int> plan(channels, 0);
  if (shifted == 0) return plan;
  OMNISYNTH_REQUIRE(width % 4 == 0, "cyclic shift needs a width divisible by 4");
  const std::size_t g = shifted / 3;
  for (std::size_t i = 0; i < g; ++i) {
    plan[i] = static_cast<int>(width / 4);
    plan[g + i] = static_cast<int>(width / 2);
    plan[2 * g + i] = static_cast<int>(3 * width / 4);
  }
  return plan;
}

/// Applies cyclic_shift_plan to an NCHW tensor.
template <class T>
diff::Var<T> cyclic_shift(diff::Var<T> x, double fraction) {
  OMNISYNTH_REQUIRE(x.shape().size() == 4, "cyclic_shift expects NCHW features");
  return diff::roll_channels(x, cyclic_shift_plan(x.shape()[1], x.shape()[3], fraction));
}

inline void NetConfig::validate() const {
  OMNISYNTH_REQUIRE(base >= 1 && cap >= base, "completion net needs 1 <= base <= cap");
  OMNISYNTH_REQUIRE(leak >= 0.f && leak < 1.f, "leak must lie in [0, 1)");
  for (int level = 0; level < 5; ++level) cyclic_shift_plan(channels(level), 4, shift_fraction);
}

// ---- residual blocks with circular padding --------------------------------

enum class BlockMode { Start, Normal, Down, Up };

struct BlockSpec {
  std::string name;
  BlockMode mode;
  std::size_t in, out;

  bool has_projection() const { return mode == BlockMode::Start || in != out; }
};

template <class T>
using VarMap = std::map<std::string, diff::Var<T>>;

template <class T>
VarMap<T> bind_net(diff::Tape<T>& tape, const diff::ParameterSet<T>& params, bool requires_grad,
                   std::vector<diff::Var<T>>* ordered = nullptr) {
  VarMap<T> m;
  for (const auto& p : params) {
    auto v = tape.leaf(p.value, requires_grad);
    m.emplace(p.name, v);
    if (ordered) ordered->push_back(v);
  }
  return m;
}

namespace detail {

template <class T>
diff::Var<T> get(const VarMap<T>& vars, const std::string& name) {
  auto it = vars.find(name);
  if (it == vars.end()) throw InvalidArgument("completion net is missing parameter " + name);
  return it->second;
}

template <class T>
diff::Var<T> conv(const VarMap<T>& vars, const std::string& name, diff::Var<T> x) {
  return diff::conv2d_circular(x, get(vars, name + ".weight"), std::optional<diff::Var<T>>(get(vars, name + ".bias")));
}

inline void add_conv(diff::ParameterSet<float>& params, const std::string& name, std::size_t in, std::size_t out,
                     std::size_t k, Rng& rng) {
  params.add(name + ".weight", diff::glorot_uniform<float>({out, in, k, k}, in * k * k, out * k * k, rng));
  params.add(name + ".bias", diff::Tensor<float>({out}, 0.f));
}

}  // namespace detail

/// Parameters of one residual block: conv1 (3x3, in->out), conv2 (3x3,
/// out->out) and, when shapes differ or at the start, a 1x1 projection.
inline void add_block(diff::ParameterSet<float>& params, const BlockSpec& b, Rng& rng) {
  detail::add_conv(params, b.name + ".conv1", b.in, b.out, 3, rng);
  detail::add_conv(params, b.name + ".conv2", b.out, b.out, 3, rng);
  if (b.has_projection()) detail::add_conv(params, b.name + ".skip", b.in, b.out, 1, rng);
}

/// Residual block with horizontally circular padding. Down halves H and W
/// after the convolutions, Up doubles them before; Start omits the leading
/// activation. The cyclic channel shift sits between the two convolutions
/// whenever the feature width is divisible by 4.
template <class T>
diff::Var<T> rbcp_forward(const VarMap<T>& vars, const BlockSpec& b, diff::Var<T> x, double shift_fraction, T leak) {
  using namespace diff;
  const Shape& s = x.shape();
  if (s.size() != 4 || s[1] != b.in)
    throw InvalidArgument("block " + b.name + " expects " + std::to_string(b.in) + " channels, got " + shape_string(s));
  Var<T> h = x;
  if (b.mode != BlockMode::Start) h = leaky_relu(h, leak);
  if (b.mode == BlockMode::Up) h = upsample2(h);
  h = leaky_relu(detail::conv(vars, b.name + ".conv1", h), leak);
  if (h.shape()[3] % 4 == 0) h = cyclic_shift(h, shift_fraction);
  h = detail::conv(vars, b.name + ".conv2", h);
  if (b.mode == BlockMode::Down) h = avg_pool2(h);

  Var<T> skip = x;
  if (b.mode == BlockMode::Up) skip = upsample2(skip);
  if (b.has_projection()) skip = detail::conv(vars, b.name + ".skip", skip);
  if (b.mode == BlockMode::Down) skip = avg_pool2(skip);
  return add(h, skip);
}

// ---- self-attention --------------------------------------------------------

inline std::size_t attention_key_dim(std::size_t c) { return std::max<std::size_t>(1, c / 8); }

inline void add_attention(diff::ParameterSet<float>& params, const std::string& name, std::size_t c, Rng& rng) {
  const std::size_t k = attention_key_dim(c);
  params.add(name + ".query.weight", diff::glorot_uniform<float>({k, c}, c, k, rng));
  params.add(name + ".query.bias", diff::Tensor<float>({k, 1}, 0.f));
  params.add(name + ".key.weight", diff::glorot_uniform<float>({k, c}, c, k, rng));
  params.add(name + ".key.bias", diff::Tensor<float>({k, 1}, 0.f));
  params.add(name + ".value.weight", diff::glorot_uniform<float>({c, c}, c, c, rng));
  params.add(name + ".value.bias", diff::Tensor<float>({c, 1}, 0.f));
  params.add(name + ".gamma", diff::Tensor<float>({1}, 0.f));
}

/// Single-head dot-product attention over all spatial positions with a
/// learned residual gain (zero at initialisation).
template <class T>
diff::Var<T> attention_forward(const VarMap<T>& vars, const std::string& name, diff::Var<T> x) {
  using namespace diff;
  const Shape s = x.shape();
  const std::size_t N = s[0], C = s[1], P = s[2] * s[3];
  auto proj = [&](const std::string& which, Var<T> xn) {
    return add(matmul(detail::get(vars, name + "." + which + ".weight"), xn),
               detail::get(vars, name + "." + which + ".bias"));
  };
  std::vector<Var<T>> parts;
  for (std::size_t n = 0; n < N; ++n) {
    Var<T> xn = reshape(slice(x, 0, n, n + 1), Shape{C, P});
    Var<T> attn = softmax(matmul(transpose(proj("query", xn)), proj("key", xn)));  // [P, P]
    Var<T> o = matmul(proj("value", xn), transpose(attn));                           // [C, P]
    parts.push_back(reshape(add(xn, mul(detail::get(vars, name + ".gamma"), o)), Shape{1, C, s[2], s[3]}));
  }
  return N == 1 ? parts.front() : concat(parts, 0);
}

// ---- the completion network -------------------------------------------------

/// Encoder F, decoder G and global discriminator D.
///
/// F: RBCP(s) then four RBCP(d); f_e is the third block's output and f_l the
/// fifth. G: two RBCP(u), self-attention, concatenation with f_e, three
/// RBCP(u), then 2x2 average pooling back to input resolution and a 3x3
/// colour head. D: RBCP(s), two RBCP(d), self-attention, two RBCP(d),
/// RBCP(n), four RBCP(d) and a linear head on the spatial mean. Down-sampling
/// stops shrinking an axis once it reaches 1.
struct CompletionNet {
  NetConfig config;
  diff::ParameterSet<float> generator;      // F and G
  diff::ParameterSet<float> discriminator;  // D
  bool discriminator_trained = false;

  std::vector<BlockSpec> encoder_blocks() const {
    const auto c = [&](int l) { return config.channels(l); };
    return {{"F.0", BlockMode::Start, 4, c(0)},
            {"F.1", BlockMode::Down, c(0), c(1)},
            {"F.2", BlockMode::Down, c(1), c(2)},
            {"F.3", BlockMode::Down, c(2), c(3)},
            {"F.4", BlockMode::Down, c(3), c(4)}};
  }

  std::vector<BlockSpec> decoder_blocks() const {
    const auto c = [&](int l) { return config.channels(l); };
    return {{"G.0", BlockMode::Up, c(4), c(3)},
            {"G.1", BlockMode::Up, c(3), c(2)},
            {"G.2", BlockMode::Up, 2 * c(2), c(1)},
            {"G.3", BlockMode::Up, c(1), c(0)},
            {"G.4", BlockMode::Up, c(0), c(0)}};
  }

  std::vector<BlockSpec> discriminator_blocks() const {
    const auto c = [&](int l) { return config.channels(l); };
    std::vector<BlockSpec> b{{"D.0", BlockMode::Start, 3, c(0)},
                             {"D.1", BlockMode::Down, c(0), c(1)},
                             {"D.2", BlockMode::Down, c(1), c(2)},
                             {"D.3", BlockMode::Down, c(2), c(3)},
                             {"D.4", BlockMode::Down, c(3), c(4)},
                             {"D.5", BlockMode::Normal, c(4), c(4)}};
    for (int i = 6; i < 10; ++i) b.push_back({"D." + std::to_string(i), BlockMode::Down, c(4), c(4)});
    return b;
  }

  static CompletionNet initialize(const NetConfig& config, std::uint64_t seed) {
    config.validate();
    CompletionNet net;
    net.config = config;
    Rng rng(seed);
    for (const auto& b : net.encoder_blocks()) add_block(net.generator, b, rng);
    const auto dec = net.decoder_blocks();
    add_block(net.generator, dec[0], rng);
    add_block(net.generator, dec[1], rng);
    add_attention(net.generator, "G.attn", config.channels(2), rng);
    for (std::size_t i = 2; i < dec.size(); ++i) add_block(net.generator, dec[i], rng);
    detail::add_conv(net.generator, "G.out", config.channels(0), 3, 3, rng);

    const auto disc = net.discriminator_blocks();
    for (std::size_t i = 0; i < disc.size(); ++i) {
      if (i == 3) add_attention(net.discriminator, "D.attn", config.channels(2), rng);
      add_block(net.discriminator, disc[i], rng);
    }
    net.discriminator.add("D.head.weight", diff::glorot_uniform<float>({config.channels(4), 1}, config.channels(4), 1, rng));
    net.discriminator.add("D.head.bias", diff::Tensor<float>({1}, 0.f));
    return net;
  }

  /// Zeroes D's linear head so every score is exactly 0.5.
  void zero_discriminator_head() {
    for (auto& p : discriminator)
      if (p.name.rfind("D.head.", 0) == 0) std::fill(p.value.values.begin(), p.value.values.end(), 0.f);
  }
};

/// Panorama sizes the network accepts: four exact halvings of both axes, and
/// a bottleneck width that still splits into quarter turns.
inline void require_network_size(int width, int height) {
  OMNISYNTH_REQUIRE(width == 2 * height && height % 16 == 0 && width % 64 == 0,
                    "completion network needs width = 2 * height with height divisible by 16 and width by 64");
}

/// F then G on masked colour plus mask channels [N, 4, H, W]; returns raw
/// colour predictions [N, 3, H, W] in (0, 1).
template <class T>
diff::Var<T> generator_forward(const CompletionNet& net, const VarMap<T>& vars, diff::Var<T> input) {
  using namespace diff;
  const Shape& s = input.shape();
  OMNISYNTH_REQUIRE(s.size() == 4 && s[1] == 4, "generator input must be [N, 4, H, W]");
  require_network_size(static_cast<int>(s[3]), static_cast<int>(s[2]));
  const double frac = net.config.shift_fraction;
  const T leak = static_cast<T>(net.config.leak);
  const auto enc = net.encoder_blocks();
  const auto dec = net.decoder_blocks();
  Var<T> h = input;
  Var<T> f_e = h;
  for (std::size_t i = 0; i < enc.size(); ++i) {
    h = rbcp_forward(vars, enc[i], h, frac, leak);
    if (i == 2) f_e = h;
  }
  h = rbcp_forward(vars, dec[0], h, frac, leak);
  h = rbcp_forward(vars, dec[1], h, frac, leak);
  h = attention_forward(vars, "G.attn", h);
  h = concat(std::vector<Var<T>>{h, f_e}, 1);
  for (std::size_t i = 2; i < dec.size(); ++i) h = rbcp_forward(vars, dec[i], h, frac, leak);
  h = avg_pool2(h);
  return sigmoid(detail::conv(vars, "G.out", leaky_relu(h, leak)));
}

/// D on colour images [N, 3, H, W]; returns logits [N, 1].
template <class T>
diff::Var<T> discriminator_forward(const CompletionNet& net, const VarMap<T>& vars, diff::Var<T> rgb) {
  using namespace diff;
  const Shape& s = rgb.shape();
  OMNISYNTH_REQUIRE(s.size() == 4 && s[1] == 3, "discriminator input must be [N, 3, H, W]");
  const double frac = net.config.shift_fraction;
  const T leak = static_cast<T>(net.config.leak);
  const auto blocks = net.discriminator_blocks();
  Var<T> h = rgb;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i == 3) h = attention_forward(vars, "D.attn", h);
    h = rbcp_forward(vars, blocks[i], h, frac, leak);
  }
  const Shape hs = h.shape();
  const std::size_t P = hs[2] * hs[3];
  Var<T> pooled = scale(sum_axis(reshape(leaky_relu(h, leak), Shape{hs[0], hs[1], P}), 2), T(1) / static_cast<T>(P));
  return dense(pooled, detail::get(vars, "D.head.weight"), detail::get(vars, "D.head.bias"));
}

// ---- tensor conversion --------------------------------------------------------

/// Colour planes of an image as [1, 3, H, W].
template <class T>
diff::Tensor<T> image_tensor(const Image& img) {
  diff::Tensor<T> t(diff::Shape{1, 3, static_cast<std::size_t>(img.height), static_cast<std::size_t>(img.width)});
  const std::size_t n = img.pixel_count();
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) t.values[c * n + i] = static_cast<T>(img.rgb[i][c]);
  return t;
}

/// Masked colour and mask as [1, 4, H, W]; missing colour is zero.
template <class T>
diff::Tensor<T> masked_input_tensor(const Image& img, const Mask& mask) {
  mask.require_matches(img.width, img.height);
  diff::Tensor<T> t(diff::Shape{1, 4, static_cast<std::size_t>(img.height), static_cast<std::size_t>(img.width)});
  const std::size_t n = img.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const bool obs = mask.observed[i] != 0;
    for (int c = 0; c < 3; ++c) t.values[c * n + i] = obs ? static_cast<T>(img.rgb[i][c]) : T(0);
    t.values[3 * n + i] = obs ? T(1) : T(0);
  }
  return t;
}

/// Stacks [1, C, H, W] tensors along the batch axis.
template <class T>
diff::Tensor<T> stack_batch(const std::vector<diff::Tensor<T>>& items) {
  OMNISYNTH_REQUIRE(!items.empty(), "cannot stack an empty batch");
  diff::Shape s = items.front().shape;
  s[0] = items.size();
  diff::Tensor<T> out(s);
  const std::size_t per = items.front().size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    OMNISYNTH_REQUIRE(items[i].shape == items.front().shape, "batch items differ in shape");
    std::copy(items[i].values.begin(), items[i].values.end(), out.values.begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return out;
}

/// Item `n` of a [N, 3, H, W] tensor as an image.
template <class T>
Image tensor_image(const diff::Tensor<T>& t, std::size_t n = 0) {
  OMNISYNTH_REQUIRE(t.shape.size() == 4 && t.shape[1] == 3 && n < t.shape[0], "expected [N, 3, H, W]");
  Image img(static_cast<int>(t.shape[3]), static_cast<int>(t.shape[2]));
  const std::size_t p = img.pixel_count();
  for (std::size_t i = 0; i < p; ++i)
    for (int c = 0; c < 3; ++c) img.rgb[i][c] = static_cast<float>(t.values[(n * 3 + c) * p + i]);
  return img;
}

// ---- inference ----------------------------------------------------------------

/// Observed pixels copied from `img`, missing pixels from the generator.
inline Image neural_fill(const CompletionNet& net, const Image& img, const Mask& mask) {
  diff::Tape<float> tape;
  const auto vars = bind_net(tape, net.generator, false);
  const auto out = generator_forward(net, vars, tape.constant(masked_input_tensor<float>(img, mask)));
  Image result = tensor_image(out.value());
  for (std::size_t i = 0; i < result.pixel_count(); ++i)
    if (mask.observed[i]) result.rgb[i] = img.rgb[i];
  return result;
}

/// D's logit for an image.
inline double discriminator_logit(const CompletionNet& net, const Image& img) {
  diff::Tape<float> tape;
  const auto vars = bind_net(tape, net.discriminator, false);
  return discriminator_forward(net, vars, tape.constant(image_tensor<float>(img))).value().values[0];
}

/// Sigmoid of D's logit: the probability D assigns to `img` being real.
inline double discriminator_score(const CompletionNet& net, const Image& img) {
  const double z = discriminator_logit(net, img);
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// ---- persistence ------------------------------------------------------------------

/// Writes <stem>.osnf (F, G and D parameters) and <stem>.json (config).
inline void save_completion_net(const std::filesystem::path& stem, const CompletionNet& net) {
  diff::ParameterSet<float> all;
  for (const auto& p : net.generator) all.add(p.name, p.value);
  for (const auto& p : net.discriminator) all.add(p.name, p.value);
  diff::save_checkpoint(std::filesystem::path(stem.string() + ".osnf"), all);
  std::ofstream os(stem.string() + ".json");
  if (!os) throw Error("cannot write " + stem.string() + ".json");
  os << nlohmann::json{{"config", to_json(net.config)}, {"discriminator_trained", net.discriminator_trained}}.dump(2)
     << "\n";
}

inline CompletionNet load_completion_net(const std::filesystem::path& stem) {
  std::ifstream is(stem.string() + ".json");
  if (!is) throw Error("cannot open " + stem.string() + ".json");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("completion net config: ") + e.what());
  }
  CompletionNet net = CompletionNet::initialize(net_config_from_json(j.at("config")), 0);
  net.discriminator_trained = j.value("discriminator_trained", false);
  const auto loaded = diff::load_checkpoint(std::filesystem::path(stem.string() + ".osnf"));
  diff::ParameterSet<float> gen, disc;
  for (const auto& p : loaded) (p.name.rfind("D.", 0) == 0 ? disc : gen).add(p.name, p.value);
  diff::restore_parameters(net.generator, gen);
  diff::restore_parameters(net.discriminator, disc);
  return net;
}

}  // namespace omnisynth::completion
