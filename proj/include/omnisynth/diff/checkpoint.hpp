#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "omnisynth/diff/params.hpp"

namespace omnisynth::diff {

// Layout: "OSNF", u32 version, then for every tensor
//   u32 name length, name bytes, u32 rank, rank x u32 dims, float32 values.
// All integers and floats little-endian.
inline constexpr char kCheckpointMagic[4] = {'O', 'S', 'N', 'F'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t x) {
  const unsigned char b[4] = {static_cast<unsigned char>(x), static_cast<unsigned char>(x >> 8),
                              static_cast<unsigned char>(x >> 16), static_cast<unsigned char>(x >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline bool get_u32(std::istream& is, std::uint32_t& x) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
  x = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

inline void put_f32(std::ostream& os, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(os, bits);
}

}  // namespace detail

inline void save_checkpoint(std::ostream& os, const ParameterSet<float>& params) {
  os.write(kCheckpointMagic, 4);
  detail::put_u32(os, kCheckpointVersion);
  for (const auto& p : params) {
    detail::put_u32(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    detail::put_u32(os, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape) detail::put_u32(os, static_cast<std::uint32_t>(d));
    for (float f : p.value.values) detail::put_f32(os, f);
  }
  if (!os) throw Error("checkpoint write failed");
}

inline ParameterSet<float> load_checkpoint(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw FormatError("not a checkpoint: bad magic");
  std::uint32_t version = 0;
  if (!detail::get_u32(is, version)) throw FormatError("checkpoint truncated in header");
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  ParameterSet<float> params;
  for (;;) {
    std::uint32_t name_len = 0;
    if (!detail::get_u32(is, name_len)) {
      if (is.gcount() == 0 && is.eof()) break;
      throw FormatError("checkpoint truncated at tensor header");
    }
    if (name_len > (1u << 16)) throw FormatError("checkpoint tensor name too long");
    std::string name(name_len, '\0');
    std::uint32_t rank = 0;
    if (!is.read(name.data(), name_len) || !detail::get_u32(is, rank) || rank > 8)
      throw FormatError("checkpoint truncated or corrupt in tensor '" + name + "'");
    Shape shape(rank);
    for (auto& d : shape) {
      std::uint32_t x = 0;
      if (!detail::get_u32(is, x)) throw FormatError("checkpoint truncated in dims of '" + name + "'");
      d = x;
    }
    Tensor<float> t(shape);
    for (auto& f : t.values) {
      std::uint32_t bits = 0;
      if (!detail::get_u32(is, bits)) throw FormatError("checkpoint truncated in values of '" + name + "'");
      std::memcpy(&f, &bits, 4);
    }
    params.add(std::move(name), std::move(t));
  }
  return params;
}

inline void save_checkpoint(const std::filesystem::path& path, const ParameterSet<float>& params) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  save_checkpoint(os, params);
}

inline ParameterSet<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  return load_checkpoint(is);
}

/// Copies checkpoint tensors into `target`, which must hold exactly the
/// same names and shapes.
inline void restore_parameters(ParameterSet<float>& target, const ParameterSet<float>& loaded) {
  if (loaded.size() != target.size())
    throw FormatError("checkpoint holds " + std::to_string(loaded.size()) + " tensors, model expects " +
                      std::to_string(target.size()));
  for (auto& p : target) {
    const auto* src = loaded.find(p.name);
    if (!src) throw FormatError("checkpoint is missing tensor '" + p.name + "'");
    if (src->value.shape != p.value.shape)
      throw FormatError("tensor '" + p.name + "' has shape " + shape_string(src->value.shape) + ", expected " +
                        shape_string(p.value.shape));
    p.value = src->value;
  }
}

}  // namespace omnisynth::diff
