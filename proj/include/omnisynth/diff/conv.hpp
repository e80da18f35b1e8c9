#pragma once

#include <optional>
#include <vector>

#include "omnisynth/diff/ops.hpp"

namespace omnisynth::diff {

namespace detail {

inline std::size_t wrap_index(long x, long w) {
  long r = x % w;
  return static_cast<std::size_t>(r < 0 ? r + w : r);
}

struct ConvGeometry {
  std::size_t n, c, h, w, o, k;
  std::size_t rows() const { return c * k * k; }
  std::size_t cols() const { return h * w; }
};

// Columns of K x K neighbourhoods; rows wrap horizontally, zero outside
// vertically. A horizontal offset is copied as two contiguous runs.
template <class T>
void im2col(const T* img, const ConvGeometry& g, T* col) {
  const long r = static_cast<long>(g.k / 2);
  const long H = static_cast<long>(g.h), W = static_cast<long>(g.w);
  for (std::size_t c = 0; c < g.c; ++c)
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        T* dst = col + ((c * g.k + ky) * g.k + kx) * g.cols();
        const long dy = static_cast<long>(ky) - r;
        const std::size_t s = wrap_index(static_cast<long>(kx) - r, W);
        for (long y = 0; y < H; ++y) {
          T* d = dst + y * W;
          const long sy = y + dy;
          if (sy < 0 || sy >= H) {
            std::fill_n(d, W, T(0));
            continue;
          }
          const T* src = img + (c * g.h + static_cast<std::size_t>(sy)) * g.w;
          std::copy(src + s, src + W, d);
          std::copy(src, src + s, d + (W - static_cast<long>(s)));
        }
      }
}

template <class T>
void col2im_add(const T* col, const ConvGeometry& g, T* img) {
  const long r = static_cast<long>(g.k / 2);
  const long H = static_cast<long>(g.h), W = static_cast<long>(g.w);
  for (std::size_t c = 0; c < g.c; ++c)
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T* src = col + ((c * g.k + ky) * g.k + kx) * g.cols();
        const long dy = static_cast<long>(ky) - r;
        const std::size_t s = wrap_index(static_cast<long>(kx) - r, W);
        const std::size_t head = static_cast<std::size_t>(W) - s;
        for (long y = 0; y < H; ++y) {
          const long sy = y + dy;
          if (sy < 0 || sy >= H) continue;
          const T* a = src + y * W;
          T* dst = img + (c * g.h + static_cast<std::size_t>(sy)) * g.w;
          for (std::size_t x = 0; x < head; ++x) dst[s + x] += a[x];
          for (std::size_t x = 0; x < s; ++x) dst[x] += a[head + x];
        }
      }
}

}  // namespace detail

/// Stride-1 "same" convolution on NCHW tensors with circular padding along
/// the width (the panorama's longitude) and zero padding along the height.
template <class T>
Var<T> conv2d_circular(Var<T> x, Var<T> weight, std::optional<Var<T>> bias = std::nullopt) {
  detail::require_same_tape(x, weight);
  const Shape& sx = x.shape();
  const Shape& sw = weight.shape();
  if (sx.size() != 4 || sw.size() != 4 || sw[1] != sx[1] || sw[2] != sw[3] || sw[2] % 2 == 0)
    throw InvalidArgument("conv2d shape mismatch: input " + shape_string(sx) + ", weight " + shape_string(sw));
  const detail::ConvGeometry g{sx[0], sx[1], sx[2], sx[3], sw[0], sw[2]};
  if (bias) {
    detail::require_same_tape(x, *bias);
    if (bias->size() != g.o) throw InvalidArgument("conv2d bias size mismatch");
  }
  const auto rows = static_cast<Eigen::Index>(g.rows());
  const auto cols = static_cast<Eigen::Index>(g.cols());
  const auto outc = static_cast<Eigen::Index>(g.o);
  Tensor<T> out(Shape{g.n, g.o, g.h, g.w});
  Buffer<T> col(g.k == 1 ? 0 : g.rows() * g.cols());
  detail::ConstMapMat<T> wmat(weight.value().data(), outc, rows);
  const bool pointwise = g.k == 1;  // 1x1 kernels read the input directly
  for (std::size_t n = 0; n < g.n; ++n) {
    const T* xn = x.value().data() + n * g.c * g.h * g.w;
    if (!pointwise) detail::im2col(xn, g, col.data());
    detail::MapMat<T> o(out.data() + n * g.o * g.cols(), outc, cols);
    o.noalias() = wmat * detail::ConstMapMat<T>(pointwise ? xn : col.data(), rows, cols);
    if (bias) {
      const auto& b = bias->value().values;
      for (Eigen::Index r = 0; r < outc; ++r) o.row(r).array() += b[static_cast<std::size_t>(r)];
    }
  }
  std::vector<std::size_t> inputs{x.id, weight.id};
  if (bias) inputs.push_back(bias->id);
  const std::size_t idx = x.id, idw = weight.id;
  const std::optional<std::size_t> idb = bias ? std::optional<std::size_t>(bias->id) : std::nullopt;
  return x.tape->record(Op::Conv2dCircular, std::move(out), inputs, [=](Tape<T>& t, std::size_t self) {
    const auto& grad = t.grad_of(self);
    const bool pointwise = g.k == 1;
    Buffer<T> colbuf(pointwise ? 0 : g.rows() * g.cols());
    Buffer<T> dcol;
    const bool need_x = t.requires_grad(idx);
    const bool need_w = t.requires_grad(idw);
    const bool need_b = idb && t.requires_grad(*idb);
    detail::ConstMapMat<T> w(t.value(idw).data(), outc, rows);
    for (std::size_t n = 0; n < g.n; ++n) {
      detail::ConstMapMat<T> gn(grad.data() + n * g.o * g.cols(), outc, cols);
      if (need_w) {
        const T* xn = t.value(idx).data() + n * g.c * g.h * g.w;
        if (!pointwise) detail::im2col(xn, g, colbuf.data());
        detail::MapMat<T>(t.grad_buffer(idw).data(), outc, rows).noalias() +=
            gn * detail::ConstMapMat<T>(pointwise ? xn : colbuf.data(), rows, cols).transpose();
      }
      if (need_b) {
        auto& gb = t.grad_buffer(*idb);
        for (Eigen::Index r = 0; r < outc; ++r) gb[static_cast<std::size_t>(r)] += gn.row(r).sum();
      }
      if (need_x) {
        T* gx = t.grad_buffer(idx).data() + n * g.c * g.h * g.w;
        if (pointwise) {
          detail::MapMat<T>(gx, rows, cols).noalias() += w.transpose() * gn;
        } else {
          dcol.resize(g.rows() * g.cols());
          detail::MapMat<T>(dcol.data(), rows, cols).noalias() = w.transpose() * gn;
          detail::col2im_add(dcol.data(), g, gx);
        }
      }
    }
  });
}

/// 2x2 average pooling. A spatial axis of extent 1 is left as is.
template <class T>
Var<T> avg_pool2(Var<T> x) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw InvalidArgument("avg_pool2 expects NCHW");
  const std::size_t fy = s[2] >= 2 ? 2 : 1;
  const std::size_t fx = s[3] >= 2 ? 2 : 1;
  if (s[2] % fy != 0 || s[3] % fx != 0) throw InvalidArgument("avg_pool2 needs even spatial extents");
  const std::size_t planes = s[0] * s[1], H = s[2], W = s[3], h = H / fy, w = W / fx;
  const T inv = T(1) / T(fx * fy);
  Tensor<T> out(Shape{s[0], s[1], h, w});
  const auto& v = x.value().values;
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t xx = 0; xx < W; ++xx) out.values[(p * h + y / fy) * w + xx / fx] += v[(p * H + y) * W + xx] * inv;
  const std::size_t idx = x.id;
  return x.tape->record(Op::AvgPool2, std::move(out), {idx}, [=](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    auto& gx = t.grad_buffer(idx);
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t xx = 0; xx < W; ++xx) gx[(p * H + y) * W + xx] += g[(p * h + y / fy) * w + xx / fx] * inv;
  });
}

/// Nearest-neighbour 2x upsampling.
template <class T>
Var<T> upsample2(Var<T> x) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw InvalidArgument("upsample2 expects NCHW");
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3], H = 2 * h, W = 2 * w;
  Tensor<T> out(Shape{s[0], s[1], H, W});
  const auto& v = x.value().values;
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t xx = 0; xx < W; ++xx) out.values[(p * H + y) * W + xx] = v[(p * h + y / 2) * w + xx / 2];
  const std::size_t idx = x.id;
  return x.tape->record(Op::Upsample2, std::move(out), {idx}, [=](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    auto& gx = t.grad_buffer(idx);
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t xx = 0; xx < W; ++xx) gx[(p * h + y / 2) * w + xx / 2] += g[(p * H + y) * W + xx];
  });
}

/// Per-channel horizontal cyclic shift of an NCHW tensor: column x of channel
/// c moves to (x + shifts[c]) mod W.
template <class T>
Var<T> roll_channels(Var<T> x, const std::vector<int>& shifts) {
  const Shape& s = x.shape();
  if (s.size() != 4 || shifts.size() != s[1]) throw InvalidArgument("roll_channels: one shift per channel required");
  const std::size_t N = s[0], C = s[1], H = s[2], W = s[3];
  Tensor<T> out(s);
  const auto& v = x.value().values;
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < H; ++y) {
        const std::size_t row = ((n * C + c) * H + y) * W;
        for (std::size_t xx = 0; xx < W; ++xx)
          out.values[row + detail::wrap_index(static_cast<long>(xx) + shifts[c], static_cast<long>(W))] = v[row + xx];
      }
  const std::size_t idx = x.id;
  return x.tape->record(Op::RollChannels, std::move(out), {idx}, [=](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    auto& gx = t.grad_buffer(idx);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < H; ++y) {
          const std::size_t row = ((n * C + c) * H + y) * W;
          for (std::size_t xx = 0; xx < W; ++xx)
            gx[row + xx] += g[row + detail::wrap_index(static_cast<long>(xx) + shifts[c], static_cast<long>(W))];
        }
  });
}

}  // namespace omnisynth::diff
