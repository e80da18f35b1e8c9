#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <vector>

#include "omnisynth/diff/tape.hpp"

namespace omnisynth::diff {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

template <class T>
void require_same_tape(Var<T> a, Var<T> b) {
  if (a.tape != b.tape || a.tape == nullptr) throw InvalidArgument("operands live on different tapes");
}

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t da = i + a.size() >= r ? a[i + a.size() - r] : 1;
    const std::size_t db = i + b.size() >= r ? b[i + b.size() - r] : 1;
    if (da != db && da != 1 && db != 1)
      throw InvalidArgument("shapes " + shape_string(a) + " and " + shape_string(b) + " do not broadcast");
    out[i] = std::max(da, db);
  }
  return out;
}

// Element strides of `in` viewed at `out`'s rank; 0 on broadcast dims.
inline std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t stride = 1;
  for (std::size_t k = 0; k < in.size(); ++k) {
    const std::size_t i = in.size() - 1 - k;
    const std::size_t o = out.size() - 1 - k;
    strides[o] = in[i] == 1 ? 0 : stride;
    stride *= in[i];
  }
  return strides;
}

// Calls fn(out_index, a_index, b_index) over the broadcast output.
template <class Fn>
void for_each_broadcast(const Shape& a, const Shape& b, const Shape& out, Fn&& fn) {
  const std::size_t n = numel(out);
  if (a == out && b == out) {
    for (std::size_t i = 0; i < n; ++i) fn(i, i, i);
    return;
  }
  const std::size_t nb = numel(b);
  if (a == out && out.size() >= b.size() && std::equal(b.begin(), b.end(), out.end() - b.size())) {
    for (std::size_t i = 0; i < n; ++i) fn(i, i, i % nb);
    return;
  }
  const auto sa = broadcast_strides(a, out);
  const auto sb = broadcast_strides(b, out);
  const std::size_t r = out.size();
  std::vector<std::size_t> idx(r, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < n; ++i) {
    fn(i, ia, ib);
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      ia += sa[d];
      ib += sb[d];
      if (idx[d] < out[d]) break;
      ia -= sa[d] * out[d];
      ib -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

// Binary elementwise op with numpy-style broadcasting. `fwd(x, y)` gives the
// value, `dx(x, y, z)` and `dy(x, y, z)` the partials given output z.
template <class T, class F, class DX, class DY>
Var<T> binary(Op op, Var<T> a, Var<T> b, F fwd, DX dx, DY dy) {
  require_same_tape(a, b);
  Tape<T>& tape = *a.tape;
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  const Shape so = broadcast_shape(sa, sb);
  Tensor<T> out(so);
  const auto& va = a.value().values;
  const auto& vb = b.value().values;
  for_each_broadcast(sa, sb, so, [&](std::size_t i, std::size_t ia, std::size_t ib) {
    out.values[i] = fwd(va[ia], vb[ib]);
  });
  const std::size_t ida = a.id, idb = b.id;
  return tape.record(op, std::move(out), {ida, idb}, [=](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    const auto& xa = t.value(ida).values;
    const auto& xb = t.value(idb).values;
    const auto& z = t.value(self).values;
    const bool need_a = t.requires_grad(ida);
    const bool need_b = t.requires_grad(idb);
    Buffer<T>* ga = need_a ? &t.grad_buffer(ida) : nullptr;
    Buffer<T>* gb = need_b ? &t.grad_buffer(idb) : nullptr;
    for_each_broadcast(sa, sb, so, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      if (ga) (*ga)[ia] += g[i] * dx(xa[ia], xb[ib], z[i]);
      if (gb) (*gb)[ib] += g[i] * dy(xa[ia], xb[ib], z[i]);
    });
  });
}

// Unary elementwise op; `df(x, y)` is the derivative given input x, output y.
template <class T, class F, class DF>
Var<T> unary(Op op, Var<T> a, F f, DF df) {
  Tape<T>& tape = *a.tape;
  const auto& va = a.value();
  Tensor<T> out(va.shape);
  for (std::size_t i = 0; i < va.size(); ++i) out.values[i] = f(va.values[i]);
  const std::size_t ida = a.id;
  return tape.record(op, std::move(out), {ida}, [=](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    const auto& x = t.value(ida).values;
    const auto& y = t.value(self).values;
    auto& ga = t.grad_buffer(ida);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(x[i], y[i]);
  });
}

template <class T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <class T>
T stable_softplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace detail

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  return detail::binary(
      Op::Add, a, b, [](T x, T y) { return x + y; }, [](T, T, T) { return T(1); }, [](T, T, T) { return T(1); });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  return detail::binary(
      Op::Sub, a, b, [](T x, T y) { return x - y; }, [](T, T, T) { return T(1); }, [](T, T, T) { return T(-1); });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  return detail::binary(
      Op::Mul, a, b, [](T x, T y) { return x * y; }, [](T, T y, T) { return y; }, [](T x, T, T) { return x; });
}

template <class T>
Var<T> div(Var<T> a, Var<T> b) {
  return detail::binary(
      Op::Div, a, b, [](T x, T y) { return x / y; }, [](T, T y, T) { return T(1) / y; },
      [](T, T y, T z) { return -z / y; });
}

template <class T>
Var<T> scale(Var<T> a, T c) {
  return detail::unary(Op::Scale, a, [c](T x) { return c * x; }, [c](T, T) { return c; });
}

template <class T>
Var<T> add_scalar(Var<T> a, T c) {
  return detail::unary(Op::AddScalar, a, [c](T x) { return x + c; }, [](T, T) { return T(1); });
}

template <class T>
Var<T> relu(Var<T> a) {
  return detail::unary(
      Op::Relu, a, [](T x) { return x > T(0) ? x : T(0); }, [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <class T>
Var<T> leaky_relu(Var<T> a, T slope = T(0.2)) {
  return detail::unary(
      Op::LeakyRelu, a, [slope](T x) { return x > T(0) ? x : slope * x; },
      [slope](T x, T) { return x > T(0) ? T(1) : slope; });
}

template <class T>
Var<T> sigmoid(Var<T> a) {
  return detail::unary(
      Op::Sigmoid, a, [](T x) { return detail::stable_sigmoid(x); }, [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Var<T> exp(Var<T> a) {
  return detail::unary(Op::Exp, a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <class T>
Var<T> log(Var<T> a) {
  return detail::unary(Op::Log, a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <class T>
Var<T> sin(Var<T> a) {
  return detail::unary(Op::Sin, a, [](T x) { return std::sin(x); }, [](T x, T) { return std::cos(x); });
}

template <class T>
Var<T> cos(Var<T> a) {
  return detail::unary(Op::Cos, a, [](T x) { return std::cos(x); }, [](T x, T) { return -std::sin(x); });
}

template <class T>
Var<T> abs(Var<T> a) {
  return detail::unary(
      Op::Abs, a, [](T x) { return std::abs(x); },
      [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

/// log(1 + e^x), evaluated stably.
template <class T>
Var<T> softplus(Var<T> a) {
  return detail::unary(
      Op::Softplus, a, [](T x) { return detail::stable_softplus(x); },
      [](T x, T) { return detail::stable_sigmoid(x); });
}

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  detail::require_same_tape(a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0])
    throw InvalidArgument("matmul shape mismatch " + shape_string(sa) + " x " + shape_string(sb));
  const auto m = static_cast<Eigen::Index>(sa[0]);
  const auto k = static_cast<Eigen::Index>(sa[1]);
  const auto n = static_cast<Eigen::Index>(sb[1]);
  Tensor<T> out(Shape{sa[0], sb[1]});
  detail::MapMat<T>(out.data(), m, n).noalias() =
      detail::ConstMapMat<T>(a.value().data(), m, k) * detail::ConstMapMat<T>(b.value().data(), k, n);
  const std::size_t ida = a.id, idb = b.id;
  return a.tape->record(Op::MatMul, std::move(out), {ida, idb}, [=](Tape<T>& t, std::size_t self) {
    detail::ConstMapMat<T> g(t.grad_of(self).data(), m, n);
    if (t.requires_grad(ida)) {
      detail::MapMat<T> ga(t.grad_buffer(ida).data(), m, k);
      ga.noalias() += g * detail::ConstMapMat<T>(t.value(idb).data(), k, n).transpose();
    }
    if (t.requires_grad(idb)) {
      detail::MapMat<T> gb(t.grad_buffer(idb).data(), k, n);
      gb.noalias() += detail::ConstMapMat<T>(t.value(ida).data(), m, k).transpose() * g;
    }
  });
}

/// Sum of all elements, as a scalar.
template <class T>
Var<T> sum(Var<T> a) {
  T s = T(0);
  for (const T& x : a.value().values) s += x;
  const std::size_t ida = a.id;
  return a.tape->record(Op::Sum, Tensor<T>::scalar(s), {ida}, [=](Tape<T>& t, std::size_t self) {
    const T g = t.grad_of(self)[0];
    for (auto& x : t.grad_buffer(ida)) x += g;
  });
}

template <class T>
Var<T> mean(Var<T> a) {
  const std::size_t n = a.size();
  if (n == 0) throw InvalidArgument("mean of an empty tensor");
  T s = T(0);
  for (const T& x : a.value().values) s += x;
  const std::size_t ida = a.id;
  return a.tape->record(Op::Mean, Tensor<T>::scalar(s / T(n)), {ida}, [=](Tape<T>& t, std::size_t self) {
    const T g = t.grad_of(self)[0] / T(n);
    for (auto& x : t.grad_buffer(ida)) x += g;
  });
}

/// Sums out one axis (the axis is removed from the shape).
template <class T>
Var<T> sum_axis(Var<T> a, std::size_t axis) {
  const Shape& s = a.shape();
  if (axis >= s.size()) throw InvalidArgument("sum_axis: axis out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  Shape os = s;
  os.erase(os.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor<T> out(os);
  const auto& v = a.value().values;
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t l = 0; l < len; ++l)
      for (std::size_t i = 0; i < inner; ++i) out.values[o * inner + i] += v[(o * len + l) * inner + i];
  const std::size_t ida = a.id;
  return a.tape->record(Op::SumAxis, std::move(out), {ida}, [=](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    auto& ga = t.grad_buffer(ida);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t l = 0; l < len; ++l)
        for (std::size_t i = 0; i < inner; ++i) ga[(o * len + l) * inner + i] += g[o * inner + i];
  });
}

template <class T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw InvalidArgument("concat of nothing");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw InvalidArgument("concat: axis out of range");
  Shape os = first;
  os[axis] = 0;
  for (const auto& p : parts) {
    detail::require_same_tape(parts[0], p);
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw InvalidArgument("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != axis && s[i] != first[i])
        throw InvalidArgument("concat: shape mismatch " + shape_string(s) + " vs " + shape_string(first));
    os[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  Tensor<T> out(os);
  std::vector<std::size_t> ids, widths;
  std::size_t offset = 0;
  const std::size_t out_row = os[axis] * inner;
  for (const auto& p : parts) {
    const std::size_t w = p.shape()[axis] * inner;
    const auto& v = p.value().values;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(o * w), w,
                  out.values.begin() + static_cast<std::ptrdiff_t>(o * out_row + offset));
    ids.push_back(p.id);
    widths.push_back(w);
    offset += w;
  }
  return parts[0].tape->record(Op::Concat, std::move(out), ids, [=](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::size_t w = widths[k];
      if (t.requires_grad(ids[k])) {
        auto& gp = t.grad_buffer(ids[k]);
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < w; ++i) gp[o * w + i] += g[o * out_row + off + i];
      }
      off += w;
    }
  });
}

/// Elements [begin, end) along `axis`.
template <class T>
Var<T> slice(Var<T> a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& s = a.shape();
  if (axis >= s.size() || begin >= end || end > s[axis]) throw InvalidArgument("slice: bad range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  Shape os = s;
  os[axis] = end - begin;
  const std::size_t in_row = s[axis] * inner;
  const std::size_t w = (end - begin) * inner;
  const std::size_t off = begin * inner;
  Tensor<T> out(os);
  const auto& v = a.value().values;
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(o * in_row + off), w,
                out.values.begin() + static_cast<std::ptrdiff_t>(o * w));
  const std::size_t ida = a.id;
  return a.tape->record(Op::Slice, std::move(out), {ida}, [=](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    auto& ga = t.grad_buffer(ida);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < w; ++i) ga[o * in_row + off + i] += g[o * w + i];
  });
}

template <class T>
Var<T> reshape(Var<T> a, Shape shape) {
  if (numel(shape) != a.size())
    throw InvalidArgument("reshape " + shape_string(a.shape()) + " -> " + shape_string(shape));
  Tensor<T> out(std::move(shape), a.value().values);
  const std::size_t ida = a.id;
  return a.tape->record(Op::Reshape, std::move(out), {ida}, [=](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    auto& ga = t.grad_buffer(ida);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

template <class T>
Var<T> transpose(Var<T> a) {
  const Shape& s = a.shape();
  if (s.size() != 2) throw InvalidArgument("transpose expects a matrix");
  const auto r = static_cast<Eigen::Index>(s[0]);
  const auto c = static_cast<Eigen::Index>(s[1]);
  Tensor<T> out(Shape{s[1], s[0]});
  detail::MapMat<T>(out.data(), c, r) = detail::ConstMapMat<T>(a.value().data(), r, c).transpose();
  const std::size_t ida = a.id;
  return a.tape->record(Op::Transpose, std::move(out), {ida}, [=](Tape<T>& t, std::size_t self) {
    detail::MapMat<T>(t.grad_buffer(ida).data(), r, c) += detail::ConstMapMat<T>(t.grad_of(self).data(), c, r).transpose();
  });
}

/// Softmax over the last axis.
template <class T>
Var<T> softmax(Var<T> a) {
  const Shape& s = a.shape();
  if (s.empty()) throw InvalidArgument("softmax needs rank >= 1");
  const std::size_t len = s.back();
  const std::size_t rows = a.size() / len;
  Tensor<T> out(s);
  const auto& v = a.value().values;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = v.data() + r * len;
    T* y = out.data() + r * len;
    const T mx = *std::max_element(x, x + len);
    T z = T(0);
    for (std::size_t i = 0; i < len; ++i) z += (y[i] = std::exp(x[i] - mx));
    for (std::size_t i = 0; i < len; ++i) y[i] /= z;
  }
  const std::size_t ida = a.id;
  return a.tape->record(Op::Softmax, std::move(out), {ida}, [=](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    const auto& y = t.value(self).values;
    auto& ga = t.grad_buffer(ida);
    for (std::size_t r = 0; r < rows; ++r) {
      T dot = T(0);
      for (std::size_t i = 0; i < len; ++i) dot += g[r * len + i] * y[r * len + i];
      for (std::size_t i = 0; i < len; ++i) ga[r * len + i] += y[r * len + i] * (g[r * len + i] - dot);
    }
  });
}

enum class Activation { None, Relu, Sigmoid };

/// Fused act(x W + b) for x [M, K], W [K, N], b [N].
template <class T>
Var<T> dense(Var<T> x, Var<T> w, Var<T> b, Activation act = Activation::None) {
  detail::require_same_tape(x, w);
  detail::require_same_tape(x, b);
  const Shape& sx = x.shape();
  const Shape& sw = w.shape();
  if (sx.size() != 2 || sw.size() != 2 || sx[1] != sw[0] || b.shape() != Shape{sw[1]})
    throw InvalidArgument("dense shape mismatch " + shape_string(sx) + " x " + shape_string(sw) + " + " +
                          shape_string(b.shape()));
  const auto m = static_cast<Eigen::Index>(sx[0]);
  const auto k = static_cast<Eigen::Index>(sx[1]);
  const auto n = static_cast<Eigen::Index>(sw[1]);
  using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;
  Tensor<T> out;
  out.shape = Shape{sx[0], sw[1]};
  out.values.resize(numel(out.shape));
  detail::MapMat<T> y(out.data(), m, n);
  y.noalias() = detail::ConstMapMat<T>(x.value().data(), m, k) * detail::ConstMapMat<T>(w.value().data(), k, n);
  y.rowwise() += Eigen::Map<const RowVec>(b.value().data(), n);
  if (act == Activation::Relu) y = y.cwiseMax(T(0));
  if (act == Activation::Sigmoid)
    for (auto& v : out.values) v = detail::stable_sigmoid(v);
  const std::size_t idx = x.id, idw = w.id, idb = b.id;
  return x.tape->record(Op::Dense, std::move(out), {idx, idw, idb}, [=](Tape<T>& t, std::size_t self) {
    detail::ConstMapMat<T> yv(t.value(self).data(), m, n);
    detail::ConstMapMat<T> g(t.grad_of(self).data(), m, n);
    detail::RowMat<T> gp;
    switch (act) {
      case Activation::None: gp = g; break;
      case Activation::Relu: gp = (yv.array() > T(0)).select(g, T(0)); break;
      case Activation::Sigmoid: gp = g.array() * yv.array() * (T(1) - yv.array()); break;
    }
    if (t.requires_grad(idx))
      detail::MapMat<T>(t.grad_buffer(idx).data(), m, k).noalias() +=
          gp * detail::ConstMapMat<T>(t.value(idw).data(), k, n).transpose();
    if (t.requires_grad(idw))
      detail::MapMat<T>(t.grad_buffer(idw).data(), k, n).noalias() +=
          detail::ConstMapMat<T>(t.value(idx).data(), m, k).transpose() * gp;
    if (t.requires_grad(idb)) Eigen::Map<RowVec>(t.grad_buffer(idb).data(), n) += gp.colwise().sum();
  });
}

}  // namespace omnisynth::diff
