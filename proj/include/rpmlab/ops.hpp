#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "rpmlab/rng.hpp"
#include "rpmlab/tensor.hpp"

namespace rpmlab {

enum class RunMode { Train, Eval };

namespace detail {

template <typename T>
inline void accumulate(std::vector<T>& dst, const std::vector<T>& src) {
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and linear algebra
// ---------------------------------------------------------------------------

// add supports identical shapes, plus the two bias patterns used by the
// networks: (N,M) + (M) and (N,C,H,W) + (C). The vector operand may appear on
// either side.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() == b.shape()) {
    std::vector<T> out(a.value());
    const auto& bv = b.value();
    for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    auto an = a.node(), bn = b.node();
    return detail::make_op<T>(
        "add", a.shape(), std::move(out), {an, bn}, [an, bn](detail::Node<T>& self) {
          if (an->requires_grad) {
            an->ensure_grad();
            detail::accumulate(an->grad, self.grad);
          }
          if (bn->requires_grad) {
            bn->ensure_grad();
            detail::accumulate(bn->grad, self.grad);
          }
        });
  }
  if (a.shape().size() == 1 && b.shape().size() > 1) return add(b, a);
  // broadcast: b is a per-channel vector
  bool row_bias = a.shape().size() == 2 && b.shape().size() == 1 && b.shape()[0] == a.shape()[1];
  bool chan_bias = a.shape().size() == 4 && b.shape().size() == 1 && b.shape()[0] == a.shape()[1];
  detail::require(row_bias || chan_bias,
                  "add: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  std::vector<T> out(a.value());
  const auto& bv = b.value();
  int64_t inner = chan_bias ? int64_t(a.shape()[2]) * a.shape()[3] : 1;
  int64_t channels = b.shape()[0];
  int64_t outer = a.numel() / (inner * channels);
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t c = 0; c < channels; ++c) {
      T bc = bv[c];
      T* dst = out.data() + (o * channels + c) * inner;
      for (int64_t i = 0; i < inner; ++i) dst[i] += bc;
    }
  auto an = a.node(), bn = b.node();
  return detail::make_op<T>(
      "add", a.shape(), std::move(out), {an, bn},
      [an, bn, outer, channels, inner](detail::Node<T>& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          detail::accumulate(an->grad, self.grad);
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (int64_t o = 0; o < outer; ++o)
            for (int64_t c = 0; c < channels; ++c) {
              const T* g = self.grad.data() + (o * channels + c) * inner;
              T acc = 0;
              for (int64_t i = 0; i < inner; ++i) acc += g[i];
              bn->grad[c] += acc;
            }
        }
      });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.shape() == b.shape(), "mul: incompatible shapes " + shape_str(a.shape()) +
                                              " and " + shape_str(b.shape()));
  std::vector<T> out(a.value());
  const auto& bv = b.value();
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  auto an = a.node(), bn = b.node();
  return detail::make_op<T>(
      "mul", a.shape(), std::move(out), {an, bn}, [an, bn](detail::Node<T>& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * bn->value[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i] * an->value[i];
        }
      });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, double c) {
  std::vector<T> out(a.value());
  for (auto& v : out) v = static_cast<T>(v * c);
  auto an = a.node();
  return detail::make_op<T>("scale", a.shape(), std::move(out), {an},
                            [an, c](detail::Node<T>& self) {
                              an->ensure_grad();
                              for (size_t i = 0; i < self.grad.size(); ++i)
                                an->grad[i] += static_cast<T>(self.grad[i] * c);
                            });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.shape().size() == 2 && b.shape().size() == 2 && a.shape()[1] == b.shape()[0],
                  "matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                      shape_str(b.shape()));
  const int n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  std::vector<T> out(static_cast<size_t>(n) * m, T(0));
  const T* A = a.value().data();
  const T* B = b.value().data();
  for (int i = 0; i < n; ++i)
    for (int kk = 0; kk < k; ++kk) {
      T av = A[i * k + kk];
      const T* brow = B + static_cast<size_t>(kk) * m;
      T* orow = out.data() + static_cast<size_t>(i) * m;
      for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  auto an = a.node(), bn = b.node();
  return detail::make_op<T>(
      "matmul", {n, m}, std::move(out), {an, bn}, [an, bn, n, k, m](detail::Node<T>& self) {
        const T* G = self.grad.data();
        if (an->requires_grad) {
          an->ensure_grad();
          // dA = G * B^T
          for (int i = 0; i < n; ++i)
            for (int kk = 0; kk < k; ++kk) {
              const T* grow = G + static_cast<size_t>(i) * m;
              const T* brow = bn->value.data() + static_cast<size_t>(kk) * m;
              T acc = 0;
              for (int j = 0; j < m; ++j) acc += grow[j] * brow[j];
              an->grad[i * k + kk] += acc;
            }
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          // dB = A^T * G
          for (int kk = 0; kk < k; ++kk)
            for (int i = 0; i < n; ++i) {
              T av = an->value[i * k + kk];
              const T* grow = G + static_cast<size_t>(i) * m;
              T* brow = bn->grad.data() + static_cast<size_t>(kk) * m;
              for (int j = 0; j < m; ++j) brow[j] += av * grow[j];
            }
        }
      });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  detail::require(shape_numel(shape) == a.numel(), "reshape: cannot view " +
                                                       shape_str(a.shape()) + " as " +
                                                       shape_str(shape));
  auto an = a.node();
  return detail::make_op<T>("reshape", std::move(shape), std::vector<T>(a.value()), {an},
                            [an](detail::Node<T>& self) {
                              an->ensure_grad();
                              detail::accumulate(an->grad, self.grad);
                            });
}

template <typename T>
Tensor<T> stack(const std::vector<Tensor<T>>& parts) {
  detail::require(!parts.empty(), "stack: empty input");
  const Shape& inner = parts[0].shape();
  for (const auto& p : parts)
    detail::require(p.shape() == inner, "stack: mismatched shapes " + shape_str(inner) + " and " +
                                            shape_str(p.shape()));
  Shape out_shape;
  out_shape.push_back(static_cast<int>(parts.size()));
  out_shape.insert(out_shape.end(), inner.begin(), inner.end());
  int64_t stride = shape_numel(inner);
  std::vector<T> out(static_cast<size_t>(stride) * parts.size());
  std::vector<typename Tensor<T>::NodePtr> nodes;
  for (size_t i = 0; i < parts.size(); ++i) {
    std::copy(parts[i].value().begin(), parts[i].value().end(), out.begin() + i * stride);
    nodes.push_back(parts[i].node());
  }
  auto parents = nodes;
  return detail::make_op<T>("stack", std::move(out_shape), std::move(out), std::move(parents),
                            [nodes, stride](detail::Node<T>& self) {
                              for (size_t i = 0; i < nodes.size(); ++i) {
                                if (!nodes[i]->requires_grad) continue;
                                nodes[i]->ensure_grad();
                                const T* g = self.grad.data() + i * stride;
                                for (int64_t j = 0; j < stride; ++j) nodes[i]->grad[j] += g[j];
                              }
                            });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T acc = 0;
  for (T v : a.value()) acc += v;
  auto an = a.node();
  return detail::make_op<T>("sum", {1}, std::vector<T>{acc}, {an}, [an](detail::Node<T>& self) {
    an->ensure_grad();
    T g = self.grad[0];
    for (auto& v : an->grad) v += g;
  });
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  std::vector<T> out(a.value());
  for (auto& v : out) v = v > T(0) ? v : T(0);
  auto an = a.node();
  return detail::make_op<T>("relu", a.shape(), std::move(out), {an},
                            [an](detail::Node<T>& self) {
                              an->ensure_grad();
                              // subgradient at 0 is 0
                              for (size_t i = 0; i < self.grad.size(); ++i)
                                if (an->value[i] > T(0)) an->grad[i] += self.grad[i];
                            });
}

template <typename T>
inline T stable_sigmoid(T x) {
  if (x >= T(0)) {
    T e = std::exp(-x);
    return T(1) / (T(1) + e);
  }
  T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  std::vector<T> out(a.value());
  for (auto& v : out) v = stable_sigmoid(v);
  auto an = a.node();
  auto saved = out;
  return detail::make_op<T>("sigmoid", a.shape(), std::move(out), {an},
                            [an, saved = std::move(saved)](detail::Node<T>& self) {
                              an->ensure_grad();
                              for (size_t i = 0; i < self.grad.size(); ++i) {
                                T s = saved[i];
                                an->grad[i] += self.grad[i] * s * (T(1) - s);
                              }
                            });
}

// Inverted dropout: train mode zeroes with probability p and scales survivors
// by 1/(1-p); eval mode returns the input tensor unchanged.
template <typename T>
Tensor<T> dropout(const Tensor<T>& a, double p, RunMode mode, Rng* rng) {
  detail::require(p >= 0.0 && p < 1.0, "dropout: p=" + std::to_string(p) + " outside [0,1)");
  if (mode == RunMode::Eval || p == 0.0) return a;
  detail::require(rng != nullptr, "dropout: train mode requires an rng");
  T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> mask(a.value().size());
  for (auto& m : mask) m = rng->uniform() < p ? T(0) : keep_scale;
  std::vector<T> out(a.value());
  for (size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  auto an = a.node();
  return detail::make_op<T>("dropout", a.shape(), std::move(out), {an},
                            [an, mask = std::move(mask)](detail::Node<T>& self) {
                              an->ensure_grad();
                              for (size_t i = 0; i < self.grad.size(); ++i)
                                an->grad[i] += self.grad[i] * mask[i];
                            });
}

// ---------------------------------------------------------------------------
// Convolution and pooling (NCHW)
// ---------------------------------------------------------------------------

namespace detail {

// ox range such that ix = ox*stride + k - pad lies in [0, iw)
inline void conv_x_range(int k, int pad, int stride, int iw, int ow, int& lo, int& hi) {
  int off = k - pad;
  lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
  int max_ix = iw - 1 - off;
  hi = max_ix < 0 ? -1 : std::min(ow - 1, max_ix / stride);
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 int stride = 1, int pad = 0) {
  detail::require(input.shape().size() == 4, "conv2d: input must be NCHW, got " +
                                                 shape_str(input.shape()));
  detail::require(kernel.shape().size() == 4, "conv2d: kernel must be OIHW, got " +
                                                  shape_str(kernel.shape()));
  const int n = input.shape()[0], ic = input.shape()[1], ih = input.shape()[2],
            iw = input.shape()[3];
  const int oc = kernel.shape()[0], kc = kernel.shape()[1], kh = kernel.shape()[2],
            kw = kernel.shape()[3];
  detail::require(ic == kc, "conv2d: input channels " + std::to_string(ic) +
                                " != kernel input channels " + std::to_string(kc));
  detail::require(bias.shape() == Shape{oc}, "conv2d: bias shape " + shape_str(bias.shape()) +
                                                 " != (" + std::to_string(oc) + ")");
  detail::require(stride >= 1, "conv2d: stride must be >= 1");
  detail::require(pad >= 0, "conv2d: padding must be >= 0");
  const int oh = (ih + 2 * pad - kh) / stride + 1;
  const int ow = (iw + 2 * pad - kw) / stride + 1;
  detail::require(oh >= 1 && ow >= 1, "conv2d: non-positive output size for input " +
                                          shape_str(input.shape()) + " kernel " +
                                          shape_str(kernel.shape()));

  std::vector<T> out(static_cast<size_t>(n) * oc * oh * ow);
  const T* X = input.value().data();
  const T* W = kernel.value().data();
  const T* B = bias.value().data();
  const int64_t in_plane = static_cast<int64_t>(ih) * iw;
  const int64_t out_plane = static_cast<int64_t>(oh) * ow;

#pragma omp parallel for collapse(2) schedule(static)
  for (int ni = 0; ni < n; ++ni)
    for (int o = 0; o < oc; ++o) {
      T* O = out.data() + (static_cast<int64_t>(ni) * oc + o) * out_plane;
      std::fill(O, O + out_plane, B[o]);
      for (int c = 0; c < ic; ++c) {
        const T* I = X + (static_cast<int64_t>(ni) * ic + c) * in_plane;
        const T* K = W + (static_cast<int64_t>(o) * ic + c) * kh * kw;
        for (int ky = 0; ky < kh; ++ky)
          for (int kx = 0; kx < kw; ++kx) {
            T wv = K[ky * kw + kx];
            int lo, hi;
            detail::conv_x_range(kx, pad, stride, iw, ow, lo, hi);
            for (int oy = 0; oy < oh; ++oy) {
              int iy = oy * stride + ky - pad;
              if (iy < 0 || iy >= ih) continue;
              const T* irow = I + static_cast<int64_t>(iy) * iw + (kx - pad);
              T* orow = O + static_cast<int64_t>(oy) * ow;
              for (int ox = lo; ox <= hi; ++ox) orow[ox] += wv * irow[ox * stride];
            }
          }
      }
    }

  auto xn = input.node(), wn = kernel.node(), bn = bias.node();
  return detail::make_op<T>(
      "conv2d", {n, oc, oh, ow}, std::move(out), {xn, wn, bn},
      [=](detail::Node<T>& self) {
        const T* G = self.grad.data();
        if (xn->requires_grad) {
          xn->ensure_grad();
          T* GX = xn->grad.data();
#pragma omp parallel for collapse(2) schedule(static)
          for (int ni = 0; ni < n; ++ni)
            for (int c = 0; c < ic; ++c) {
              T* gi = GX + (static_cast<int64_t>(ni) * ic + c) * in_plane;
              for (int o = 0; o < oc; ++o) {
                const T* go = G + (static_cast<int64_t>(ni) * oc + o) * out_plane;
                const T* K = wn->value.data() + (static_cast<int64_t>(o) * ic + c) * kh * kw;
                for (int ky = 0; ky < kh; ++ky)
                  for (int kx = 0; kx < kw; ++kx) {
                    T wv = K[ky * kw + kx];
                    int lo, hi;
                    detail::conv_x_range(kx, pad, stride, iw, ow, lo, hi);
                    for (int oy = 0; oy < oh; ++oy) {
                      int iy = oy * stride + ky - pad;
                      if (iy < 0 || iy >= ih) continue;
                      T* girow = gi + static_cast<int64_t>(iy) * iw + (kx - pad);
                      const T* grow = go + static_cast<int64_t>(oy) * ow;
                      for (int ox = lo; ox <= hi; ++ox) girow[ox * stride] += wv * grow[ox];
                    }
                  }
              }
            }
        }
        if (wn->requires_grad) {
          wn->ensure_grad();
          T* GW = wn->grad.data();
#pragma omp parallel for schedule(static)
          for (int o = 0; o < oc; ++o)
            for (int c = 0; c < ic; ++c)
              for (int ky = 0; ky < kh; ++ky)
                for (int kx = 0; kx < kw; ++kx) {
                  int lo, hi;
                  detail::conv_x_range(kx, pad, stride, iw, ow, lo, hi);
                  T acc = 0;
                  for (int ni = 0; ni < n; ++ni) {
                    const T* go = G + (static_cast<int64_t>(ni) * oc + o) * out_plane;
                    const T* I =
                        xn->value.data() + (static_cast<int64_t>(ni) * ic + c) * in_plane;
                    for (int oy = 0; oy < oh; ++oy) {
                      int iy = oy * stride + ky - pad;
                      if (iy < 0 || iy >= ih) continue;
                      const T* irow = I + static_cast<int64_t>(iy) * iw + (kx - pad);
                      const T* grow = go + static_cast<int64_t>(oy) * ow;
                      for (int ox = lo; ox <= hi; ++ox) acc += grow[ox] * irow[ox * stride];
                    }
                  }
                  GW[(static_cast<int64_t>(o) * ic + c) * kh * kw + ky * kw + kx] += acc;
                }
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (int o = 0; o < oc; ++o) {
            T acc = 0;
            for (int ni = 0; ni < n; ++ni) {
              const T* go = G + (static_cast<int64_t>(ni) * oc + o) * out_plane;
              for (int64_t i = 0; i < out_plane; ++i) acc += go[i];
            }
            bn->grad[o] += acc;
          }
        }
      });
}

// Max pooling with square window == stride. Gradient routes to the argmax;
// ties break to the first position in row-major window scan order.
template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& input, int window = 2) {
  detail::require(input.shape().size() == 4, "maxpool2d: input must be NCHW, got " +
                                                 shape_str(input.shape()));
  const int n = input.shape()[0], c = input.shape()[1], ih = input.shape()[2],
            iw = input.shape()[3];
  detail::require(window >= 1, "maxpool2d: window must be >= 1");
  detail::require(ih % window == 0 && iw % window == 0,
                  "maxpool2d: spatial dims " + shape_str(input.shape()) +
                      " not divisible by window " + std::to_string(window));
  const int oh = ih / window, ow = iw / window;
  std::vector<T> out(static_cast<size_t>(n) * c * oh * ow);
  std::vector<int32_t> argmax(out.size());
  const T* X = input.value().data();
  const int64_t planes = static_cast<int64_t>(n) * c;
  for (int64_t p = 0; p < planes; ++p) {
    const T* I = X + p * ih * iw;
    T* O = out.data() + p * oh * ow;
    int32_t* A = argmax.data() + p * oh * ow;
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        int best_idx = oy * window * iw + ox * window;
        T best = I[best_idx];
        for (int wy = 0; wy < window; ++wy)
          for (int wx = 0; wx < window; ++wx) {
            int idx = (oy * window + wy) * iw + ox * window + wx;
            if (I[idx] > best) {
              best = I[idx];
              best_idx = idx;
            }
          }
        O[oy * ow + ox] = best;
        A[oy * ow + ox] = best_idx;
      }
  }
  auto xn = input.node();
  return detail::make_op<T>(
      "maxpool2d", {n, c, oh, ow}, std::move(out), {xn},
      [xn, argmax = std::move(argmax), planes, ih, iw, oh, ow](detail::Node<T>& self) {
        xn->ensure_grad();
        for (int64_t p = 0; p < planes; ++p) {
          T* gi = xn->grad.data() + p * ih * iw;
          const T* go = self.grad.data() + p * oh * ow;
          const int32_t* A = argmax.data() + p * oh * ow;
          for (int64_t i = 0; i < static_cast<int64_t>(oh) * ow; ++i) gi[A[i]] += go[i];
        }
      });
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input) {
  detail::require(input.shape().size() == 4, "global_avg_pool: input must be NCHW, got " +
                                                 shape_str(input.shape()));
  const int n = input.shape()[0], c = input.shape()[1];
  const int64_t hw = static_cast<int64_t>(input.shape()[2]) * input.shape()[3];
  std::vector<T> out(static_cast<size_t>(n) * c);
  const T* X = input.value().data();
  for (int64_t p = 0; p < static_cast<int64_t>(n) * c; ++p) {
    T acc = 0;
    const T* I = X + p * hw;
    for (int64_t i = 0; i < hw; ++i) acc += I[i];
    out[p] = acc / static_cast<T>(hw);
  }
  auto xn = input.node();
  return detail::make_op<T>("global_avg_pool", {n, c}, std::move(out), {xn},
                            [xn, n, c, hw](detail::Node<T>& self) {
                              xn->ensure_grad();
                              for (int64_t p = 0; p < static_cast<int64_t>(n) * c; ++p) {
                                T g = self.grad[p] / static_cast<T>(hw);
                                T* gi = xn->grad.data() + p * hw;
                                for (int64_t i = 0; i < hw; ++i) gi[i] += g;
                              }
                            });
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// -log softmax(logits)[target], mean over the batch. Accepts (C) with a
// single target or (N,C) with one target per row. Log-sum-exp stabilized.
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& targets) {
  Shape s = logits.shape();
  int n, cls;
  if (s.size() == 1) {
    n = 1;
    cls = s[0];
  } else if (s.size() == 2) {
    n = s[0];
    cls = s[1];
  } else {
    throw std::invalid_argument("softmax_cross_entropy: logits must be (C) or (N,C), got " +
                                shape_str(s));
  }
  detail::require(static_cast<int>(targets.size()) == n,
                  "softmax_cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                      std::to_string(n) + " rows");
  for (int t : targets)
    detail::require(t >= 0 && t < cls, "softmax_cross_entropy: target index " +
                                           std::to_string(t) + " out of range [0," +
                                           std::to_string(cls) + ")");
  const T* L = logits.value().data();
  std::vector<T> probs(static_cast<size_t>(n) * cls);
  T loss = 0;
  for (int i = 0; i < n; ++i) {
    const T* row = L + static_cast<int64_t>(i) * cls;
    T m = row[0];
    for (int j = 1; j < cls; ++j) m = std::max(m, row[j]);
    T denom = 0;
    for (int j = 0; j < cls; ++j) denom += std::exp(row[j] - m);
    T lse = m + std::log(denom);
    for (int j = 0; j < cls; ++j) probs[static_cast<int64_t>(i) * cls + j] = std::exp(row[j] - lse);
    loss += lse - row[targets[i]];
  }
  loss /= static_cast<T>(n);
  auto ln = logits.node();
  return detail::make_op<T>(
      "softmax_cross_entropy", {1}, std::vector<T>{loss}, {ln},
      [ln, probs = std::move(probs), targets, n, cls](detail::Node<T>& self) {
        ln->ensure_grad();
        T g = self.grad[0] / static_cast<T>(n);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < cls; ++j) {
            T p = probs[static_cast<int64_t>(i) * cls + j];
            ln->grad[static_cast<int64_t>(i) * cls + j] +=
                g * (p - (j == targets[i] ? T(1) : T(0)));
          }
      });
}

template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, int target) {
  return softmax_cross_entropy(logits, std::vector<int>{target});
}

inline constexpr double kBceClamp = 1e-7;

// -sum_k [t_k log p_k + (1-t_k) log(1-p_k)], mean over batch rows. Inputs are
// clamped to [1e-7, 1-1e-7]; the clamp has zero gradient outside the band.
template <typename T>
Tensor<T> binary_cross_entropy(const Tensor<T>& predictions, const std::vector<T>& target) {
  Shape s = predictions.shape();
  int n;
  if (s.size() == 1) {
    n = 1;
  } else if (s.size() == 2) {
    n = s[0];
  } else {
    throw std::invalid_argument("binary_cross_entropy: predictions must be (K) or (N,K), got " +
                                shape_str(s));
  }
  detail::require(static_cast<int64_t>(target.size()) == predictions.numel(),
                  "binary_cross_entropy: target length " + std::to_string(target.size()) +
                      " does not match predictions " + shape_str(s));
  const T lo = static_cast<T>(kBceClamp), hi = static_cast<T>(1.0 - kBceClamp);
  const T* P = predictions.value().data();
  T loss = 0;
  for (int64_t i = 0; i < predictions.numel(); ++i) {
    T p = std::clamp(P[i], lo, hi);
    T t = target[i];
    loss -= t * std::log(p) + (T(1) - t) * std::log(T(1) - p);
  }
  loss /= static_cast<T>(n);
  auto pn = predictions.node();
  return detail::make_op<T>(
      "binary_cross_entropy", {1}, std::vector<T>{loss}, {pn},
      [pn, target, n, lo, hi](detail::Node<T>& self) {
        pn->ensure_grad();
        T g = self.grad[0] / static_cast<T>(n);
        for (size_t i = 0; i < target.size(); ++i) {
          T p = pn->value[i];
          if (p < lo || p > hi) continue;
          pn->grad[i] += g * (-target[i] / p + (T(1) - target[i]) / (T(1) - p));
        }
      });
}

// ---------------------------------------------------------------------------
// Batch normalization (optional network block)
// ---------------------------------------------------------------------------

// Per-channel batch norm over (N,H,W). use_batch_stats selects train-style
// normalization; otherwise running statistics are used (affine transform).
template <typename T>
Tensor<T> batch_norm2d(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                       std::vector<T>& running_mean, std::vector<T>& running_var,
                       bool use_batch_stats, bool update_running, double momentum = 0.1,
                       double eps = 1e-5) {
  detail::require(input.shape().size() == 4, "batch_norm2d: input must be NCHW, got " +
                                                 shape_str(input.shape()));
  const int n = input.shape()[0], c = input.shape()[1], h = input.shape()[2],
            w = input.shape()[3];
  detail::require(gamma.shape() == Shape{c} && beta.shape() == Shape{c} &&
                      static_cast<int>(running_mean.size()) == c &&
                      static_cast<int>(running_var.size()) == c,
                  "batch_norm2d: per-channel parameter size mismatch for " +
                      shape_str(input.shape()));
  const int64_t hw = static_cast<int64_t>(h) * w;
  const int64_t per_chan = static_cast<int64_t>(n) * hw;
  const T* X = input.value().data();

  std::vector<T> mean(c), var(c);
  if (use_batch_stats) {
    for (int ch = 0; ch < c; ++ch) {
      T m = 0;
      for (int ni = 0; ni < n; ++ni) {
        const T* I = X + (static_cast<int64_t>(ni) * c + ch) * hw;
        for (int64_t i = 0; i < hw; ++i) m += I[i];
      }
      m /= static_cast<T>(per_chan);
      T v = 0;
      for (int ni = 0; ni < n; ++ni) {
        const T* I = X + (static_cast<int64_t>(ni) * c + ch) * hw;
        for (int64_t i = 0; i < hw; ++i) {
          T d = I[i] - m;
          v += d * d;
        }
      }
      v /= static_cast<T>(per_chan);
      mean[ch] = m;
      var[ch] = v;
    }
    if (update_running)
      for (int ch = 0; ch < c; ++ch) {
        running_mean[ch] = static_cast<T>((1.0 - momentum) * running_mean[ch] + momentum * mean[ch]);
        running_var[ch] = static_cast<T>((1.0 - momentum) * running_var[ch] + momentum * var[ch]);
      }
  } else {
    mean = running_mean;
    var = running_var;
  }

  std::vector<T> inv_std(c), xhat(input.value().size());
  for (int ch = 0; ch < c; ++ch) inv_std[ch] = static_cast<T>(1.0 / std::sqrt(double(var[ch]) + eps));
  std::vector<T> out(input.value().size());
  const T* G = gamma.value().data();
  const T* Bt = beta.value().data();
  for (int ni = 0; ni < n; ++ni)
    for (int ch = 0; ch < c; ++ch) {
      const T* I = X + (static_cast<int64_t>(ni) * c + ch) * hw;
      T* XH = xhat.data() + (static_cast<int64_t>(ni) * c + ch) * hw;
      T* O = out.data() + (static_cast<int64_t>(ni) * c + ch) * hw;
      for (int64_t i = 0; i < hw; ++i) {
        XH[i] = (I[i] - mean[ch]) * inv_std[ch];
        O[i] = G[ch] * XH[i] + Bt[ch];
      }
    }

  auto xn = input.node(), gn = gamma.node(), bn = beta.node();
  return detail::make_op<T>(
      "batch_norm2d", input.shape(), std::move(out), {xn, gn, bn},
      [xn, gn, bn, xhat = std::move(xhat), inv_std = std::move(inv_std), use_batch_stats, n, c,
       hw, per_chan](detail::Node<T>& self) {
        const T* GO = self.grad.data();
        if (gn->requires_grad) {
          gn->ensure_grad();
          for (int ch = 0; ch < c; ++ch) {
            T acc = 0;
            for (int ni = 0; ni < n; ++ni) {
              const int64_t base = (static_cast<int64_t>(ni) * c + ch) * hw;
              for (int64_t i = 0; i < hw; ++i) acc += GO[base + i] * xhat[base + i];
            }
            gn->grad[ch] += acc;
          }
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (int ch = 0; ch < c; ++ch) {
            T acc = 0;
            for (int ni = 0; ni < n; ++ni) {
              const int64_t base = (static_cast<int64_t>(ni) * c + ch) * hw;
              for (int64_t i = 0; i < hw; ++i) acc += GO[base + i];
            }
            bn->grad[ch] += acc;
          }
        }
        if (xn->requires_grad) {
          xn->ensure_grad();
          for (int ch = 0; ch < c; ++ch) {
            T g = gn->value[ch];
            if (!use_batch_stats) {
              // running statistics are constants: plain affine backward
              for (int ni = 0; ni < n; ++ni) {
                const int64_t base = (static_cast<int64_t>(ni) * c + ch) * hw;
                for (int64_t i = 0; i < hw; ++i)
                  xn->grad[base + i] += GO[base + i] * g * inv_std[ch];
              }
              continue;
            }
            T sum_g = 0, sum_gx = 0;
            for (int ni = 0; ni < n; ++ni) {
              const int64_t base = (static_cast<int64_t>(ni) * c + ch) * hw;
              for (int64_t i = 0; i < hw; ++i) {
                sum_g += GO[base + i];
                sum_gx += GO[base + i] * xhat[base + i];
              }
            }
            T mean_g = sum_g / static_cast<T>(per_chan);
            T mean_gx = sum_gx / static_cast<T>(per_chan);
            for (int ni = 0; ni < n; ++ni) {
              const int64_t base = (static_cast<int64_t>(ni) * c + ch) * hw;
              for (int64_t i = 0; i < hw; ++i)
                xn->grad[base + i] +=
                    g * inv_std[ch] * (GO[base + i] - mean_g - xhat[base + i] * mean_gx);
            }
          }
        }
      });
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (T v : t.value())
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

}  // namespace rpmlab
