#include "neid/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "neid/parallel.hpp"

namespace neid::nn {

namespace {

// Loop bounds such that every touched input index o = i*stride + k - 1 stays
// inside [0, extent).
inline int conv_lo(int k, int stride) {
  return k >= 1 ? 0 : (stride == 1 ? 1 : (stride + stride - 1) / stride);
}
inline int conv_hi(int k, int stride, int extent, int out_extent) {
  return std::min(out_extent, (extent - k) / stride + 1);
}

}  // namespace

namespace {

/// One output row of a same-padded 3x3 stride-1 convolution: all nine taps
/// accumulated in a single pass. r0/r1/r2 are the source rows y-1, y, y+1;
/// out-of-bounds rows must point at a zero row so the kernel stays
/// branch-free and vectorizable.
template <typename T>
void conv_row_fused(T* dst, const T* r0, const T* r1, const T* r2, const T* w,
                    int width) {
  if (width == 1) {
    dst[0] += w[1] * r0[0] + w[4] * r1[0] + w[7] * r2[0];
    return;
  }
  dst[0] += w[1] * r0[0] + w[2] * r0[1] + w[4] * r1[0] + w[5] * r1[1] +
            w[7] * r2[0] + w[8] * r2[1];
  for (int x = 1; x < width - 1; ++x) {
    dst[x] += w[0] * r0[x - 1] + w[1] * r0[x] + w[2] * r0[x + 1] +
              w[3] * r1[x - 1] + w[4] * r1[x] + w[5] * r1[x + 1] +
              w[6] * r2[x - 1] + w[7] * r2[x] + w[8] * r2[x + 1];
  }
  const int x = width - 1;
  dst[x] += w[0] * r0[x - 1] + w[1] * r0[x] + w[3] * r1[x - 1] + w[4] * r1[x] +
            w[6] * r2[x - 1] + w[7] * r2[x];
}

}  // namespace

template <typename T>
Tensor<T> conv3x3_forward(const Tensor<T>& in, const Tensor<T>& weight,
                          const std::vector<T>& bias, int stride) {
  if (weight.h != 3 || weight.w != 3 || weight.c != in.c) {
    throw ShapeMismatch("conv3x3: weight shape mismatch");
  }
  if (!bias.empty() && static_cast<int>(bias.size()) != weight.n) {
    throw ShapeMismatch("conv3x3: bias size mismatch");
  }
  const int c_out = weight.n;
  const int c_in = in.c;
  const int out_h = (in.h - 1) / stride + 1;
  const int out_w = (in.w - 1) / stride + 1;
  Tensor<T> out(in.n, c_out, out_h, out_w);

  parallel_for(0, static_cast<std::int64_t>(in.n) * c_out, [&](std::int64_t idx) {
    const int ni = static_cast<int>(idx / c_out);
    const int co = static_cast<int>(idx % c_out);
    T* outp = out.plane(ni, co);
    const T b = bias.empty() ? T(0) : bias[co];
    std::fill(outp, outp + out.plane_size(), b);

    if (stride == 1) {
      const std::vector<T> zero_row(in.w, T(0));
      for (int ci = 0; ci < c_in; ++ci) {
        const T* inp = in.plane(ni, ci);
        const T* w = weight.data.data() +
                     (static_cast<std::size_t>(co) * c_in + ci) * 9;
        for (int y = 0; y < in.h; ++y) {
          const T* r0 = y > 0 ? inp + static_cast<std::size_t>(y - 1) * in.w
                              : zero_row.data();
          const T* r1 = inp + static_cast<std::size_t>(y) * in.w;
          const T* r2 = y + 1 < in.h
                            ? inp + static_cast<std::size_t>(y + 1) * in.w
                            : zero_row.data();
          conv_row_fused(outp + static_cast<std::size_t>(y) * in.w, r0, r1, r2,
                         w, in.w);
        }
      }
      return;
    }

    for (int ci = 0; ci < c_in; ++ci) {
      const T* inp = in.plane(ni, ci);
      for (int ky = 0; ky < 3; ++ky) {
        const int ylo = conv_lo(ky, stride);
        const int yhi = conv_hi(ky, stride, in.h, out_h);
        for (int kx = 0; kx < 3; ++kx) {
          const T wv = weight.at(co, ci, ky, kx);
          if (wv == T(0)) continue;
          const int xlo = conv_lo(kx, stride);
          const int xhi = conv_hi(kx, stride, in.w, out_w);
          for (int y = ylo; y < yhi; ++y) {
            const T* src = inp + static_cast<std::size_t>(y * stride + ky - 1) * in.w + (kx - 1);
            T* dst = outp + static_cast<std::size_t>(y) * out_w;
            for (int x = xlo; x < xhi; ++x) dst[x] += wv * src[x * stride];
          }
        }
      }
    }
  });
  return out;
}

template <typename T>
void conv3x3_backward(const Tensor<T>& in, const Tensor<T>& weight,
                      const Tensor<T>& grad_out, int stride,
                      Tensor<T>* grad_in, Tensor<T>* grad_weight,
                      std::vector<T>* grad_bias) {
  const int c_out = weight.n;
  const int c_in = in.c;
  const int out_h = grad_out.h;
  const int out_w = grad_out.w;

  if (grad_in) {
    *grad_in = Tensor<T>::zeros_like(in);
    parallel_for(0, static_cast<std::int64_t>(in.n) * c_in, [&](std::int64_t idx) {
      const int ni = static_cast<int>(idx / c_in);
      const int ci = static_cast<int>(idx % c_in);
      T* gin = grad_in->plane(ni, ci);

      if (stride == 1) {
        // Adjoint of the same-padded convolution: correlate grad_out with
        // the flipped kernel; same fused row structure as the forward pass.
        const std::vector<T> zero_row(in.w, T(0));
        T wf[9];
        for (int co = 0; co < c_out; ++co) {
          const T* w = weight.data.data() +
                       (static_cast<std::size_t>(co) * c_in + ci) * 9;
          for (int k = 0; k < 9; ++k) wf[k] = w[8 - k];
          const T* gout = grad_out.plane(ni, co);
          for (int y = 0; y < in.h; ++y) {
            const T* r0 = y > 0 ? gout + static_cast<std::size_t>(y - 1) * in.w
                                : zero_row.data();
            const T* r1 = gout + static_cast<std::size_t>(y) * in.w;
            const T* r2 = y + 1 < in.h
                              ? gout + static_cast<std::size_t>(y + 1) * in.w
                              : zero_row.data();
            conv_row_fused(gin + static_cast<std::size_t>(y) * in.w, r0, r1, r2,
                           wf, in.w);
          }
        }
        return;
      }

      for (int co = 0; co < c_out; ++co) {
        const T* gout = grad_out.plane(ni, co);
        for (int ky = 0; ky < 3; ++ky) {
          const int ylo = conv_lo(ky, stride);
          const int yhi = conv_hi(ky, stride, in.h, out_h);
          for (int kx = 0; kx < 3; ++kx) {
            const T wv = weight.at(co, ci, ky, kx);
            if (wv == T(0)) continue;
            const int xlo = conv_lo(kx, stride);
            const int xhi = conv_hi(kx, stride, in.w, out_w);
            for (int y = ylo; y < yhi; ++y) {
              T* dst = gin + static_cast<std::size_t>(y * stride + ky - 1) * in.w + (kx - 1);
              const T* src = gout + static_cast<std::size_t>(y) * out_w;
              for (int x = xlo; x < xhi; ++x) dst[x * stride] += wv * src[x];
            }
          }
        }
      }
    });
  }

  if (grad_weight) {
    *grad_weight = Tensor<T>::zeros_like(weight);
    parallel_for(0, c_out, [&](std::int64_t co64) {
      const int co = static_cast<int>(co64);
      for (int ci = 0; ci < c_in; ++ci) {
        for (int ky = 0; ky < 3; ++ky) {
          const int ylo = conv_lo(ky, stride);
          const int yhi = conv_hi(ky, stride, in.h, out_h);
          for (int kx = 0; kx < 3; ++kx) {
            const int xlo = conv_lo(kx, stride);
            const int xhi = conv_hi(kx, stride, in.w, out_w);
            // four partial sums break the FP dependency chain; the summation
            // order is fixed, so results stay run-to-run identical
            T a0 = T(0), a1 = T(0), a2 = T(0), a3 = T(0);
            for (int ni = 0; ni < in.n; ++ni) {
              const T* inp = in.plane(ni, ci);
              const T* gout = grad_out.plane(ni, co);
              for (int y = ylo; y < yhi; ++y) {
                const T* src = inp + static_cast<std::size_t>(y * stride + ky - 1) * in.w + (kx - 1);
                const T* g = gout + static_cast<std::size_t>(y) * out_w;
                if (stride == 1) {
                  int x = xlo;
                  for (; x + 4 <= xhi; x += 4) {
                    a0 += g[x] * src[x];
                    a1 += g[x + 1] * src[x + 1];
                    a2 += g[x + 2] * src[x + 2];
                    a3 += g[x + 3] * src[x + 3];
                  }
                  for (; x < xhi; ++x) a0 += g[x] * src[x];
                } else {
                  for (int x = xlo; x < xhi; ++x) a0 += g[x] * src[x * stride];
                }
              }
            }
            grad_weight->at(co, ci, ky, kx) = ((a0 + a1) + (a2 + a3));
          }
        }
      }
    });
  }

  if (grad_bias) {
    grad_bias->assign(c_out, T(0));
    parallel_for(0, c_out, [&](std::int64_t co64) {
      const int co = static_cast<int>(co64);
      T acc = T(0);
      for (int ni = 0; ni < in.n; ++ni) {
        const T* gout = grad_out.plane(ni, co);
        for (std::int64_t i = 0; i < grad_out.plane_size(); ++i) acc += gout[i];
      }
      (*grad_bias)[co] = acc;
    });
  }
}

template <typename T>
Tensor<T> tconv2x2_forward(const Tensor<T>& in, const Tensor<T>& weight,
                           const std::vector<T>& bias) {
  if (weight.n != in.c || weight.h != 2 || weight.w != 2) {
    throw ShapeMismatch("tconv2x2: weight shape mismatch");
  }
  const int c_out = weight.c;
  Tensor<T> out(in.n, c_out, in.h * 2, in.w * 2);
  parallel_for(0, static_cast<std::int64_t>(in.n) * c_out, [&](std::int64_t idx) {
    const int ni = static_cast<int>(idx / c_out);
    const int co = static_cast<int>(idx % c_out);
    T* outp = out.plane(ni, co);
    const T b = bias.empty() ? T(0) : bias[co];
    std::fill(outp, outp + out.plane_size(), b);
    for (int ci = 0; ci < in.c; ++ci) {
      const T* inp = in.plane(ni, ci);
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const T wv = weight.at(ci, co, dy, dx);
          if (wv == T(0)) continue;
          for (int y = 0; y < in.h; ++y) {
            const T* src = inp + static_cast<std::size_t>(y) * in.w;
            T* dst = outp + static_cast<std::size_t>(2 * y + dy) * out.w + dx;
            for (int x = 0; x < in.w; ++x) dst[2 * x] += wv * src[x];
          }
        }
      }
    }
  });
  return out;
}

template <typename T>
void tconv2x2_backward(const Tensor<T>& in, const Tensor<T>& weight,
                       const Tensor<T>& grad_out, Tensor<T>* grad_in,
                       Tensor<T>* grad_weight, std::vector<T>* grad_bias) {
  const int c_out = weight.c;

  if (grad_in) {
    *grad_in = Tensor<T>::zeros_like(in);
    parallel_for(0, static_cast<std::int64_t>(in.n) * in.c, [&](std::int64_t idx) {
      const int ni = static_cast<int>(idx / in.c);
      const int ci = static_cast<int>(idx % in.c);
      T* gin = grad_in->plane(ni, ci);
      for (int co = 0; co < c_out; ++co) {
        const T* gout = grad_out.plane(ni, co);
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const T wv = weight.at(ci, co, dy, dx);
            if (wv == T(0)) continue;
            for (int y = 0; y < in.h; ++y) {
              const T* src = gout + static_cast<std::size_t>(2 * y + dy) * grad_out.w + dx;
              T* dst = gin + static_cast<std::size_t>(y) * in.w;
              for (int x = 0; x < in.w; ++x) dst[x] += wv * src[2 * x];
            }
          }
        }
      }
    });
  }

  if (grad_weight) {
    *grad_weight = Tensor<T>::zeros_like(weight);
    parallel_for(0, static_cast<std::int64_t>(in.c) * c_out, [&](std::int64_t idx) {
      const int ci = static_cast<int>(idx / c_out);
      const int co = static_cast<int>(idx % c_out);
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          T acc = T(0);
          for (int ni = 0; ni < in.n; ++ni) {
            const T* inp = in.plane(ni, ci);
            const T* gout = grad_out.plane(ni, co);
            for (int y = 0; y < in.h; ++y) {
              const T* src = inp + static_cast<std::size_t>(y) * in.w;
              const T* g = gout + static_cast<std::size_t>(2 * y + dy) * grad_out.w + dx;
              for (int x = 0; x < in.w; ++x) acc += src[x] * g[2 * x];
            }
          }
          grad_weight->at(ci, co, dy, dx) = acc;
        }
      }
    });
  }

  if (grad_bias) {
    grad_bias->assign(c_out, T(0));
    parallel_for(0, c_out, [&](std::int64_t co64) {
      const int co = static_cast<int>(co64);
      T acc = T(0);
      for (int ni = 0; ni < in.n; ++ni) {
        const T* gout = grad_out.plane(ni, co);
        for (std::int64_t i = 0; i < grad_out.plane_size(); ++i) acc += gout[i];
      }
      (*grad_bias)[co] = acc;
    });
  }
}

template <typename T>
Tensor<T> maxpool2_forward(const Tensor<T>& in, std::vector<std::int32_t>& argmax) {
  if (in.h % 2 != 0 || in.w % 2 != 0) {
    throw ShapeMismatch("maxpool2: spatial dims must be even");
  }
  const int out_h = in.h / 2;
  const int out_w = in.w / 2;
  Tensor<T> out(in.n, in.c, out_h, out_w);
  argmax.assign(static_cast<std::size_t>(out.size()), 0);
  parallel_for(0, static_cast<std::int64_t>(in.n) * in.c, [&](std::int64_t idx) {
    const T* inp = in.plane(static_cast<int>(idx / in.c), static_cast<int>(idx % in.c));
    T* outp = out.data.data() + idx * out.plane_size();
    std::int32_t* am = argmax.data() + idx * out.plane_size();
    for (int y = 0; y < out_h; ++y) {
      for (int x = 0; x < out_w; ++x) {
        const int iy = 2 * y;
        const int ix = 2 * x;
        std::int32_t best = iy * in.w + ix;
        T best_v = inp[best];
        const std::int32_t cands[3] = {iy * in.w + ix + 1, (iy + 1) * in.w + ix,
                                       (iy + 1) * in.w + ix + 1};
        for (std::int32_t cand : cands) {
          if (inp[cand] > best_v) {
            best_v = inp[cand];
            best = cand;
          }
        }
        outp[static_cast<std::size_t>(y) * out_w + x] = best_v;
        am[static_cast<std::size_t>(y) * out_w + x] = best;
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> maxpool2_backward(const Tensor<T>& grad_out,
                            const std::vector<std::int32_t>& argmax, int in_h,
                            int in_w) {
  Tensor<T> grad_in(grad_out.n, grad_out.c, in_h, in_w);
  parallel_for(0, static_cast<std::int64_t>(grad_out.n) * grad_out.c,
               [&](std::int64_t idx) {
                 const T* gout = grad_out.data.data() + idx * grad_out.plane_size();
                 const std::int32_t* am = argmax.data() + idx * grad_out.plane_size();
                 T* gin = grad_in.data.data() + idx * grad_in.plane_size();
                 for (std::int64_t i = 0; i < grad_out.plane_size(); ++i) {
                   gin[am[i]] += gout[i];
                 }
               });
  return grad_in;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& in) {
  Tensor<T> out = in;
  for (T& v : out.data) v = v > T(0) ? v : T(0);
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& out) {
  Tensor<T> grad_in = grad_out;
  for (std::size_t i = 0; i < grad_in.data.size(); ++i) {
    if (out.data[i] <= T(0)) grad_in.data[i] = T(0);
  }
  return grad_in;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& in) {
  Tensor<T> out = in;
  for (T& v : out.data) v = T(1) / (T(1) + std::exp(-v));
  return out;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& grad_out, const Tensor<T>& out) {
  Tensor<T> grad_in = grad_out;
  for (std::size_t i = 0; i < grad_in.data.size(); ++i) {
    grad_in.data[i] *= out.data[i] * (T(1) - out.data[i]);
  }
  return grad_in;
}

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& in, int r) {
  if (r < 1 || in.c % (r * r) != 0) {
    throw BadChannelCount("pixel_shuffle: channels not divisible by r^2");
  }
  const int c_out = in.c / (r * r);
  Tensor<T> out(in.n, c_out, in.h * r, in.w * r);
  parallel_for(0, static_cast<std::int64_t>(in.n) * c_out, [&](std::int64_t idx) {
    const int ni = static_cast<int>(idx / c_out);
    const int co = static_cast<int>(idx % c_out);
    T* outp = out.plane(ni, co);
    for (int y = 0; y < out.h; ++y) {
      for (int x = 0; x < out.w; ++x) {
        const int ci = co * r * r + (y % r) * r + (x % r);
        outp[static_cast<std::size_t>(y) * out.w + x] =
            in.at(ni, ci, y / r, x / r);
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& in, int r) {
  if (r < 1 || in.h % r != 0 || in.w % r != 0) {
    throw ShapeMismatch("pixel_unshuffle: spatial dims not divisible by r");
  }
  const int c_out = in.c * r * r;
  Tensor<T> out(in.n, c_out, in.h / r, in.w / r);
  parallel_for(0, static_cast<std::int64_t>(in.n) * in.c, [&](std::int64_t idx) {
    const int ni = static_cast<int>(idx / in.c);
    const int ci = static_cast<int>(idx % in.c);
    const T* inp = in.plane(ni, ci);
    for (int y = 0; y < in.h; ++y) {
      for (int x = 0; x < in.w; ++x) {
        const int co = ci * r * r + (y % r) * r + (x % r);
        out.at(ni, co, y / r, x / r) =
            inp[static_cast<std::size_t>(y) * in.w + x];
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w) {
    throw ShapeMismatch("concat_channels: geometry mismatch");
  }
  Tensor<T> out(a.n, a.c + b.c, a.h, a.w);
  for (int ni = 0; ni < a.n; ++ni) {
    for (int ci = 0; ci < a.c; ++ci) {
      std::copy(a.plane(ni, ci), a.plane(ni, ci) + a.plane_size(),
                out.plane(ni, ci));
    }
    for (int ci = 0; ci < b.c; ++ci) {
      std::copy(b.plane(ni, ci), b.plane(ni, ci) + b.plane_size(),
                out.plane(ni, a.c + ci));
    }
  }
  return out;
}

template <typename T>
void split_channels(const Tensor<T>& grad, int c_a, Tensor<T>& grad_a,
                    Tensor<T>& grad_b) {
  grad_a = Tensor<T>(grad.n, c_a, grad.h, grad.w);
  grad_b = Tensor<T>(grad.n, grad.c - c_a, grad.h, grad.w);
  for (int ni = 0; ni < grad.n; ++ni) {
    for (int ci = 0; ci < c_a; ++ci) {
      std::copy(grad.plane(ni, ci), grad.plane(ni, ci) + grad.plane_size(),
                grad_a.plane(ni, ci));
    }
    for (int ci = 0; ci < grad_b.c; ++ci) {
      std::copy(grad.plane(ni, c_a + ci),
                grad.plane(ni, c_a + ci) + grad.plane_size(),
                grad_b.plane(ni, ci));
    }
  }
}

template <typename T>
Tensor<T> linear_forward(const Tensor<T>& in, const Tensor<T>& weight,
                         const std::vector<T>& bias) {
  if (in.h != 1 || in.w != 1 || weight.c != in.c) {
    throw ShapeMismatch("linear: shape mismatch");
  }
  const int c_out = weight.n;
  Tensor<T> out(in.n, c_out, 1, 1);
  for (int ni = 0; ni < in.n; ++ni) {
    const T* inp = in.plane(ni, 0);
    for (int co = 0; co < c_out; ++co) {
      T acc = bias.empty() ? T(0) : bias[co];
      const T* w = weight.data.data() + static_cast<std::size_t>(co) * in.c;
      for (int ci = 0; ci < in.c; ++ci) acc += w[ci] * inp[ci];
      out.at(ni, co, 0, 0) = acc;
    }
  }
  return out;
}

template <typename T>
void linear_backward(const Tensor<T>& in, const Tensor<T>& weight,
                     const Tensor<T>& grad_out, Tensor<T>* grad_in,
                     Tensor<T>* grad_weight, std::vector<T>* grad_bias) {
  const int c_out = weight.n;
  if (grad_in) {
    *grad_in = Tensor<T>::zeros_like(in);
    for (int ni = 0; ni < in.n; ++ni) {
      T* gin = grad_in->plane(ni, 0);
      for (int co = 0; co < c_out; ++co) {
        const T g = grad_out.at(ni, co, 0, 0);
        const T* w = weight.data.data() + static_cast<std::size_t>(co) * in.c;
        for (int ci = 0; ci < in.c; ++ci) gin[ci] += g * w[ci];
      }
    }
  }
  if (grad_weight) {
    *grad_weight = Tensor<T>::zeros_like(weight);
    for (int ni = 0; ni < in.n; ++ni) {
      const T* inp = in.plane(ni, 0);
      for (int co = 0; co < c_out; ++co) {
        const T g = grad_out.at(ni, co, 0, 0);
        T* gw = grad_weight->data.data() + static_cast<std::size_t>(co) * in.c;
        for (int ci = 0; ci < in.c; ++ci) gw[ci] += g * inp[ci];
      }
    }
  }
  if (grad_bias) {
    grad_bias->assign(c_out, T(0));
    for (int ni = 0; ni < in.n; ++ni) {
      for (int co = 0; co < c_out; ++co) {
        (*grad_bias)[co] += grad_out.at(ni, co, 0, 0);
      }
    }
  }
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& in) {
  Tensor<T> out(in.n, in.c, 1, 1);
  const T inv = T(1) / static_cast<T>(in.plane_size());
  for (int ni = 0; ni < in.n; ++ni) {
    for (int ci = 0; ci < in.c; ++ci) {
      const T* inp = in.plane(ni, ci);
      T acc = T(0);
      for (std::int64_t i = 0; i < in.plane_size(); ++i) acc += inp[i];
      out.at(ni, ci, 0, 0) = acc * inv;
    }
  }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& grad_out, int in_h, int in_w) {
  Tensor<T> grad_in(grad_out.n, grad_out.c, in_h, in_w);
  const T inv = T(1) / static_cast<T>(static_cast<std::int64_t>(in_h) * in_w);
  for (int ni = 0; ni < grad_out.n; ++ni) {
    for (int ci = 0; ci < grad_out.c; ++ci) {
      const T g = grad_out.at(ni, ci, 0, 0) * inv;
      T* gin = grad_in.plane(ni, ci);
      std::fill(gin, gin + grad_in.plane_size(), g);
    }
  }
  return grad_in;
}

template <typename T>
Tensor<T> channel_blend(const Tensor<T>& w, const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b) || w.n != a.n || w.c != a.c || w.h != 1 || w.w != 1) {
    throw ShapeMismatch("channel_blend: shape mismatch");
  }
  Tensor<T> out = Tensor<T>::zeros_like(a);
  for (int ni = 0; ni < a.n; ++ni) {
    for (int ci = 0; ci < a.c; ++ci) {
      const T wv = w.at(ni, ci, 0, 0);
      const T* ap = a.plane(ni, ci);
      const T* bp = b.plane(ni, ci);
      T* op = out.plane(ni, ci);
      for (std::int64_t i = 0; i < a.plane_size(); ++i) {
        op[i] = wv * ap[i] + (T(1) - wv) * bp[i];
      }
    }
  }
  return out;
}

template <typename T>
void channel_blend_backward(const Tensor<T>& w, const Tensor<T>& a,
                            const Tensor<T>& b, const Tensor<T>& grad_out,
                            Tensor<T>& grad_w, Tensor<T>& grad_a,
                            Tensor<T>& grad_b) {
  grad_w = Tensor<T>(w.n, w.c, 1, 1);
  grad_a = Tensor<T>::zeros_like(a);
  grad_b = Tensor<T>::zeros_like(b);
  for (int ni = 0; ni < a.n; ++ni) {
    for (int ci = 0; ci < a.c; ++ci) {
      const T wv = w.at(ni, ci, 0, 0);
      const T* ap = a.plane(ni, ci);
      const T* bp = b.plane(ni, ci);
      const T* gp = grad_out.plane(ni, ci);
      T* gap = grad_a.plane(ni, ci);
      T* gbp = grad_b.plane(ni, ci);
      T acc = T(0);
      for (std::int64_t i = 0; i < a.plane_size(); ++i) {
        acc += gp[i] * (ap[i] - bp[i]);
        gap[i] = wv * gp[i];
        gbp[i] = (T(1) - wv) * gp[i];
      }
      grad_w.at(ni, ci, 0, 0) = acc;
    }
  }
}

template <typename T>
Tensor<T> bicubic_up2_forward(const Tensor<T>& in) {
  const int out_h = in.h * 2;
  const int out_w = in.w * 2;
  Tensor<T> out(in.n, in.c, out_h, out_w);

  std::vector<std::array<int, 4>> xpos(out_w), ypos(out_h);
  std::vector<std::array<double, 4>> xwgt(out_w), ywgt(out_h);
  for (int x = 0; x < out_w; ++x) bicubic_taps(x, 0.5, in.w, xpos[x].data(), xwgt[x].data());
  for (int y = 0; y < out_h; ++y) bicubic_taps(y, 0.5, in.h, ypos[y].data(), ywgt[y].data());

  parallel_for(0, static_cast<std::int64_t>(in.n) * in.c, [&](std::int64_t idx) {
    const T* inp = in.data.data() + idx * in.plane_size();
    T* outp = out.data.data() + idx * out.plane_size();
    std::vector<T> mid(static_cast<std::size_t>(in.h) * out_w);
    for (int y = 0; y < in.h; ++y) {
      const T* row = inp + static_cast<std::size_t>(y) * in.w;
      T* mrow = mid.data() + static_cast<std::size_t>(y) * out_w;
      for (int x = 0; x < out_w; ++x) {
        T acc = T(0);
        for (int j = 0; j < 4; ++j) acc += T(xwgt[x][j]) * row[xpos[x][j]];
        mrow[x] = acc;
      }
    }
    for (int y = 0; y < out_h; ++y) {
      T* orow = outp + static_cast<std::size_t>(y) * out_w;
      for (int x = 0; x < out_w; ++x) {
        T acc = T(0);
        for (int j = 0; j < 4; ++j) {
          acc += T(ywgt[y][j]) * mid[static_cast<std::size_t>(ypos[y][j]) * out_w + x];
        }
        orow[x] = acc;
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> bicubic_up2_backward(const Tensor<T>& grad_out) {
  const int in_h = grad_out.h / 2;
  const int in_w = grad_out.w / 2;
  Tensor<T> grad_in(grad_out.n, grad_out.c, in_h, in_w);

  std::vector<std::array<int, 4>> xpos(grad_out.w), ypos(grad_out.h);
  std::vector<std::array<double, 4>> xwgt(grad_out.w), ywgt(grad_out.h);
  for (int x = 0; x < grad_out.w; ++x) bicubic_taps(x, 0.5, in_w, xpos[x].data(), xwgt[x].data());
  for (int y = 0; y < grad_out.h; ++y) bicubic_taps(y, 0.5, in_h, ypos[y].data(), ywgt[y].data());

  parallel_for(0, static_cast<std::int64_t>(grad_out.n) * grad_out.c,
               [&](std::int64_t idx) {
                 const T* gout = grad_out.data.data() + idx * grad_out.plane_size();
                 T* gin = grad_in.data.data() + idx * grad_in.plane_size();
                 std::vector<T> gmid(static_cast<std::size_t>(in_h) * grad_out.w, T(0));
                 for (int y = 0; y < grad_out.h; ++y) {
                   const T* grow = gout + static_cast<std::size_t>(y) * grad_out.w;
                   for (int j = 0; j < 4; ++j) {
                     T* mrow = gmid.data() + static_cast<std::size_t>(ypos[y][j]) * grad_out.w;
                     const T wv = T(ywgt[y][j]);
                     for (int x = 0; x < grad_out.w; ++x) mrow[x] += wv * grow[x];
                   }
                 }
                 for (int y = 0; y < in_h; ++y) {
                   const T* mrow = gmid.data() + static_cast<std::size_t>(y) * grad_out.w;
                   T* grow = gin + static_cast<std::size_t>(y) * in_w;
                   for (int x = 0; x < grad_out.w; ++x) {
                     for (int j = 0; j < 4; ++j) {
                       grow[xpos[x][j]] += T(xwgt[x][j]) * mrow[x];
                     }
                   }
                 }
               });
  return grad_in;
}

#define NEID_INSTANTIATE_OPS(T)                                                   \
  template Tensor<T> conv3x3_forward<T>(const Tensor<T>&, const Tensor<T>&,      \
                                        const std::vector<T>&, int);             \
  template void conv3x3_backward<T>(const Tensor<T>&, const Tensor<T>&,          \
                                    const Tensor<T>&, int, Tensor<T>*,           \
                                    Tensor<T>*, std::vector<T>*);                \
  template Tensor<T> tconv2x2_forward<T>(const Tensor<T>&, const Tensor<T>&,     \
                                         const std::vector<T>&);                 \
  template void tconv2x2_backward<T>(const Tensor<T>&, const Tensor<T>&,         \
                                     const Tensor<T>&, Tensor<T>*, Tensor<T>*,   \
                                     std::vector<T>*);                           \
  template Tensor<T> maxpool2_forward<T>(const Tensor<T>&,                       \
                                         std::vector<std::int32_t>&);            \
  template Tensor<T> maxpool2_backward<T>(const Tensor<T>&,                      \
                                          const std::vector<std::int32_t>&, int, \
                                          int);                                  \
  template Tensor<T> relu<T>(const Tensor<T>&);                                  \
  template Tensor<T> relu_backward<T>(const Tensor<T>&, const Tensor<T>&);       \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                               \
  template Tensor<T> sigmoid_backward<T>(const Tensor<T>&, const Tensor<T>&);    \
  template Tensor<T> pixel_shuffle<T>(const Tensor<T>&, int);                    \
  template Tensor<T> pixel_unshuffle<T>(const Tensor<T>&, int);                  \
  template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);     \
  template void split_channels<T>(const Tensor<T>&, int, Tensor<T>&, Tensor<T>&);\
  template Tensor<T> linear_forward<T>(const Tensor<T>&, const Tensor<T>&,       \
                                       const std::vector<T>&);                   \
  template void linear_backward<T>(const Tensor<T>&, const Tensor<T>&,           \
                                   const Tensor<T>&, Tensor<T>*, Tensor<T>*,     \
                                   std::vector<T>*);                             \
  template Tensor<T> global_avg_pool<T>(const Tensor<T>&);                       \
  template Tensor<T> global_avg_pool_backward<T>(const Tensor<T>&, int, int);    \
  template Tensor<T> channel_blend<T>(const Tensor<T>&, const Tensor<T>&,        \
                                      const Tensor<T>&);                         \
  template void channel_blend_backward<T>(const Tensor<T>&, const Tensor<T>&,    \
                                          const Tensor<T>&, const Tensor<T>&,    \
                                          Tensor<T>&, Tensor<T>&, Tensor<T>&);   \
  template Tensor<T> bicubic_up2_forward<T>(const Tensor<T>&);                   \
  template Tensor<T> bicubic_up2_backward<T>(const Tensor<T>&);

NEID_INSTANTIATE_OPS(float)
NEID_INSTANTIATE_OPS(double)

#undef NEID_INSTANTIATE_OPS

}  // namespace neid::nn
