#include "deunet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace deunet {

namespace {
void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}
}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, int stride, int padding) {
  require(input.rank() == 3, "conv2d: input must be [Cin,H,W], got " + input.shape_str());
  require(weight.rank() == 4, "conv2d: weight must be [Cout,Cin,S,S], got " + weight.shape_str());
  const int cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int cout = weight.dim(0), s = weight.dim(2);
  require(weight.dim(1) == cin, "conv2d: input channels " + std::to_string(cin) +
                                    " do not match weight Cin " + std::to_string(weight.dim(1)));
  require(weight.dim(3) == s, "conv2d: kernel must be square");
  require(s % 2 == 1, "conv2d: kernel size must be odd");
  require(padding >= 0 && stride >= 1, "conv2d: padding >= 0 and stride >= 1 required");
  const int oh = (h + 2 * padding - s) / stride + 1;
  const int ow = (w + 2 * padding - s) / stride + 1;
  require(oh >= 1 && ow >= 1, "conv2d: kernel larger than padded input");

  Tensor out({cout, oh, ow});
  const double* ip = input.ptr();
  const double* wp = weight.ptr();
  double* op = out.ptr();
  for (int co = 0; co < cout; ++co) {
    for (int ci = 0; ci < cin; ++ci) {
      const double* iplane = ip + static_cast<size_t>(ci) * h * w;
      const double* wk = wp + (static_cast<size_t>(co) * cin + ci) * s * s;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ky = 0; ky < s; ++ky) {
          const int iy = oy * stride - padding + ky;
          if (iy < 0 || iy >= h) continue;
          const double* irow = iplane + static_cast<size_t>(iy) * w;
          const double* wrow = wk + static_cast<size_t>(ky) * s;
          double* orow = op + (static_cast<size_t>(co) * oh + oy) * ow;
          for (int kx = 0; kx < s; ++kx) {
            const double wv = wrow[kx];
            if (wv == 0.0) continue;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride - padding + kx;
              if (ix < 0 || ix >= w) continue;
              orow[ox] += wv * irow[ix];
            }
          }
        }
      }
    }
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weight, int stride,
                            int padding, const Tensor& grad_out) {
  const int cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int cout = weight.dim(0), s = weight.dim(2);
  const int oh = (h + 2 * padding - s) / stride + 1;
  const int ow = (w + 2 * padding - s) / stride + 1;
  require(grad_out.rank() == 3 && grad_out.dim(0) == cout && grad_out.dim(1) == oh &&
              grad_out.dim(2) == ow,
          "conv2d_backward: grad_out shape mismatch");

  Conv2dGrads g{Tensor(input.shape), Tensor(weight.shape)};
  const double* ip = input.ptr();
  const double* wp = weight.ptr();
  const double* gp = grad_out.ptr();
  double* gip = g.input.ptr();
  double* gwp = g.weight.ptr();
  for (int co = 0; co < cout; ++co) {
    for (int ci = 0; ci < cin; ++ci) {
      const double* iplane = ip + static_cast<size_t>(ci) * h * w;
      double* giplane = gip + static_cast<size_t>(ci) * h * w;
      const double* wk = wp + (static_cast<size_t>(co) * cin + ci) * s * s;
      double* gwk = gwp + (static_cast<size_t>(co) * cin + ci) * s * s;
      for (int oy = 0; oy < oh; ++oy) {
        const double* grow = gp + (static_cast<size_t>(co) * oh + oy) * ow;
        for (int ky = 0; ky < s; ++ky) {
          const int iy = oy * stride - padding + ky;
          if (iy < 0 || iy >= h) continue;
          const double* irow = iplane + static_cast<size_t>(iy) * w;
          double* girow = giplane + static_cast<size_t>(iy) * w;
          for (int kx = 0; kx < s; ++kx) {
            const double wv = wk[ky * s + kx];
            double gw_acc = 0.0;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride - padding + kx;
              if (ix < 0 || ix >= w) continue;
              const double go = grow[ox];
              girow[ix] += wv * go;
              gw_acc += irow[ix] * go;
            }
            gwk[ky * s + kx] += gw_acc;
          }
        }
      }
    }
  }
  return g;
}

MaxPoolOut maxpool2d(const Tensor& input, int k) {
  require(input.rank() == 3, "maxpool2d: input must be [C,H,W]");
  require(k >= 1, "maxpool2d: k must be >= 1");
  const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
  require(h % k == 0 && w % k == 0,
          "maxpool2d: spatial size " + input.shape_str() + " not divisible by k=" + std::to_string(k));
  const int oh = h / k, ow = w / k;
  MaxPoolOut r{Tensor({c, oh, ow}), {}};
  r.argmax.resize(static_cast<size_t>(c) * oh * ow);
  const double* ip = input.ptr();
  double* op = r.output.ptr();
  std::int64_t oi = 0;
  for (int ci = 0; ci < c; ++ci) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox, ++oi) {
        double best = -std::numeric_limits<double>::infinity();
        std::int64_t best_idx = -1;
        for (int dy = 0; dy < k; ++dy) {
          for (int dx = 0; dx < k; ++dx) {
            const std::int64_t idx =
                (static_cast<std::int64_t>(ci) * h + (oy * k + dy)) * w + (ox * k + dx);
            const double v = ip[idx];
            if (v > best) {  // strict: first row-major max wins
              best = v;
              best_idx = idx;
            }
          }
        }
        op[oi] = best;
        r.argmax[static_cast<size_t>(oi)] = best_idx;
      }
    }
  }
  return r;
}

Tensor maxpool2d_backward(const std::vector<int>& input_shape,
                          const std::vector<std::int64_t>& argmax, const Tensor& grad_out) {
  require(argmax.size() == static_cast<size_t>(grad_out.numel()),
          "maxpool2d_backward: argmax record does not match grad_out");
  Tensor gin(input_shape);
  double* gp = gin.ptr();
  const double* go = grad_out.ptr();
  for (size_t i = 0; i < argmax.size(); ++i) gp[argmax[i]] += go[i];
  return gin;
}

Tensor deconv2d(const Tensor& input, const Tensor& weight, int stride) {
  require(input.rank() == 3, "deconv2d: input must be [Cin,H,W]");
  require(weight.rank() == 4, "deconv2d: weight must be [Cin,Cout,k,k]");
  const int cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int cout = weight.dim(1), k = weight.dim(2);
  require(weight.dim(0) == cin, "deconv2d: weight Cin mismatch");
  require(weight.dim(3) == k, "deconv2d: kernel must be square");
  require(stride == k, "deconv2d: only the non-overlapping case stride == k is supported");

  Tensor out({cout, h * k, w * k});
  const double* ip = input.ptr();
  const double* wp = weight.ptr();
  double* op = out.ptr();
  const int oh = h * k, ow = w * k;
  for (int ci = 0; ci < cin; ++ci) {
    for (int co = 0; co < cout; ++co) {
      const double* iplane = ip + static_cast<size_t>(ci) * h * w;
      const double* wk = wp + (static_cast<size_t>(ci) * cout + co) * k * k;
      double* oplane = op + static_cast<size_t>(co) * oh * ow;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double v = iplane[y * w + x];
          if (v == 0.0) continue;
          for (int ky = 0; ky < k; ++ky) {
            double* orow = oplane + static_cast<size_t>(y * k + ky) * ow + x * k;
            const double* wrow = wk + static_cast<size_t>(ky) * k;
            for (int kx = 0; kx < k; ++kx) orow[kx] += v * wrow[kx];
          }
        }
      }
    }
  }
  return out;
}

Deconv2dGrads deconv2d_backward(const Tensor& input, const Tensor& weight, int stride,
                                const Tensor& grad_out) {
  const int cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int cout = weight.dim(1), k = weight.dim(2);
  require(stride == k, "deconv2d_backward: stride must equal k");
  require(grad_out.rank() == 3 && grad_out.dim(0) == cout && grad_out.dim(1) == h * k &&
              grad_out.dim(2) == w * k,
          "deconv2d_backward: grad_out shape mismatch");

  Deconv2dGrads g{Tensor(input.shape), Tensor(weight.shape)};
  const double* ip = input.ptr();
  const double* wp = weight.ptr();
  const double* gp = grad_out.ptr();
  double* gip = g.input.ptr();
  double* gwp = g.weight.ptr();
  const int ow = w * k, oh = h * k;
  for (int ci = 0; ci < cin; ++ci) {
    for (int co = 0; co < cout; ++co) {
      const double* iplane = ip + static_cast<size_t>(ci) * h * w;
      double* giplane = gip + static_cast<size_t>(ci) * h * w;
      const double* wk = wp + (static_cast<size_t>(ci) * cout + co) * k * k;
      double* gwk = gwp + (static_cast<size_t>(ci) * cout + co) * k * k;
      const double* gplane = gp + static_cast<size_t>(co) * oh * ow;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double v = iplane[y * w + x];
          double gi_acc = 0.0;
          for (int ky = 0; ky < k; ++ky) {
            const double* grow = gplane + static_cast<size_t>(y * k + ky) * ow + x * k;
            for (int kx = 0; kx < k; ++kx) {
              gi_acc += wk[ky * k + kx] * grow[kx];
              gwk[ky * k + kx] += v * grow[kx];
            }
          }
          giplane[y * w + x] += gi_acc;
        }
      }
    }
  }
  return g;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul: operands must be rank 2");
  require(a.dim(1) == b.dim(0), "matmul: inner dimensions " + a.shape_str() + " x " +
                                    b.shape_str() + " do not agree");
  const int p = a.dim(0), q = a.dim(1), r = b.dim(1);
  Tensor out({p, r});
  for (int i = 0; i < p; ++i) {
    for (int kq = 0; kq < q; ++kq) {
      const double av = a.at(i, kq);
      if (av == 0.0) continue;
      const double* brow = b.ptr() + static_cast<size_t>(kq) * r;
      double* orow = out.ptr() + static_cast<size_t>(i) * r;
      for (int j = 0; j < r; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor transpose2d(const Tensor& a) {
  require(a.rank() == 2, "transpose2d: input must be rank 2");
  Tensor t({a.dim(1), a.dim(0)});
  for (int i = 0; i < a.dim(0); ++i)
    for (int j = 0; j < a.dim(1); ++j) t.at(j, i) = a.at(i, j);
  return t;
}

MatmulGrads matmul_backward(const Tensor& a, const Tensor& b, const Tensor& grad_out) {
  const int p = a.dim(0), q = a.dim(1), r = b.dim(1);
  require(grad_out.rank() == 2 && grad_out.dim(0) == p && grad_out.dim(1) == r,
          "matmul_backward: grad_out shape mismatch");
  MatmulGrads g{Tensor({p, q}), Tensor({q, r})};
  // dA = G * B^T, dB = A^T * G
  for (int i = 0; i < p; ++i) {
    for (int kq = 0; kq < q; ++kq) {
      const double* brow = b.ptr() + static_cast<size_t>(kq) * r;
      const double* grow = grad_out.ptr() + static_cast<size_t>(i) * r;
      double acc = 0.0;
      for (int j = 0; j < r; ++j) acc += grow[j] * brow[j];
      g.a.at(i, kq) = acc;
    }
  }
  for (int kq = 0; kq < q; ++kq) {
    for (int i = 0; i < p; ++i) {
      const double av = a.at(i, kq);
      if (av == 0.0) continue;
      const double* grow = grad_out.ptr() + static_cast<size_t>(i) * r;
      double* brow = g.b.ptr() + static_cast<size_t>(kq) * r;
      for (int j = 0; j < r; ++j) brow[j] += av * grow[j];
    }
  }
  return g;
}

Tensor softmax_rows(const Tensor& x) {
  require(x.rank() == 2, "softmax_rows: input must be rank 2");
  const int p = x.dim(0), q = x.dim(1);
  Tensor y({p, q});
  for (int i = 0; i < p; ++i) {
    const double* xr = x.ptr() + static_cast<size_t>(i) * q;
    double* yr = y.ptr() + static_cast<size_t>(i) * q;
    double m = xr[0];
    for (int j = 1; j < q; ++j) m = std::max(m, xr[j]);
    double sum = 0.0;
    for (int j = 0; j < q; ++j) {
      yr[j] = std::exp(xr[j] - m);
      sum += yr[j];
    }
    for (int j = 0; j < q; ++j) yr[j] /= sum;
  }
  return y;
}

Tensor softmax_rows_backward(const Tensor& y, const Tensor& grad_out) {
  require(y.same_shape(grad_out), "softmax_rows_backward: shape mismatch");
  const int p = y.dim(0), q = y.dim(1);
  Tensor gx({p, q});
  for (int i = 0; i < p; ++i) {
    const double* yr = y.ptr() + static_cast<size_t>(i) * q;
    const double* gr = grad_out.ptr() + static_cast<size_t>(i) * q;
    double dot = 0.0;
    for (int j = 0; j < q; ++j) dot += yr[j] * gr[j];
    double* gxr = gx.ptr() + static_cast<size_t>(i) * q;
    for (int j = 0; j < q; ++j) gxr[j] = yr[j] * (gr[j] - dot);
  }
  return gx;
}

Tensor relu(const Tensor& x) {
  Tensor y(x.shape);
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    const double v = x.data[static_cast<size_t>(i)];
    y.data[static_cast<size_t>(i)] = v > 0.0 ? v : 0.0;
  }
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
  require(x.same_shape(grad_out), "relu_backward: shape mismatch");
  Tensor g(x.shape);
  for (std::int64_t i = 0; i < x.numel(); ++i)
    g.data[static_cast<size_t>(i)] =
        x.data[static_cast<size_t>(i)] > 0.0 ? grad_out.data[static_cast<size_t>(i)] : 0.0;
  return g;
}

Tensor add_channel_bias(const Tensor& input, const Tensor& bias) {
  require(input.rank() == 3, "add_channel_bias: input must be [C,H,W]");
  require(bias.rank() == 1 && bias.dim(0) == input.dim(0),
          "add_channel_bias: bias length must equal channel count");
  Tensor out = input;
  const int c = input.dim(0);
  const std::int64_t plane = static_cast<std::int64_t>(input.dim(1)) * input.dim(2);
  for (int ci = 0; ci < c; ++ci) {
    const double b = bias.at(ci);
    double* p = out.ptr() + static_cast<std::int64_t>(ci) * plane;
    for (std::int64_t i = 0; i < plane; ++i) p[i] += b;
  }
  return out;
}

Tensor channel_bias_backward(const Tensor& grad_out) {
  const int c = grad_out.dim(0);
  const std::int64_t plane = static_cast<std::int64_t>(grad_out.dim(1)) * grad_out.dim(2);
  Tensor gb({c});
  for (int ci = 0; ci < c; ++ci) {
    const double* p = grad_out.ptr() + static_cast<std::int64_t>(ci) * plane;
    double acc = 0.0;
    for (std::int64_t i = 0; i < plane; ++i) acc += p[i];
    gb.at(ci) = acc;
  }
  return gb;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require(a.rank() == 3 && b.rank() == 3 && a.dim(1) == b.dim(1) && a.dim(2) == b.dim(2),
          "concat_channels: spatial sizes must match");
  Tensor out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.numel());
  return out;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& x, int c_first) {
  require(x.rank() == 3 && c_first > 0 && c_first < x.dim(0),
          "split_channels: invalid split point");
  Tensor a({c_first, x.dim(1), x.dim(2)});
  Tensor b({x.dim(0) - c_first, x.dim(1), x.dim(2)});
  std::copy(x.data.begin(), x.data.begin() + a.numel(), a.data.begin());
  std::copy(x.data.begin() + a.numel(), x.data.end(), b.data.begin());
  return {std::move(a), std::move(b)};
}

}  // namespace deunet
