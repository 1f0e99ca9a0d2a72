#include "deunet/deform.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace deunet {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// The four taps of a bilinear sample on a zero-padded plane. Taps outside the
// image get weight contributions but read as zero, so they are dropped.
struct Taps {
  int n = 0;
  std::int64_t idx[4];
  double w[4];
  // spatial derivative bookkeeping: value = sum w_i * f_i,
  // d/dy = sum dwy_i * f_i, d/dx = sum dwx_i * f_i
  double dwy[4];
  double dwx[4];
};

inline Taps bilinear_taps(int h, int w, double y, double x) {
  Taps t;
  // beyond this band every tap is outside; also guards the int cast
  if (!(y >= -1.0 && y <= static_cast<double>(h) && x >= -1.0 && x <= static_cast<double>(w)))
    return t;
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const double wy = y - y0;
  const double wx = x - x0;
  const int ys[2] = {y0, y0 + 1};
  const int xs[2] = {x0, x0 + 1};
  const double fy[2] = {1.0 - wy, wy};
  const double fx[2] = {1.0 - wx, wx};
  const double gy[2] = {-1.0, 1.0};  // d(fy)/dy
  for (int a = 0; a < 2; ++a) {
    if (ys[a] < 0 || ys[a] >= h) continue;
    for (int b = 0; b < 2; ++b) {
      if (xs[b] < 0 || xs[b] >= w) continue;
      t.idx[t.n] = static_cast<std::int64_t>(ys[a]) * w + xs[b];
      t.w[t.n] = fy[a] * fx[b];
      t.dwy[t.n] = gy[a] * fx[b];
      t.dwx[t.n] = fy[a] * gy[b];
      ++t.n;
    }
  }
  return t;
}

// Shared kernel: `groups` offset groups over C input channels; channel c uses
// group c * groups / C. groups == 1 is the single-frame deformable conv,
// groups == C the temporal aggregation conv (one frame per channel).
Tensor deform_forward(const Tensor& input, const Tensor& offsets, const Tensor& weight,
                      int groups, const char* opname) {
  require(input.rank() == 3, std::string(opname) + ": input must be [C,H,W]");
  require(weight.rank() == 4, std::string(opname) + ": weight must be [Cout,C,S,S]");
  const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int cout = weight.dim(0), s = weight.dim(2);
  require(weight.dim(1) == c,
          std::string(opname) + ": weight channel count " + std::to_string(weight.dim(1)) +
              " does not match input " + std::to_string(c));
  require(weight.dim(3) == s && s % 2 == 1, std::string(opname) + ": kernel must be square, odd");
  require(c % groups == 0, std::string(opname) + ": channels not divisible into groups");
  require(offsets.rank() == 3 && offsets.dim(0) == offset_channels(groups, s),
          std::string(opname) + ": offset field must have " +
              std::to_string(offset_channels(groups, s)) + " channels, got " +
              offsets.shape_str());
  require(offsets.dim(1) == h && offsets.dim(2) == w,
          std::string(opname) + ": offset spatial size must equal input spatial size");

  const int pad = (s - 1) / 2;
  const int ss = s * s;
  const int gsize = c / groups;
  Tensor out({cout, h, w});
  std::vector<double> v(static_cast<size_t>(c) * ss);  // sampled window per position
  const double* ip = input.ptr();
  const double* op = offsets.ptr();
  const double* wp = weight.ptr();
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::int64_t pix = static_cast<std::int64_t>(y) * w + x;
      for (int g = 0; g < groups; ++g) {
        const double* og = op + static_cast<std::int64_t>(g) * 2 * ss * plane;
        for (int sidx = 0; sidx < ss; ++sidx) {
          const double dy = og[(2 * sidx) * plane + pix];
          const double dx = og[(2 * sidx + 1) * plane + pix];
          const double py = y + sidx / s - pad + dy;
          const double px = x + sidx % s - pad + dx;
          const Taps taps = bilinear_taps(h, w, py, px);
          for (int cc = g * gsize; cc < (g + 1) * gsize; ++cc) {
            const double* iplane = ip + static_cast<std::int64_t>(cc) * plane;
            double acc = 0.0;
            for (int ti = 0; ti < taps.n; ++ti) acc += taps.w[ti] * iplane[taps.idx[ti]];
            v[static_cast<size_t>(cc) * ss + sidx] = acc;
          }
        }
      }
      for (int co = 0; co < cout; ++co) {
        const double* wrow = wp + static_cast<std::int64_t>(co) * c * ss;
        double acc = 0.0;
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(c) * ss; ++i)
          acc += wrow[i] * v[static_cast<size_t>(i)];
        out.ptr()[static_cast<std::int64_t>(co) * plane + pix] = acc;
      }
    }
  }
  return out;
}

DeformConvGrads deform_backward(const Tensor& input, const Tensor& offsets,
                                const Tensor& weight, const Tensor& grad_out, int groups,
                                const char* opname) {
  const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int cout = weight.dim(0), s = weight.dim(2);
  require(grad_out.rank() == 3 && grad_out.dim(0) == cout && grad_out.dim(1) == h &&
              grad_out.dim(2) == w,
          std::string(opname) + "_backward: grad_out shape mismatch");

  const int pad = (s - 1) / 2;
  const int ss = s * s;
  const int gsize = c / groups;
  DeformConvGrads g{Tensor(input.shape), Tensor(offsets.shape), Tensor(weight.shape)};
  const double* ip = input.ptr();
  const double* op = offsets.ptr();
  const double* wp = weight.ptr();
  const double* gp = grad_out.ptr();
  double* gip = g.input.ptr();
  double* gop = g.offsets.ptr();
  double* gwp = g.weight.ptr();
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  std::vector<double> u(static_cast<size_t>(c) * ss);  // upstream folded with weights

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::int64_t pix = static_cast<std::int64_t>(y) * w + x;
      // u[c,s] = sum_co gout[co] * w[co,c,s]
      std::fill(u.begin(), u.end(), 0.0);
      for (int co = 0; co < cout; ++co) {
        const double go = gp[static_cast<std::int64_t>(co) * plane + pix];
        if (go == 0.0) continue;
        const double* wrow = wp + static_cast<std::int64_t>(co) * c * ss;
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(c) * ss; ++i)
          u[static_cast<size_t>(i)] += go * wrow[i];
      }
      for (int g2 = 0; g2 < groups; ++g2) {
        const double* og = op + static_cast<std::int64_t>(g2) * 2 * ss * plane;
        double* gog = gop + static_cast<std::int64_t>(g2) * 2 * ss * plane;
        for (int sidx = 0; sidx < ss; ++sidx) {
          const double dy = og[(2 * sidx) * plane + pix];
          const double dx = og[(2 * sidx + 1) * plane + pix];
          const double py = y + sidx / s - pad + dy;
          const double px = x + sidx % s - pad + dx;
          const Taps taps = bilinear_taps(h, w, py, px);
          double acc_dy = 0.0, acc_dx = 0.0;
          for (int cc = g2 * gsize; cc < (g2 + 1) * gsize; ++cc) {
            const double uv = u[static_cast<size_t>(cc) * ss + sidx];
            const double* iplane = ip + static_cast<std::int64_t>(cc) * plane;
            double* giplane = gip + static_cast<std::int64_t>(cc) * plane;
            double sampled = 0.0;
            for (int ti = 0; ti < taps.n; ++ti) {
              const double f = iplane[taps.idx[ti]];
              sampled += taps.w[ti] * f;
              giplane[taps.idx[ti]] += uv * taps.w[ti];
              acc_dy += uv * taps.dwy[ti] * f;
              acc_dx += uv * taps.dwx[ti] * f;
            }
            // grad_weight needs the sampled value once per (co,c,s)
            for (int co = 0; co < cout; ++co) {
              const double go = gp[static_cast<std::int64_t>(co) * plane + pix];
              if (go == 0.0) continue;
              gwp[(static_cast<std::int64_t>(co) * c + cc) * ss + sidx] += go * sampled;
            }
          }
          gog[(2 * sidx) * plane + pix] += acc_dy;
          gog[(2 * sidx + 1) * plane + pix] += acc_dx;
        }
      }
    }
  }
  return g;
}

}  // namespace

int offset_channels(int groups, int S) { return groups * 2 * S * S; }

double bilinear_sample(const Tensor& feature, double y, double x) {
  require(feature.rank() == 2, "bilinear_sample: feature must be [H,W]");
  const Taps t = bilinear_taps(feature.dim(0), feature.dim(1), y, x);
  double acc = 0.0;
  for (int i = 0; i < t.n; ++i) acc += t.w[i] * feature.ptr()[t.idx[i]];
  return acc;
}

BilinearGrad bilinear_sample_backward(const Tensor& feature, double y, double x,
                                      double grad_out, Tensor& grad_feature) {
  require(feature.rank() == 2, "bilinear_sample_backward: feature must be [H,W]");
  require(grad_feature.same_shape(feature),
          "bilinear_sample_backward: grad_feature shape mismatch");
  const Taps t = bilinear_taps(feature.dim(0), feature.dim(1), y, x);
  BilinearGrad g;
  for (int i = 0; i < t.n; ++i) {
    const double f = feature.ptr()[t.idx[i]];
    grad_feature.ptr()[t.idx[i]] += grad_out * t.w[i];
    g.dy += grad_out * t.dwy[i] * f;
    g.dx += grad_out * t.dwx[i] * f;
  }
  return g;
}

Tensor deform_conv2d(const Tensor& input, const Tensor& offsets, const Tensor& weight) {
  return deform_forward(input, offsets, weight, 1, "deform_conv2d");
}

Tensor temporal_deform_agg_conv(const Tensor& clip, const Tensor& offsets,
                                const Tensor& weight) {
  require(clip.rank() == 3 && clip.dim(0) % 2 == 1,
          "temporal_deform_agg_conv: clip must be [T,H,W] with T odd");
  return deform_forward(clip, offsets, weight, clip.dim(0), "temporal_deform_agg_conv");
}

DeformConvGrads deform_conv2d_backward(const Tensor& input, const Tensor& offsets,
                                       const Tensor& weight, const Tensor& grad_out) {
  return deform_backward(input, offsets, weight, grad_out, 1, "deform_conv2d");
}

DeformConvGrads temporal_deform_agg_conv_backward(const Tensor& clip, const Tensor& offsets,
                                                  const Tensor& weight,
                                                  const Tensor& grad_out) {
  return deform_backward(clip, offsets, weight, grad_out, clip.dim(0),
                         "temporal_deform_agg_conv");
}

}  // namespace deunet
