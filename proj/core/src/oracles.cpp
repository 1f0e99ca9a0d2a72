#include "deunet/oracles.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "deunet/ops.hpp"
#include "deunet/unet.hpp"

namespace deunet {
namespace oracle {

Tensor conv2d_direct(const Tensor& input, const Tensor& weight, int stride, int padding) {
  const int cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int cout = weight.dim(0), s = weight.dim(2);
  const int oh = (h + 2 * padding - s) / stride + 1;
  const int ow = (w + 2 * padding - s) / stride + 1;
  Tensor out({cout, oh, ow});
  for (int co = 0; co < cout; ++co)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (int ci = 0; ci < cin; ++ci)
          for (int ky = 0; ky < s; ++ky)
            for (int kx = 0; kx < s; ++kx) {
              const int iy = oy * stride - padding + ky;
              const int ix = ox * stride - padding + kx;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              acc += weight.at(co, ci, ky, kx) * input.at(ci, iy, ix);
            }
        out.at(co, oy, ox) = acc;
      }
  return out;
}

Tensor matmul_direct(const Tensor& a, const Tensor& b) {
  Tensor out({a.dim(0), b.dim(1)});
  for (int i = 0; i < a.dim(0); ++i)
    for (int j = 0; j < b.dim(1); ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.dim(1); ++k) acc += a.at(i, k) * b.at(k, j);
      out.at(i, j) = acc;
    }
  return out;
}

Tensor maxpool_direct(const Tensor& input, int k) {
  const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
  Tensor out({c, h / k, w / k});
  for (int ci = 0; ci < c; ++ci)
    for (int oy = 0; oy < h / k; ++oy)
      for (int ox = 0; ox < w / k; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx)
            best = std::max(best, input.at(ci, oy * k + dy, ox * k + dx));
        out.at(ci, oy, ox) = best;
      }
  return out;
}

double bilinear_direct(const Tensor& feature, double y, double x) {
  const int h = feature.dim(0), w = feature.dim(1);
  if (y < -1.0 || y > static_cast<double>(h) || x < -1.0 || x > static_cast<double>(w))
    return 0.0;
  const double y0 = std::floor(y), x0 = std::floor(x);
  double acc = 0.0;
  for (int a = 0; a <= 1; ++a)
    for (int b = 0; b <= 1; ++b) {
      const int yy = static_cast<int>(y0) + a;
      const int xx = static_cast<int>(x0) + b;
      if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;  // zero padded
      const double wy = a == 0 ? (y0 + 1.0 - y) : (y - y0);
      const double wx = b == 0 ? (x0 + 1.0 - x) : (x - x0);
      acc += wy * wx * feature.at(yy, xx);
    }
  return acc;
}

namespace {
Tensor plane_of(const Tensor& stack, int c) {
  Tensor p({stack.dim(1), stack.dim(2)});
  std::copy_n(stack.data.begin() + static_cast<std::int64_t>(c) * p.numel(), p.numel(),
              p.data.begin());
  return p;
}
}  // namespace

Tensor temporal_deform_direct(const Tensor& clip, const Tensor& offsets,
                              const Tensor& weight) {
  const int t = clip.dim(0), h = clip.dim(1), w = clip.dim(2);
  const int cout = weight.dim(0), s = weight.dim(2);
  const int pad = (s - 1) / 2;
  Tensor out({cout, h, w});
  std::vector<Tensor> frames;
  for (int f = 0; f < t; ++f) frames.push_back(plane_of(clip, f));
  for (int co = 0; co < cout; ++co)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int f = 0; f < t; ++f)
          for (int ky = 0; ky < s; ++ky)
            for (int kx = 0; kx < s; ++kx) {
              const int sidx = ky * s + kx;
              const double dy = offsets.at(f * 2 * s * s + 2 * sidx, y, x);
              const double dx = offsets.at(f * 2 * s * s + 2 * sidx + 1, y, x);
              acc += weight.at(co, f, ky, kx) *
                     bilinear_direct(frames[static_cast<size_t>(f)], y + ky - pad + dy,
                                     x + kx - pad + dx);
            }
        out.at(co, y, x) = acc;
      }
  return out;
}

Tensor deform_conv_direct(const Tensor& input, const Tensor& offsets, const Tensor& weight) {
  const int cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int cout = weight.dim(0), s = weight.dim(2);
  const int pad = (s - 1) / 2;
  Tensor out({cout, h, w});
  std::vector<Tensor> planes;
  for (int c = 0; c < cin; ++c) planes.push_back(plane_of(input, c));
  for (int co = 0; co < cout; ++co)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int ci = 0; ci < cin; ++ci)
          for (int ky = 0; ky < s; ++ky)
            for (int kx = 0; kx < s; ++kx) {
              const int sidx = ky * s + kx;
              const double dy = offsets.at(2 * sidx, y, x);
              const double dx = offsets.at(2 * sidx + 1, y, x);
              acc += weight.at(co, ci, ky, kx) *
                     bilinear_direct(planes[static_cast<size_t>(ci)], y + ky - pad + dy,
                                     x + kx - pad + dx);
            }
        out.at(co, y, x) = acc;
      }
  return out;
}

Tensor shift_zero_pad(const Tensor& plane, int dy, int dx) {
  const int h = plane.dim(0), w = plane.dim(1);
  Tensor out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int sy = y + dy, sx = x + dx;
      out.at(y, x) = (sy >= 0 && sy < h && sx >= 0 && sx < w) ? plane.at(sy, sx) : 0.0;
    }
  return out;
}

Tensor channel_attention_direct(const Tensor& o, const Tensor& bm, const Tensor& cm,
                                const Tensor& dm, double alpha) {
  const int n = bm.dim(0), m = bm.dim(1);
  Tensor z = o;
  for (int j = 0; j < n; ++j) {
    // p_ji over i, stabilized the same definitional way
    std::vector<double> logits(static_cast<size_t>(n));
    double mx = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      double dot = 0.0;
      for (int q = 0; q < m; ++q) dot += bm.at(i, q) * cm.at(j, q);
      logits[static_cast<size_t>(i)] = dot;
      mx = std::max(mx, dot);
    }
    double denom = 0.0;
    for (int i = 0; i < n; ++i) denom += std::exp(logits[static_cast<size_t>(i)] - mx);
    for (int q = 0; q < m; ++q) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i)
        acc += std::exp(logits[static_cast<size_t>(i)] - mx) / denom * dm.at(i, q);
      z.data[static_cast<size_t>(j) * m + q] += alpha * acc;
    }
  }
  return z;
}

double dice_direct(const SegmentationMask& a, const SegmentationMask& b, int cls) {
  std::int64_t na = 0, nb = 0, inter = 0;
  for (int y = 0; y < a.h; ++y)
    for (int x = 0; x < a.w; ++x) {
      const bool ia = a.at(y, x) == cls;
      const bool ib = b.at(y, x) == cls;
      na += ia;
      nb += ib;
      inter += ia && ib;
    }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

std::vector<std::array<int, 2>> surface_direct(const SegmentationMask& mask, int cls) {
  std::vector<std::array<int, 2>> pts;
  for (int y = 0; y < mask.h; ++y)
    for (int x = 0; x < mask.w; ++x) {
      if (mask.at(y, x) != cls) continue;
      bool boundary = false;
      const int ny[4] = {y - 1, y + 1, y, y};
      const int nx[4] = {x, x, x - 1, x + 1};
      for (int k = 0; k < 4; ++k) {
        if (ny[k] < 0 || ny[k] >= mask.h || nx[k] < 0 || nx[k] >= mask.w)
          boundary = true;  // image border counts as outside
        else if (mask.at(ny[k], nx[k]) != cls)
          boundary = true;
      }
      if (boundary) pts.push_back({y, x});
    }
  return pts;
}

namespace {
// full pairwise matrix of squared distances; row minima
std::vector<std::int64_t> row_min_sq(const std::vector<std::array<int, 2>>& from,
                                     const std::vector<std::array<int, 2>>& to) {
  std::vector<std::int64_t> mins;
  mins.reserve(from.size());
  for (const auto& a : from) {
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    for (const auto& b : to) {
      const std::int64_t dy = a[0] - b[0];
      const std::int64_t dx = a[1] - b[1];
      best = std::min(best, dy * dy + dx * dx);
    }
    mins.push_back(best);
  }
  return mins;
}
}  // namespace

std::optional<double> hausdorff_direct(const SegmentationMask& a, const SegmentationMask& b,
                                       int cls) {
  const auto sa = surface_direct(a, cls);
  const auto sb = surface_direct(b, cls);
  if (sa.empty() && sb.empty()) return 0.0;
  if (sa.empty() || sb.empty()) return std::nullopt;
  std::int64_t worst = 0;
  for (std::int64_t d : row_min_sq(sa, sb)) worst = std::max(worst, d);
  for (std::int64_t d : row_min_sq(sb, sa)) worst = std::max(worst, d);
  return a.spacing * std::sqrt(static_cast<double>(worst));
}

std::optional<double> assd_direct(const SegmentationMask& a, const SegmentationMask& b,
                                  int cls) {
  const auto sa = surface_direct(a, cls);
  const auto sb = surface_direct(b, cls);
  if (sa.empty() && sb.empty()) return 0.0;
  if (sa.empty() || sb.empty()) return std::nullopt;
  double sum = 0.0;
  for (std::int64_t d : row_min_sq(sa, sb)) sum += a.spacing * std::sqrt(static_cast<double>(d));
  for (std::int64_t d : row_min_sq(sb, sa)) sum += a.spacing * std::sqrt(static_cast<double>(d));
  return sum / static_cast<double>(sa.size() + sb.size());
}

double adam_scalar_recurrence(double x0, double grad, double lr, double weight_decay,
                              int steps) {
  double x = x0, m = 0.0, v = 0.0;
  for (int t = 1; t <= steps; ++t) {
    x -= lr * weight_decay * x;
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad * grad;
    const double mhat = m / (1.0 - std::pow(0.9, t));
    const double vhat = v / (1.0 - std::pow(0.999, t));
    x -= lr * mhat / (std::sqrt(vhat) + 1e-8);
  }
  return x;
}

SegmentationMask argmax_direct(const Tensor& logits) {
  const int c = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
  SegmentationMask mask(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int best = 0;
      for (int ci = 1; ci < c; ++ci)
        if (logits.at(ci, y, x) > logits.at(best, y, x)) best = ci;
      mask.at(y, x) = static_cast<std::uint8_t>(best);
    }
  return mask;
}

Tensor plain_unet_forward(const ModelParams& params, const UNet& net, const Tensor& x) {
  const UNetOptions& opt = net.options();
  const std::string& prefix = net.prefix();
  auto get = [&](const std::string& name) -> const Tensor& {
    const int idx = params.find(name);
    if (idx < 0) throw std::invalid_argument("plain_unet_forward: missing " + name);
    return params[idx].value;
  };
  auto conv_block = [&](const Tensor& in, const std::string& name, bool relu_after) {
    const Tensor& w = get(name + ".w");
    Tensor y = add_channel_bias(conv2d(in, w, 1, (w.dim(2) - 1) / 2), get(name + ".b"));
    return relu_after ? relu(y) : y;
  };

  Tensor cur = x;
  std::vector<Tensor> skips;
  for (int i = 0; i < opt.depth; ++i) {
    const std::string lp = prefix + ".enc" + std::to_string(i);
    cur = conv_block(cur, lp + ".a", true);
    cur = conv_block(cur, lp + ".b", true);
    skips.push_back(cur);
    cur = maxpool2d(cur, 2).output;
  }
  cur = conv_block(cur, prefix + ".bott.a", true);
  cur = conv_block(cur, prefix + ".bott.b", true);
  if (opt.tail == UNetOptions::Tail::dgpa)
    cur = conv_block(cur, prefix + ".dgpa", false);  // alpha = 0: pure deformable branch
  else if (opt.tail == UNetOptions::Tail::plain_conv)
    cur = conv_block(cur, prefix + ".tail", true);
  for (int i = opt.depth - 1; i >= 0; --i) {
    const std::string lp = prefix + ".dec" + std::to_string(i);
    Tensor up = add_channel_bias(deconv2d(cur, get(lp + ".up.w"), 2), get(lp + ".up.b"));
    cur = concat_channels(up, skips[static_cast<size_t>(i)]);
    cur = conv_block(cur, lp + ".a", true);
    cur = conv_block(cur, lp + ".b", true);
  }
  return conv_block(cur, prefix + ".head", false);
}

}  // namespace oracle
}  // namespace deunet
