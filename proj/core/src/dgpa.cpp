#include "deunet/dgpa.hpp"

#include <stdexcept>

namespace deunet {

namespace {

Tensor flatten_hw(const Tensor& x) {
  Tensor f = x;
  f.shape = {x.dim(0), x.dim(1) * x.dim(2)};
  return f;
}

Tensor unflatten_hw(const Tensor& x, int h, int w) {
  Tensor f = x;
  f.shape = {x.dim(0), h, w};
  return f;
}

Tensor add_row_bias(Tensor x, const Tensor& bias) {
  const int n = x.dim(0), m = x.dim(1);
  for (int i = 0; i < n; ++i) {
    double* row = x.ptr() + static_cast<size_t>(i) * m;
    const double b = bias.at(i);
    for (int j = 0; j < m; ++j) row[j] += b;
  }
  return x;
}

Tensor row_bias_backward(const Tensor& g) {
  const int n = g.dim(0), m = g.dim(1);
  Tensor gb({n});
  for (int i = 0; i < n; ++i) {
    const double* row = g.ptr() + static_cast<size_t>(i) * m;
    double acc = 0.0;
    for (int j = 0; j < m; ++j) acc += row[j];
    gb.at(i) = acc;
  }
  return gb;
}

}  // namespace

DgpaBlock DgpaBlock::make(ModelParams& p, const std::string& prefix, int channels, int S,
                          bool literal_reshape) {
  DgpaBlock blk;
  blk.channels = channels;
  blk.S = S;
  blk.literal_reshape = literal_reshape;
  blk.offset_head = ConvLayer::make(p, prefix + ".offset", channels, offset_channels(1, S),
                                    3, /*relu=*/false, /*zero_init=*/true);
  blk.w = p.add(prefix + ".w", {channels, channels, S, S});
  blk.b = p.add(prefix + ".b", {channels});
  if (!literal_reshape) {
    blk.wb = p.add(prefix + ".proj_b.w", {channels, channels});
    blk.bb = p.add(prefix + ".proj_b.b", {channels});
    blk.wc = p.add(prefix + ".proj_c.w", {channels, channels});
    blk.bc = p.add(prefix + ".proj_c.b", {channels});
    blk.wd = p.add(prefix + ".proj_d.w", {channels, channels});
    blk.bd = p.add(prefix + ".proj_d.b", {channels});
  }
  blk.alpha = p.add(prefix + ".alpha", {1}, /*zero_init=*/true);
  return blk;
}

Tensor DgpaBlock::attention(const ModelParams& p, const Tensor& o, Trace* tr) const {
  if (o.rank() != 3 || o.dim(0) != channels)
    throw std::invalid_argument("dgpa attention: expected [" + std::to_string(channels) +
                                ",H,W], got " + o.shape_str());
  const int h = o.dim(1), w = o.dim(2);
  const Tensor of = flatten_hw(o);
  Tensor bm, cm, dm;
  if (literal_reshape) {
    bm = of;
    cm = of;
    dm = of;
  } else {
    bm = add_row_bias(matmul(p[wb].value, of), p[bb].value);
    cm = add_row_bias(matmul(p[wc].value, of), p[bc].value);
    dm = add_row_bias(matmul(p[wd].value, of), p[bd].value);
  }
  // affinity logits[j,i] = B_i . C_j, normalized over i per row j
  Tensor pm = softmax_rows(matmul(cm, transpose2d(bm)));
  Tensor att = matmul(pm, dm);
  Tensor z = of;
  axpy(p[alpha].value.at(0), att, z);
  if (tr) {
    tr->o = o;
    tr->bm = bm;
    tr->cm = cm;
    tr->dm = dm;
    tr->pm = pm;
    tr->att = att;
  }
  return unflatten_hw(z, h, w);
}

Tensor DgpaBlock::attention_backward(ModelParams& p, const Trace& tr,
                                     const Tensor& grad_out) const {
  const int h = tr.o.dim(1), w = tr.o.dim(2);
  Tensor gz = flatten_hw(grad_out);
  // Z = alpha * att + O
  double galpha = 0.0;
  for (std::int64_t i = 0; i < gz.numel(); ++i)
    galpha += gz.data[static_cast<size_t>(i)] * tr.att.data[static_cast<size_t>(i)];
  p[alpha].grad.at(0) += galpha;

  Tensor gatt = gz;
  scale(gatt, p[alpha].value.at(0));
  Tensor go = gz;  // residual path

  MatmulGrads g_att = matmul_backward(tr.pm, tr.dm, gatt);
  Tensor gl = softmax_rows_backward(tr.pm, g_att.a);
  const Tensor bmt = transpose2d(tr.bm);
  MatmulGrads g_logits = matmul_backward(tr.cm, bmt, gl);
  Tensor gbm = transpose2d(g_logits.b);
  Tensor gcm = std::move(g_logits.a);
  Tensor gdm = std::move(g_att.b);

  const Tensor of = flatten_hw(tr.o);
  if (literal_reshape) {
    axpy(1.0, gbm, go);
    axpy(1.0, gcm, go);
    axpy(1.0, gdm, go);
  } else {
    MatmulGrads gb = matmul_backward(p[wb].value, of, gbm);
    MatmulGrads gc = matmul_backward(p[wc].value, of, gcm);
    MatmulGrads gd = matmul_backward(p[wd].value, of, gdm);
    axpy(1.0, gb.a, p[wb].grad);
    axpy(1.0, gc.a, p[wc].grad);
    axpy(1.0, gd.a, p[wd].grad);
    axpy(1.0, row_bias_backward(gbm), p[bb].grad);
    axpy(1.0, row_bias_backward(gcm), p[bc].grad);
    axpy(1.0, row_bias_backward(gdm), p[bd].grad);
    axpy(1.0, gb.b, go);
    axpy(1.0, gc.b, go);
    axpy(1.0, gd.b, go);
  }
  return unflatten_hw(go, h, w);
}

Tensor DgpaBlock::forward(const ModelParams& p, const Tensor& x, Trace* tr) const {
  Tensor offsets = offset_head.forward(p, x, tr ? &tr->head : nullptr);
  Tensor o = add_channel_bias(deform_conv2d(x, offsets, p[w].value), p[b].value);
  if (tr) {
    tr->input = x;
    tr->offsets = offsets;
  }
  return attention(p, o, tr);
}

Tensor DgpaBlock::backward(ModelParams& p, const Trace& tr, const Tensor& grad_out) const {
  Tensor go = attention_backward(p, tr, grad_out);
  axpy(1.0, channel_bias_backward(go), p[b].grad);
  DeformConvGrads g = deform_conv2d_backward(tr.input, tr.offsets, p[w].value, go);
  axpy(1.0, g.weight, p[w].grad);
  Tensor gin = offset_head.backward(p, tr.head, std::move(g.offsets));
  axpy(1.0, g.input, gin);
  return gin;
}

}  // namespace deunet
