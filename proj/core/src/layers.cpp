#include "deunet/layers.hpp"

namespace deunet {

ConvLayer ConvLayer::make(ModelParams& p, const std::string& prefix, int in_ch, int out_ch,
                          int k, bool relu, bool zero_init) {
  ConvLayer l;
  l.k = k;
  l.apply_relu = relu;
  l.w = p.add(prefix + ".w", {out_ch, in_ch, k, k}, zero_init);
  l.b = p.add(prefix + ".b", {out_ch}, zero_init);
  return l;
}

Tensor ConvLayer::forward(const ModelParams& p, const Tensor& x, Trace* tr) const {
  Tensor y = add_channel_bias(conv2d(x, p[w].value, 1, (k - 1) / 2), p[b].value);
  if (tr) tr->input = x;
  if (!apply_relu) return y;
  if (tr) tr->pre_relu = y;
  return relu(y);
}

Tensor ConvLayer::backward(ModelParams& p, const Trace& tr, Tensor grad_out) const {
  if (apply_relu) grad_out = relu_backward(tr.pre_relu, grad_out);
  axpy(1.0, channel_bias_backward(grad_out), p[b].grad);
  Conv2dGrads g = conv2d_backward(tr.input, p[w].value, 1, (k - 1) / 2, grad_out);
  axpy(1.0, g.weight, p[w].grad);
  return std::move(g.input);
}

DeformConvLayer DeformConvLayer::make(ModelParams& p, const std::string& prefix, int in_ch,
                                      int out_ch, int S, bool relu) {
  DeformConvLayer l;
  l.S = S;
  l.apply_relu = relu;
  l.offset_head = ConvLayer::make(p, prefix + ".offset", in_ch, offset_channels(1, S), 3,
                                  /*relu=*/false, /*zero_init=*/true);
  l.w = p.add(prefix + ".w", {out_ch, in_ch, S, S});
  l.b = p.add(prefix + ".b", {out_ch});
  return l;
}

Tensor DeformConvLayer::forward(const ModelParams& p, const Tensor& x, Trace* tr) const {
  Tensor offsets = offset_head.forward(p, x, tr ? &tr->head : nullptr);
  Tensor y = add_channel_bias(deform_conv2d(x, offsets, p[w].value), p[b].value);
  if (tr) {
    tr->input = x;
    tr->offsets = offsets;
  }
  if (!apply_relu) return y;
  if (tr) tr->pre_relu = y;
  return relu(y);
}

Tensor DeformConvLayer::backward(ModelParams& p, const Trace& tr, Tensor grad_out) const {
  if (apply_relu) grad_out = relu_backward(tr.pre_relu, grad_out);
  axpy(1.0, channel_bias_backward(grad_out), p[b].grad);
  DeformConvGrads g = deform_conv2d_backward(tr.input, tr.offsets, p[w].value, grad_out);
  axpy(1.0, g.weight, p[w].grad);
  Tensor grad_in = offset_head.backward(p, tr.head, std::move(g.offsets));
  axpy(1.0, g.input, grad_in);
  return grad_in;
}

DeconvLayer DeconvLayer::make(ModelParams& p, const std::string& prefix, int in_ch,
                              int out_ch, int k) {
  DeconvLayer l;
  l.k = k;
  l.w = p.add(prefix + ".w", {in_ch, out_ch, k, k});
  l.b = p.add(prefix + ".b", {out_ch});
  return l;
}

Tensor DeconvLayer::forward(const ModelParams& p, const Tensor& x, Trace* tr) const {
  if (tr) tr->input = x;
  return add_channel_bias(deconv2d(x, p[w].value, k), p[b].value);
}

Tensor DeconvLayer::backward(ModelParams& p, const Trace& tr, const Tensor& grad_out) const {
  axpy(1.0, channel_bias_backward(grad_out), p[b].grad);
  Deconv2dGrads g = deconv2d_backward(tr.input, p[w].value, k, grad_out);
  axpy(1.0, g.weight, p[w].grad);
  return std::move(g.input);
}

}  // namespace deunet
