#include "deunet/unet.hpp"

#include <stdexcept>

namespace deunet {

UNet::UNet(ModelParams& p, const std::string& prefix, const UNetOptions& opt)
    : opt_(opt), prefix_(prefix) {
  if (opt.depth < 1) throw std::invalid_argument("unet: depth must be >= 1");
  int ch_in = opt.in_ch;
  for (int i = 0; i < opt.depth; ++i) {
    const int ch = opt.base << i;
    const std::string lp = prefix + ".enc" + std::to_string(i);
    EncLevel lvl{std::nullopt, std::nullopt, {}};
    if (opt.deform_encoders)
      lvl.da = DeformConvLayer::make(p, lp + ".a", ch_in, ch, opt.S, /*relu=*/true);
    else
      lvl.ca = ConvLayer::make(p, lp + ".a", ch_in, ch, 3, /*relu=*/true);
    lvl.cb = ConvLayer::make(p, lp + ".b", ch, ch, 3, /*relu=*/true);
    enc_.push_back(std::move(lvl));
    ch_in = ch;
  }
  const int bott = opt.base << opt.depth;
  bott_a_ = ConvLayer::make(p, prefix + ".bott.a", ch_in, bott, 3, true);
  bott_b_ = ConvLayer::make(p, prefix + ".bott.b", bott, bott, 3, true);
  if (opt.tail == UNetOptions::Tail::dgpa)
    dgpa_ = DgpaBlock::make(p, prefix + ".dgpa", bott, opt.S, opt.literal_reshape);
  else if (opt.tail == UNetOptions::Tail::plain_conv)
    tail_conv_ = ConvLayer::make(p, prefix + ".tail", bott, bott, 3, true);
  for (int i = opt.depth - 1; i >= 0; --i) {
    const int ch = opt.base << i;
    const int ch_up = opt.base << (i + 1);
    const std::string lp = prefix + ".dec" + std::to_string(i);
    DecLevel lvl{DeconvLayer::make(p, lp + ".up", ch_up, ch, 2),
                 ConvLayer::make(p, lp + ".a", 2 * ch, ch, 3, true),
                 ConvLayer::make(p, lp + ".b", ch, ch, 3, true)};
    dec_.push_back(std::move(lvl));
  }
  head_ = ConvLayer::make(p, prefix + ".head", opt.base, opt.out_ch, 1, /*relu=*/false,
                          opt.zero_init_head);
}

Tensor UNet::forward(const ModelParams& p, const Tensor& x, Trace* tr) const {
  if (x.rank() != 3 || x.dim(0) != opt_.in_ch)
    throw std::invalid_argument("unet: expected [" + std::to_string(opt_.in_ch) +
                                ",H,W] input, got " + x.shape_str());
  const int div = 1 << opt_.depth;
  if (x.dim(1) % div != 0 || x.dim(2) % div != 0)
    throw std::invalid_argument("unet: spatial size " + x.shape_str() +
                                " not divisible by 2^depth = " + std::to_string(div));
  if (tr) {
    tr->enc.resize(static_cast<size_t>(opt_.depth));
    tr->dec.resize(static_cast<size_t>(opt_.depth));
  }

  Tensor cur = x;
  std::vector<Tensor> skips;
  skips.reserve(static_cast<size_t>(opt_.depth));
  for (int i = 0; i < opt_.depth; ++i) {
    const EncLevel& lvl = enc_[static_cast<size_t>(i)];
    Trace::Enc* et = tr ? &tr->enc[static_cast<size_t>(i)] : nullptr;
    cur = lvl.da ? lvl.da->forward(p, cur, et ? &et->da : nullptr)
                 : lvl.ca->forward(p, cur, et ? &et->ca : nullptr);
    cur = lvl.cb.forward(p, cur, et ? &et->cb : nullptr);
    skips.push_back(cur);
    MaxPoolOut po = maxpool2d(cur, 2);
    if (et) {
      et->argmax = std::move(po.argmax);
      et->prepool_shape = cur.shape;
    }
    cur = std::move(po.output);
  }

  cur = bott_a_.forward(p, cur, tr ? &tr->bott_a : nullptr);
  cur = bott_b_.forward(p, cur, tr ? &tr->bott_b : nullptr);
  if (dgpa_)
    cur = dgpa_->forward(p, cur, tr ? &tr->dgpa : nullptr);
  else if (tail_conv_)
    cur = tail_conv_->forward(p, cur, tr ? &tr->tail_conv : nullptr);

  for (size_t d = 0; d < dec_.size(); ++d) {
    const int lvl_idx = opt_.depth - 1 - static_cast<int>(d);
    const DecLevel& lvl = dec_[d];
    Trace::Dec* dt = tr ? &tr->dec[d] : nullptr;
    Tensor up = lvl.up.forward(p, cur, dt ? &dt->up : nullptr);
    if (dt) dt->up_channels = up.dim(0);
    cur = concat_channels(up, skips[static_cast<size_t>(lvl_idx)]);
    cur = lvl.ca.forward(p, cur, dt ? &dt->ca : nullptr);
    cur = lvl.cb.forward(p, cur, dt ? &dt->cb : nullptr);
  }
  return head_.forward(p, cur, tr ? &tr->head : nullptr);
}

Tensor UNet::backward(ModelParams& p, const Trace& tr, Tensor grad_out) const {
  Tensor g = head_.backward(p, tr.head, std::move(grad_out));

  // decoder levels, reverse of forward order
  std::vector<Tensor> skip_grads(static_cast<size_t>(opt_.depth));
  for (size_t d = dec_.size(); d-- > 0;) {
    const int lvl_idx = opt_.depth - 1 - static_cast<int>(d);
    const DecLevel& lvl = dec_[d];
    const Trace::Dec& dt = tr.dec[d];
    g = lvl.cb.backward(p, dt.cb, std::move(g));
    g = lvl.ca.backward(p, dt.ca, std::move(g));
    auto [g_up, g_skip] = split_channels(g, dt.up_channels);
    skip_grads[static_cast<size_t>(lvl_idx)] = std::move(g_skip);
    g = lvl.up.backward(p, dt.up, g_up);
  }

  if (dgpa_)
    g = dgpa_->backward(p, tr.dgpa, g);
  else if (tail_conv_)
    g = tail_conv_->backward(p, tr.tail_conv, std::move(g));
  g = bott_b_.backward(p, tr.bott_b, std::move(g));
  g = bott_a_.backward(p, tr.bott_a, std::move(g));

  for (int i = opt_.depth - 1; i >= 0; --i) {
    const EncLevel& lvl = enc_[static_cast<size_t>(i)];
    const Trace::Enc& et = tr.enc[static_cast<size_t>(i)];
    g = maxpool2d_backward(et.prepool_shape, et.argmax, g);
    axpy(1.0, skip_grads[static_cast<size_t>(i)], g);
    g = lvl.cb.backward(p, et.cb, std::move(g));
    g = lvl.da ? lvl.da->backward(p, et.da, std::move(g))
               : lvl.ca->backward(p, et.ca, std::move(g));
  }
  return g;
}

}  // namespace deunet
