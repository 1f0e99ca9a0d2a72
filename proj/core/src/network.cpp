#include "deunet/network.hpp"

#include <sstream>
#include <stdexcept>

namespace deunet {

std::string to_string(NetVariant v) {
  switch (v) {
    case NetVariant::full: return "full";
    case NetVariant::no_tdam: return "no_tdam";
    case NetVariant::no_dgpa: return "no_dgpa";
  }
  throw std::invalid_argument("bad variant");
}

NetVariant variant_from_string(const std::string& s) {
  if (s == "full") return NetVariant::full;
  if (s == "no_tdam") return NetVariant::no_tdam;
  if (s == "no_dgpa") return NetVariant::no_dgpa;
  throw std::invalid_argument("unknown variant: " + s + " (expected full|no_tdam|no_dgpa)");
}

void NetConfig::validate() const {
  if (S < 1 || S % 2 == 0) throw std::invalid_argument("config: S must be odd and positive");
  if (r < 0) throw std::invalid_argument("config: r must be >= 0");
  if (depth < 1) throw std::invalid_argument("config: depth must be >= 1");
  if (base_channels < 1 || tdam_channels < 1)
    throw std::invalid_argument("config: channel counts must be positive");
  if (num_classes < 2) throw std::invalid_argument("config: num_classes must be >= 2");
}

std::string NetConfig::to_metadata(NetVariant v) const {
  std::ostringstream os;
  os << "variant=" << to_string(v) << "\n"
     << "S=" << S << "\n"
     << "r=" << r << "\n"
     << "depth=" << depth << "\n"
     << "base_channels=" << base_channels << "\n"
     << "tdam_channels=" << tdam_channels << "\n"
     << "num_classes=" << num_classes << "\n"
     << "literal_reshape=" << (literal_reshape ? 1 : 0) << "\n";
  return os.str();
}

std::pair<NetConfig, NetVariant> NetConfig::from_metadata(const std::string& text) {
  NetConfig cfg;
  std::optional<NetVariant> variant;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "variant") variant = variant_from_string(val);
    else if (key == "S") cfg.S = std::stoi(val);
    else if (key == "r") cfg.r = std::stoi(val);
    else if (key == "depth") cfg.depth = std::stoi(val);
    else if (key == "base_channels") cfg.base_channels = std::stoi(val);
    else if (key == "tdam_channels") cfg.tdam_channels = std::stoi(val);
    else if (key == "num_classes") cfg.num_classes = std::stoi(val);
    else if (key == "literal_reshape") cfg.literal_reshape = val != "0" && val != "false";
  }
  if (!variant)
    throw std::invalid_argument("checkpoint metadata does not declare a variant");
  cfg.validate();
  return {cfg, *variant};
}

DeUNet::DeUNet(const NetConfig& cfg, NetVariant variant) : cfg_(cfg), variant_(variant) {
  cfg_.validate();
  if (variant != NetVariant::no_tdam) {
    UNetOptions oo;
    oo.in_ch = cfg.T();
    oo.out_ch = offset_channels(cfg.T(), cfg.S);
    oo.depth = cfg.depth;
    oo.base = cfg.base_channels;
    oo.S = cfg.S;
    oo.zero_init_head = true;  // start exactly at early fusion
    offset_net_.emplace(params_, "offset_net", oo);
  }
  tdam_w_ = params_.add("tdam.w", {cfg.tdam_channels, cfg.T(), cfg.S, cfg.S});
  tdam_b_ = params_.add("tdam.b", {cfg.tdam_channels});
  UNetOptions so;
  so.in_ch = cfg.tdam_channels;
  so.out_ch = cfg.num_classes;
  so.depth = cfg.depth;
  so.base = cfg.base_channels;
  so.S = cfg.S;
  so.deform_encoders = true;
  so.tail = variant == NetVariant::no_dgpa ? UNetOptions::Tail::plain_conv
                                           : UNetOptions::Tail::dgpa;
  so.literal_reshape = cfg.literal_reshape;
  seg_net_.emplace(params_, "seg_net", so);
}

Tensor DeUNet::forward(const Tensor& clip, Trace* tr) const {
  if (clip.rank() != 3 || clip.dim(0) != cfg_.T())
    throw std::invalid_argument("forward: expected clip [" + std::to_string(cfg_.T()) +
                                ",H,W], got " + clip.shape_str());
  Tensor fused_pre;
  Tensor offsets;
  if (variant_ == NetVariant::no_tdam) {
    // early fusion: the clip as a multichannel image under the same kernel
    fused_pre = add_channel_bias(conv2d(clip, params_[tdam_w_].value, 1, (cfg_.S - 1) / 2),
                                 params_[tdam_b_].value);
  } else {
    offsets = offset_net_->forward(params_, clip, tr ? &tr->offset_tr : nullptr);
    fused_pre = add_channel_bias(
        temporal_deform_agg_conv(clip, offsets, params_[tdam_w_].value),
        params_[tdam_b_].value);
  }
  Tensor fused = relu(fused_pre);
  Tensor logits = seg_net_->forward(params_, fused, tr ? &tr->seg_tr : nullptr);
  if (tr) {
    tr->valid = true;
    tr->clip = clip;
    tr->offsets = std::move(offsets);
    tr->fused_pre = std::move(fused_pre);
  }
  return logits;
}

void DeUNet::backward(const Tensor& grad_logits, Trace& tr) {
  if (!tr.valid) throw std::logic_error("backward called before forward");
  Tensor g = seg_net_->backward(params_, tr.seg_tr, grad_logits);
  g = relu_backward(tr.fused_pre, g);
  axpy(1.0, channel_bias_backward(g), params_[tdam_b_].grad);
  if (variant_ == NetVariant::no_tdam) {
    Conv2dGrads cg = conv2d_backward(tr.clip, params_[tdam_w_].value, 1, (cfg_.S - 1) / 2, g);
    axpy(1.0, cg.weight, params_[tdam_w_].grad);
  } else {
    DeformConvGrads dg =
        temporal_deform_agg_conv_backward(tr.clip, tr.offsets, params_[tdam_w_].value, g);
    axpy(1.0, dg.weight, params_[tdam_w_].grad);
    offset_net_->backward(params_, tr.offset_tr, std::move(dg.offsets));
  }
  params_.grads_ready = true;
}

SegmentationMask predict_mask(const Tensor& logits, double spacing) {
  if (logits.rank() != 3)
    throw std::invalid_argument("predict_mask: logits must be [C,H,W]");
  const int c = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
  SegmentationMask mask(h, w, spacing);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int best = 0;
      double best_v = logits.at(0, y, x);
      for (int ci = 1; ci < c; ++ci) {
        const double v = logits.at(ci, y, x);
        if (v > best_v) {  // strict: ties keep the lower class index
          best_v = v;
          best = ci;
        }
      }
      mask.at(y, x) = static_cast<std::uint8_t>(best);
    }
  }
  return mask;
}

}  // namespace deunet
