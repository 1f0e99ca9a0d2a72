// The full network: an offset prediction U-Net feeds the temporal deformable
// aggregation conv, whose fused features drive the deformable attention
// U-Net that emits 4-class logits. Two ablation variants drop one stage
// each: no_tdam replaces the aggregation by plain early fusion (zero-offset
// multichannel conv), no_dgpa replaces the attention block at the bottleneck
// by a plain conv block.
#pragma once

#include <optional>
#include <string>

#include "deunet/metrics.hpp"
#include "deunet/unet.hpp"

namespace deunet {

enum class NetVariant { full, no_tdam, no_dgpa };
std::string to_string(NetVariant v);
NetVariant variant_from_string(const std::string& s);

struct NetConfig {
  int S = 3;              // deformable kernel size
  int r = 1;              // temporal radius; clip length T = 2r+1
  int depth = 2;          // U-Net pool levels
  int base_channels = 16; // first-level channel width of both U-Nets
  int tdam_channels = 16; // fused feature channels produced by aggregation
  int num_classes = 4;
  bool literal_reshape = false;

  int T() const { return 2 * r + 1; }
  void validate() const;

  // key=value lines describing the architecture; embedded in checkpoints
  std::string to_metadata(NetVariant v) const;
  // parses the architecture keys back out of checkpoint metadata
  static std::pair<NetConfig, NetVariant> from_metadata(const std::string& text);
};

class DeUNet {
 public:
  DeUNet(const NetConfig& cfg, NetVariant variant);

  struct Trace {
    bool valid = false;
    Tensor clip;
    UNet::Trace offset_tr;
    Tensor offsets;
    Tensor fused_pre;  // aggregation output before ReLU
    UNet::Trace seg_tr;
  };

  // clip [T,H,W] -> logits [num_classes,H,W]; tr may be null for inference
  Tensor forward(const Tensor& clip, Trace* tr) const;
  Tensor forward(const Tensor& clip) const { return forward(clip, nullptr); }
  // fills parameter gradients; requires the trace of a prior forward
  void backward(const Tensor& grad_logits, Trace& tr);

  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }
  const NetConfig& config() const { return cfg_; }
  NetVariant variant() const { return variant_; }
  const UNet& seg_net() const { return *seg_net_; }
  const UNet* offset_net() const { return offset_net_ ? &*offset_net_ : nullptr; }
  int tdam_weight_index() const { return tdam_w_; }
  int tdam_bias_index() const { return tdam_b_; }

 private:
  NetConfig cfg_;
  NetVariant variant_;
  ModelParams params_;
  std::optional<UNet> offset_net_;
  int tdam_w_ = -1, tdam_b_ = -1;
  std::optional<UNet> seg_net_;
};

// Per-pixel argmax over the class axis; ties resolve to the lower class
// index, so all-equal logits decode to background.
SegmentationMask predict_mask(const Tensor& logits, double spacing = 1.0);

}  // namespace deunet
