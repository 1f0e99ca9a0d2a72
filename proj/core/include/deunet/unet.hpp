// U-Net backbone: conv+ReLU encoder blocks with maxpool downsampling,
// deconv upsampling with skip concatenation, and a 1x1 output head. Stride-1
// zero-padded convs keep the feature size everywhere, so the output spatial
// size always equals the input's. Two flavors share this type: the offset
// prediction net (plain encoders, zero-initialized head) and the attention
// segmentation net (deformable encoder convs, attention block at the
// bottleneck).
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "deunet/dgpa.hpp"
#include "deunet/layers.hpp"

namespace deunet {

struct UNetOptions {
  int in_ch = 1;
  int out_ch = 1;
  int depth = 2;  // pool/unpool levels; input H, W must be divisible by 2^depth
  int base = 16;
  int S = 3;  // deformable kernel size where applicable
  bool deform_encoders = false;
  enum class Tail { none, dgpa, plain_conv } tail = Tail::none;
  bool zero_init_head = false;
  bool literal_reshape = false;
};

class UNet {
 public:
  UNet(ModelParams& p, const std::string& prefix, const UNetOptions& opt);

  struct Trace {
    struct Enc {
      ConvLayer::Trace ca;
      DeformConvLayer::Trace da;
      ConvLayer::Trace cb;
      std::vector<std::int64_t> argmax;
      std::vector<int> prepool_shape;
    };
    struct Dec {
      DeconvLayer::Trace up;
      int up_channels = 0;
      ConvLayer::Trace ca;
      ConvLayer::Trace cb;
    };
    std::vector<Enc> enc;
    ConvLayer::Trace bott_a, bott_b;
    DgpaBlock::Trace dgpa;
    ConvLayer::Trace tail_conv;
    std::vector<Dec> dec;
    ConvLayer::Trace head;
  };

  Tensor forward(const ModelParams& p, const Tensor& x, Trace* tr) const;
  Tensor backward(ModelParams& p, const Trace& tr, Tensor grad_out) const;

  const UNetOptions& options() const { return opt_; }
  const std::string& prefix() const { return prefix_; }
  int bottleneck_channels() const { return opt_.base << opt_.depth; }
  const DgpaBlock* dgpa_block() const { return dgpa_ ? &*dgpa_ : nullptr; }

 private:
  struct EncLevel {
    std::optional<ConvLayer> ca;
    std::optional<DeformConvLayer> da;
    ConvLayer cb;
  };
  struct DecLevel {
    DeconvLayer up;
    ConvLayer ca;
    ConvLayer cb;
  };

  UNetOptions opt_;
  std::string prefix_;
  std::vector<EncLevel> enc_;
  ConvLayer bott_a_, bott_b_;
  std::optional<DgpaBlock> dgpa_;
  std::optional<ConvLayer> tail_conv_;
  std::vector<DecLevel> dec_;
  ConvLayer head_;
};

}  // namespace deunet
