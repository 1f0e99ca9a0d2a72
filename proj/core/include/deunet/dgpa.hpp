// Deformable global position attention: a deformable conv extracts geometric
// features O, three projections of O form B, C, D in R^{N x M}, the channel
// affinity map P is the row-softmax of C B^T, and the output is
// Z = alpha * (P D) + O with a learned scalar alpha starting at 0.
#pragma once

#include <string>

#include "deunet/layers.hpp"

namespace deunet {

struct DgpaBlock {
  ConvLayer offset_head;            // 3x3, N -> 2*S*S, zero-init, no activation
  int w = -1, b = -1;               // deformable kernel [N,N,S,S] + bias
  int wb = -1, bb = -1;             // projection B: [N,N] weight, [N] bias
  int wc = -1, bc = -1;             // projection C
  int wd = -1, bd = -1;             // projection D
  int alpha = -1;                   // scalar scale, zero-init
  int channels = 0, S = 3;
  // reproduces the literal reading where B, C, D are raw reshapes of O
  bool literal_reshape = false;

  struct Trace {
    ConvLayer::Trace head;
    Tensor input;
    Tensor offsets;
    Tensor o;                       // deformable features [N,H,W]
    Tensor bm, cm, dm;              // [N,M]
    Tensor pm;                      // affinity [N,N]
    Tensor att;                     // P * D  [N,M]
  };

  static DgpaBlock make(ModelParams& p, const std::string& prefix, int channels, int S,
                        bool literal_reshape);

  Tensor forward(const ModelParams& p, const Tensor& x, Trace* tr) const;
  Tensor backward(ModelParams& p, const Trace& tr, const Tensor& grad_out) const;

  // The attention sub-path Z(O); split out so its contracts (row-stochastic
  // affinity, alpha = 0 identity, pixel-permutation equivariance) can be
  // exercised on a given feature map directly.
  Tensor attention(const ModelParams& p, const Tensor& o, Trace* tr) const;
  // grad wrt o given dZ; accumulates projection and alpha grads
  Tensor attention_backward(ModelParams& p, const Trace& tr, const Tensor& grad_out) const;
};

}  // namespace deunet
