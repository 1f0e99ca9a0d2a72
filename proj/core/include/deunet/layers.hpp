// Layer wrappers that pair ops with their parameters and remember what the
// backward pass needs. Composites chain these in reverse topological order;
// there is no general autodiff graph. Passing a null trace runs pure
// inference with nothing saved, so concurrent forward calls over shared
// read-only parameters are safe.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deunet/deform.hpp"
#include "deunet/ops.hpp"
#include "deunet/params.hpp"

namespace deunet {

// 3x3 (or 1x1) same-padding conv, stride 1, bias, optional ReLU.
struct ConvLayer {
  int w = -1, b = -1;
  int k = 3;
  bool apply_relu = true;

  struct Trace {
    Tensor input;
    Tensor pre_relu;
  };

  static ConvLayer make(ModelParams& p, const std::string& prefix, int in_ch, int out_ch,
                        int k, bool relu, bool zero_init = false);
  Tensor forward(const ModelParams& p, const Tensor& x, Trace* tr) const;
  // accumulates parameter grads, returns grad wrt the layer input
  Tensor backward(ModelParams& p, const Trace& tr, Tensor grad_out) const;
};

// Deformable conv with its own offset head: a plain zero-initialized conv
// predicting the 2*S*S displacement channels. At initialization the layer is
// exactly a plain convolution.
struct DeformConvLayer {
  ConvLayer offset_head;
  int w = -1, b = -1;
  int S = 3;
  bool apply_relu = true;

  struct Trace {
    ConvLayer::Trace head;
    Tensor input;
    Tensor offsets;
    Tensor pre_relu;
  };

  static DeformConvLayer make(ModelParams& p, const std::string& prefix, int in_ch,
                              int out_ch, int S, bool relu);
  Tensor forward(const ModelParams& p, const Tensor& x, Trace* tr) const;
  Tensor backward(ModelParams& p, const Trace& tr, Tensor grad_out) const;
};

// Non-overlapping transposed conv (stride == k) with bias, no activation.
struct DeconvLayer {
  int w = -1, b = -1;
  int k = 2;

  struct Trace {
    Tensor input;
  };

  static DeconvLayer make(ModelParams& p, const std::string& prefix, int in_ch, int out_ch,
                          int k);
  Tensor forward(const ModelParams& p, const Tensor& x, Trace* tr) const;
  Tensor backward(ModelParams& p, const Trace& tr, const Tensor& grad_out) const;
};

}  // namespace deunet
