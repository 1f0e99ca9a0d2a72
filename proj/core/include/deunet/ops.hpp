// Differentiable primitive layers: convolution, pooling, transposed
// convolution, matmul, softmax, ReLU, channel bias. Each forward has a
// hand-derived backward; composites chain these explicitly.
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "deunet/tensor.hpp"

namespace deunet {

// Cross-correlation (deep-learning convention, no kernel flip) with zero
// padding. input [Cin,H,W], weight [Cout,Cin,S,S], S odd.
// Output [Cout, (H+2p-S)/stride+1, (W+2p-S)/stride+1].
Tensor conv2d(const Tensor& input, const Tensor& weight, int stride, int padding);

struct Conv2dGrads {
  Tensor input;
  Tensor weight;
};
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weight, int stride,
                            int padding, const Tensor& grad_out);

struct MaxPoolOut {
  Tensor output;
  // flat index into the input tensor per output element; routes the gradient.
  // Ties resolve to the first (row-major) maximal element.
  std::vector<std::int64_t> argmax;
};
// input [C,H,W], H and W divisible by k
MaxPoolOut maxpool2d(const Tensor& input, int k);
Tensor maxpool2d_backward(const std::vector<int>& input_shape,
                          const std::vector<std::int64_t>& argmax, const Tensor& grad_out);

// Transposed convolution in the non-overlapping configuration stride == k.
// input [Cin,H,W], weight [Cin,Cout,k,k] -> [Cout, H*k, W*k].
Tensor deconv2d(const Tensor& input, const Tensor& weight, int stride);

struct Deconv2dGrads {
  Tensor input;
  Tensor weight;
};
Deconv2dGrads deconv2d_backward(const Tensor& input, const Tensor& weight, int stride,
                                const Tensor& grad_out);

// a [P,Q] * b [Q,R] -> [P,R]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose2d(const Tensor& a);
struct MatmulGrads {
  Tensor a;
  Tensor b;
};
MatmulGrads matmul_backward(const Tensor& a, const Tensor& b, const Tensor& grad_out);

// Row-wise softmax with max subtraction. x [P,Q].
Tensor softmax_rows(const Tensor& x);
// grad from the softmax output (not the logits); y = softmax_rows(x)
Tensor softmax_rows_backward(const Tensor& y, const Tensor& grad_out);

Tensor relu(const Tensor& x);
// x is the forward input; derivative at 0 is taken as 0
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);

// out[c,y,x] = in[c,y,x] + bias[c]; bias rank 1 of length C
Tensor add_channel_bias(const Tensor& input, const Tensor& bias);
Tensor channel_bias_backward(const Tensor& grad_out);  // -> grad_bias [C]

// Concatenate two [C,H,W] maps along the channel axis; split is the inverse.
Tensor concat_channels(const Tensor& a, const Tensor& b);
std::pair<Tensor, Tensor> split_channels(const Tensor& x, int c_first);

}  // namespace deunet
