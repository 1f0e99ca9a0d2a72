// Bilinear sampling and the deformable convolutions: the single-frame
// deformable conv used inside the attention U-Net and the temporal
// aggregation deformable conv that fuses a video clip into one feature map.
#pragma once

#include "deunet/tensor.hpp"

namespace deunet {

// Bilinear interpolation of feature [H,W] at real coordinates (y, x).
// Integer neighbors outside the image contribute zero (zero padding), so the
// value fades linearly to 0 across the one-pixel band around the border.
// The kernel is piecewise linear; at integer coordinates the derivative is
// taken from the right-continuous branch (the floor convention does this).
double bilinear_sample(const Tensor& feature, double y, double x);

struct BilinearGrad {
  double dy = 0.0;
  double dx = 0.0;
};
// Scatters grad_out * d(sample)/d(feature) into grad_feature and returns the
// spatial derivatives d(sample)/d(y,x) scaled by grad_out.
BilinearGrad bilinear_sample_backward(const Tensor& feature, double y, double x,
                                      double grad_out, Tensor& grad_feature);

// Offset field layout, fixed so serialized models are portable:
// channel = group * 2*S*S + 2*s + {0:dy, 1:dx}, with kernel slot s = ky*S + kx
// in row-major kernel order. "group" is the frame index t for the temporal
// op, and 0 for the single-frame op (one offset set shared by all input
// channels of a window).
int offset_channels(int groups, int S);

// Deformable conv2d, same padding, stride 1, output [Cout,H,W].
// input [Cin,H,W], offsets [2*S*S,H,W] (one group), weight [Cout,Cin,S,S].
Tensor deform_conv2d(const Tensor& input, const Tensor& offsets, const Tensor& weight);

// Temporal aggregation deformable convolution: every frame t samples at its
// own learned displacements and all frames fuse into one Cout-channel map.
// clip [T,H,W], offsets [T*2*S*S,H,W], weight [Cout,T,S,S]. With all-zero
// offsets this reduces to the plain multichannel convolution of the clip
// (early fusion).
Tensor temporal_deform_agg_conv(const Tensor& clip, const Tensor& offsets,
                                const Tensor& weight);

struct DeformConvGrads {
  Tensor input;
  Tensor offsets;
  Tensor weight;
};
DeformConvGrads deform_conv2d_backward(const Tensor& input, const Tensor& offsets,
                                       const Tensor& weight, const Tensor& grad_out);
DeformConvGrads temporal_deform_agg_conv_backward(const Tensor& clip, const Tensor& offsets,
                                                  const Tensor& weight,
                                                  const Tensor& grad_out);

}  // namespace deunet
