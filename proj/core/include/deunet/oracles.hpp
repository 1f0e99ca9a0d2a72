// Independent brute-force reference implementations. These deliberately
// avoid the optimized code paths: plain definitional loops only, used to
// cross-check the library in tests and in the `check` subcommand. Keep them
// independent of the ops they verify.
#pragma once

#include <optional>

#include "deunet/metrics.hpp"
#include "deunet/params.hpp"
#include "deunet/tensor.hpp"

namespace deunet {
class UNet;
namespace oracle {

// six nested loops straight from the cross-correlation definition
Tensor conv2d_direct(const Tensor& input, const Tensor& weight, int stride, int padding);
// triple loop matrix product
Tensor matmul_direct(const Tensor& a, const Tensor& b);
// per-window enumeration
Tensor maxpool_direct(const Tensor& input, int k);
// four-neighbor interpolation written out longhand, zero outside
double bilinear_direct(const Tensor& feature, double y, double x);
// quadruple loop over (t, s, tap) of the offset-augmented aggregation
Tensor temporal_deform_direct(const Tensor& clip, const Tensor& offsets,
                              const Tensor& weight);
// single-frame deformable conv by direct loops (shared offset set)
Tensor deform_conv_direct(const Tensor& input, const Tensor& offsets, const Tensor& weight);
// image shifted by integer (dy,dx) with zero fill
Tensor shift_zero_pad(const Tensor& plane, int dy, int dx);

// channel attention written as the explicit double sum:
// p_ji = exp(B_i.C_j) / sum_i exp(B_i.C_j), Z_j = alpha * sum_i p_ji D_i + O_j
Tensor channel_attention_direct(const Tensor& o, const Tensor& bm, const Tensor& cm,
                                const Tensor& dm, double alpha);

// full pairwise-distance metric oracles
double dice_direct(const SegmentationMask& a, const SegmentationMask& b, int cls);
std::optional<double> hausdorff_direct(const SegmentationMask& a, const SegmentationMask& b,
                                       int cls);
std::optional<double> assd_direct(const SegmentationMask& a, const SegmentationMask& b,
                                  int cls);
std::vector<std::array<int, 2>> surface_direct(const SegmentationMask& mask, int cls);

// scalar Adam recurrence maintained independently; returns the value after
// `steps` updates with the given constant gradient
double adam_scalar_recurrence(double x0, double grad, double lr, double weight_decay,
                              int steps);

// per-pixel argmax enumeration with low-index tie rule
SegmentationMask argmax_direct(const Tensor& logits);

// Plain-convolution replay of a U-Net's forward pass reading the same
// parameters by name: deformable encoder convs become plain convs and the
// attention tail is dropped. Matches the network exactly when offset heads
// and alpha are zero.
Tensor plain_unet_forward(const ModelParams& params, const UNet& net, const Tensor& x);

}  // namespace oracle
}  // namespace deunet
