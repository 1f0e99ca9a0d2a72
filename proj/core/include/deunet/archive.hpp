// Clip archive file format "DSEG0001": a flat binary container of video
// clips with center-frame masks. All integers little-endian; frame scalars
// are f32, labels u8. The loader is strict: declared counts and sizes must
// match the payload exactly, labels must be in range, and any header
// corruption is rejected with the failing byte offset.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deunet/dataset.hpp"

namespace deunet {

std::vector<std::uint8_t> encode_archive(const Dataset& ds);
void save_archive(const std::string& path, const Dataset& ds);
Dataset decode_archive(const std::vector<std::uint8_t>& bytes);
// resize_to > 0 rescales frames (bilinear) and masks (nearest) to a square
Dataset load_archive(const std::string& path, int resize_to = 0);

Tensor resize_bilinear(const Tensor& plane, int oh, int ow);
SegmentationMask resize_nearest(const SegmentationMask& mask, int oh, int ow);

}  // namespace deunet
