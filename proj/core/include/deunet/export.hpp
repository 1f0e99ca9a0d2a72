// Mask export: RGB PNG (RV red, MYO green, LV blue, background black) and a
// plain CSV of label integers that round-trips losslessly.
#pragma once

#include <string>

#include "deunet/metrics.hpp"

namespace deunet {

void write_mask_png(const std::string& path, const SegmentationMask& mask);
void write_mask_csv(const std::string& path, const SegmentationMask& mask);
SegmentationMask read_mask_csv(const std::string& path);

}  // namespace deunet
