// In-memory dataset of video clips with center-frame label masks.
#pragma once

#include <cstdint>
#include <vector>

#include "deunet/metrics.hpp"
#include "deunet/tensor.hpp"

namespace deunet {

struct ClipSample {
  std::uint32_t subject = 0;
  std::uint32_t timestamp = 0;
  Phase phase = Phase::other;
  float spacing = 1.0f;
  Tensor clip;            // [T,H,W], T = 2r+1, center frame is the target
  SegmentationMask mask;  // labels of the target frame
};

struct Dataset {
  std::vector<ClipSample> samples;

  int size() const { return static_cast<int>(samples.size()); }
  // sorted unique subject ids
  std::vector<std::uint32_t> subjects() const;
};

}  // namespace deunet
