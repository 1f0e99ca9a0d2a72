// Synthetic cine phantom: a bright LV disk inside a MYO ring with an
// attached RV crescent, all breathing sinusoidally across the cardiac cycle,
// plus per-frame Gaussian noise. Stands in for real short-axis data at desk
// scale; the independent per-frame noise and the wall motion give temporal
// fusion an actual signal to exploit.
#pragma once

#include <cstdint>

#include "deunet/dataset.hpp"

namespace deunet {

struct PhantomSpec {
  int size = 64;         // square image side
  int train_clips = 40;  // intended split sizes; subjects = total/timestamps
  int val_clips = 10;
  int timestamps = 5;  // cycle length per subject; one clip per timestamp
  int r = 1;           // temporal radius, clip length 2r+1
  double motion_amp = 0.14;   // fractional radius modulation over the cycle
  double noise_sigma = 0.10;  // additive Gaussian noise per frame
  // geometry ranges, fractions of the image side
  double lv_radius_min = 0.10, lv_radius_max = 0.14;
  double myo_thickness_min = 0.055, myo_thickness_max = 0.085;
  double rv_radius_min = 0.10, rv_radius_max = 0.14;
  double spacing = 1.0;
  bool cyclic = true;  // cine loop: clip frames wrap around the cycle

  int total_clips() const { return train_clips + val_clips; }
  int subjects() const;
  void validate() const;
};

Dataset generate_phantom(const PhantomSpec& spec, std::uint64_t seed);

}  // namespace deunet
