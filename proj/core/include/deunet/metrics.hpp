// Segmentation evaluation: Dice overlap, Hausdorff distance and average
// symmetric surface distance per class, plus the CSV report that aggregates
// them per class and cardiac phase.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace deunet {

// label values: 0 background, 1 RV, 2 MYO, 3 LV
inline constexpr int kNumClasses = 4;
const char* class_name(int cls);

struct SegmentationMask {
  int h = 0, w = 0;
  std::vector<std::uint8_t> labels;  // row-major
  double spacing = 1.0;              // mm per pixel; 1.0 means pixel units

  SegmentationMask() = default;
  SegmentationMask(int h_, int w_, double spacing_ = 1.0)
      : h(h_), w(w_), labels(static_cast<size_t>(h_) * w_, 0), spacing(spacing_) {}

  std::uint8_t at(int y, int x) const { return labels[static_cast<size_t>(y) * w + x]; }
  std::uint8_t& at(int y, int x) { return labels[static_cast<size_t>(y) * w + x]; }
  bool labels_valid() const;
};

// Border pixels of a class region: foreground pixels with at least one
// 4-connected neighbor outside the class, or lying on the image border.
std::vector<std::array<int, 2>> surface_pixels(const SegmentationMask& mask, int cls);
// same points with coordinates scaled by the mask spacing
std::vector<std::array<double, 2>> surface_points(const SegmentationMask& mask, int cls);

// 2 |A n B| / (|A| + |B|); 1.0 when both sides are empty
double dice(const SegmentationMask& pred, const SegmentationMask& gt, int cls);

// Symmetric Hausdorff / average symmetric surface distance over the surface
// point sets, Euclidean, in spacing units. Both surfaces empty -> 0.0.
// Exactly one surface empty -> nullopt (undefined for the case; callers
// exclude it from averages and count it).
std::optional<double> hausdorff(const SegmentationMask& pred, const SegmentationMask& gt,
                                int cls);
std::optional<double> assd(const SegmentationMask& pred, const SegmentationMask& gt,
                           int cls);

enum class Phase : std::uint8_t { other = 0, ed = 1, es = 2 };
const char* phase_name(Phase p);

// Aggregates metric values per foreground class and ED/ES phase; the
// "average" column per metric pools every evaluated case of any phase.
class MetricReport {
 public:
  void add_case(int cls, Phase phase, double dice_v, std::optional<double> hd_v,
                std::optional<double> assd_v);

  int undefined_cases() const { return undefined_; }
  double mean_dice() const;

  // single data row shaped like the paper's comparison table:
  //   method, {assd,hd,dice} x {lv,myo,rv} x {ed,es} + average, undefined_cases
  std::string to_csv(const std::string& method) const;

 private:
  struct Acc {
    double sum = 0.0;
    int n = 0;
    void add(double v) {
      sum += v;
      ++n;
    }
    double mean() const;
  };
  // [metric][cls][phase]: metric 0 assd, 1 hd, 2 dice; cls 1..3; phase ed/es
  Acc cells_[3][kNumClasses][2];
  Acc overall_[3];
  int undefined_ = 0;
};

}  // namespace deunet
