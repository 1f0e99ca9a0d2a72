#include "deunet/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace deunet {

const char* class_name(int cls) {
  switch (cls) {
    case 0: return "BG";
    case 1: return "RV";
    case 2: return "MYO";
    case 3: return "LV";
    default: throw std::invalid_argument("class id out of range");
  }
}

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::ed: return "ED";
    case Phase::es: return "ES";
    default: return "other";
  }
}

bool SegmentationMask::labels_valid() const {
  for (std::uint8_t v : labels)
    if (v >= kNumClasses) return false;
  return true;
}

static void check_pair(const SegmentationMask& a, const SegmentationMask& b) {
  if (a.h != b.h || a.w != b.w)
    throw std::invalid_argument("mask shape mismatch: " + std::to_string(a.h) + "x" +
                                std::to_string(a.w) + " vs " + std::to_string(b.h) + "x" +
                                std::to_string(b.w));
}

std::vector<std::array<int, 2>> surface_pixels(const SegmentationMask& mask, int cls) {
  std::vector<std::array<int, 2>> pts;
  for (int y = 0; y < mask.h; ++y) {
    for (int x = 0; x < mask.w; ++x) {
      if (mask.at(y, x) != cls) continue;
      const bool border = y == 0 || y == mask.h - 1 || x == 0 || x == mask.w - 1 ||
                          mask.at(y - 1, x) != cls || mask.at(y + 1, x) != cls ||
                          mask.at(y, x - 1) != cls || mask.at(y, x + 1) != cls;
      if (border) pts.push_back({y, x});
    }
  }
  return pts;
}

std::vector<std::array<double, 2>> surface_points(const SegmentationMask& mask, int cls) {
  std::vector<std::array<double, 2>> pts;
  for (const auto& p : surface_pixels(mask, cls))
    pts.push_back({mask.spacing * p[0], mask.spacing * p[1]});
  return pts;
}

double dice(const SegmentationMask& pred, const SegmentationMask& gt, int cls) {
  check_pair(pred, gt);
  std::int64_t inter = 0, a = 0, b = 0;
  for (size_t i = 0; i < pred.labels.size(); ++i) {
    const bool in_a = pred.labels[i] == cls;
    const bool in_b = gt.labels[i] == cls;
    a += in_a;
    b += in_b;
    inter += in_a && in_b;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

namespace {

std::int64_t sq_dist(const std::array<int, 2>& a, const std::array<int, 2>& b) {
  const std::int64_t dy = a[0] - b[0];
  const std::int64_t dx = a[1] - b[1];
  return dy * dy + dx * dx;
}

std::int64_t min_sq_dist(const std::array<int, 2>& a,
                         const std::vector<std::array<int, 2>>& pts) {
  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  for (const auto& b : pts) best = std::min(best, sq_dist(a, b));
  return best;
}

}  // namespace

std::optional<double> hausdorff(const SegmentationMask& pred, const SegmentationMask& gt,
                                int cls) {
  check_pair(pred, gt);
  const auto sa = surface_pixels(pred, cls);
  const auto sb = surface_pixels(gt, cls);
  if (sa.empty() && sb.empty()) return 0.0;
  if (sa.empty() || sb.empty()) return std::nullopt;
  std::int64_t worst = 0;
  for (const auto& a : sa) worst = std::max(worst, min_sq_dist(a, sb));
  for (const auto& b : sb) worst = std::max(worst, min_sq_dist(b, sa));
  return pred.spacing * std::sqrt(static_cast<double>(worst));
}

std::optional<double> assd(const SegmentationMask& pred, const SegmentationMask& gt,
                           int cls) {
  check_pair(pred, gt);
  const auto sa = surface_pixels(pred, cls);
  const auto sb = surface_pixels(gt, cls);
  if (sa.empty() && sb.empty()) return 0.0;
  if (sa.empty() || sb.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& a : sa)
    sum += pred.spacing * std::sqrt(static_cast<double>(min_sq_dist(a, sb)));
  for (const auto& b : sb)
    sum += pred.spacing * std::sqrt(static_cast<double>(min_sq_dist(b, sa)));
  return sum / static_cast<double>(sa.size() + sb.size());
}

double MetricReport::Acc::mean() const {
  return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

void MetricReport::add_case(int cls, Phase phase, double dice_v, std::optional<double> hd_v,
                            std::optional<double> assd_v) {
  if (cls < 1 || cls >= kNumClasses)
    throw std::invalid_argument("add_case: cls must be a foreground class");
  const int ph = phase == Phase::ed ? 0 : phase == Phase::es ? 1 : -1;
  const std::optional<double> vals[3] = {assd_v, hd_v, dice_v};
  for (int m = 0; m < 3; ++m) {
    if (!vals[m].has_value()) {
      ++undefined_;
      continue;
    }
    if (ph >= 0) cells_[m][cls][ph].add(*vals[m]);
    overall_[m].add(*vals[m]);
  }
}

double MetricReport::mean_dice() const { return overall_[2].mean(); }

std::string MetricReport::to_csv(const std::string& method) const {
  static const char* metric_names[3] = {"assd", "hd", "dice"};
  static const int cls_order[3] = {3, 2, 1};  // LV, MYO, RV, as in the usual table layout
  std::ostringstream head, row;
  head << "method";
  row << method;
  row.precision(6);
  row << std::fixed;
  for (int m = 0; m < 3; ++m) {
    for (int c : cls_order) {
      for (int ph = 0; ph < 2; ++ph) {
        head << ',' << metric_names[m] << '_' << class_name(c) << '_'
             << (ph == 0 ? "ED" : "ES");
        row << ',' << cells_[m][c][ph].mean();
      }
    }
    head << ',' << metric_names[m] << "_avg";
    row << ',' << overall_[m].mean();
  }
  head << ",undefined_cases";
  row << ',' << undefined_;
  return head.str() + "\n" + row.str() + "\n";
}

}  // namespace deunet
