#include "coarsecrop/objectness.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace coarsecrop {

long long InstanceMask::count() const {
  long long n = 0;
  for (unsigned char v : bits_.values()) n += v != 0;
  return n;
}

MaskIntegral build_mask_integral(const InstanceMask& mask) {
  const int h = mask.height();
  const int w = mask.width();
  Plane<std::int64_t> table(h + 1, w + 1, 0);
  const auto& bits = mask.bits();

#pragma omp parallel for schedule(static)
  for (int i = 0; i < h; ++i) {
    const auto src = bits.row(i);
    auto dst = table.row(i + 1);
    std::int64_t acc = 0;
    for (int j = 0; j < w; ++j) {
      acc += src[j] != 0;
      dst[j + 1] = acc;
    }
  }
  constexpr int kBlock = 64;
  const int blocks = (w + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(static)
  for (int b = 0; b < blocks; ++b) {
    const int j0 = 1 + b * kBlock;
    const int j1 = std::min(w + 1, j0 + kBlock);
    for (int i = 2; i <= h; ++i) {
      const auto prev = table.row(i - 1);
      auto cur = table.row(i);
      for (int j = j0; j < j1; ++j) cur[j] += prev[j];
    }
  }
  return MaskIntegral(std::move(table));
}

double crop_objectness(const ScoredBox& box, const MaskIntegral& integral) {
  const PixelRect r = round_box(box);
  if (r.x1 < 0 || r.y1 < 0 || r.x2 > integral.width() || r.y2 > integral.height())
    throw std::invalid_argument("crop_objectness: box outside the mask");
  if (r.x2 <= r.x1 || r.y2 <= r.y1) throw std::invalid_argument("crop_objectness: zero-area box");
  return static_cast<double>(integral.count(r)) / static_cast<double>(r.area());
}

double crop_objectness(const ScoredBox& box, const InstanceMask& mask) {
  return crop_objectness(box, build_mask_integral(mask));
}

std::string_view to_string(CropCategory category) {
  switch (category) {
    case CropCategory::Poor:
      return "poor";
    case CropCategory::Coarse:
      return "coarse";
    case CropCategory::Precise:
      return "precise";
  }
  return "unknown";
}

CropCategory categorize(double objectness) {
  if (!(objectness >= 0.0 && objectness <= 1.0))
    throw std::invalid_argument("categorize: objectness " + std::to_string(objectness) + " outside [0, 1]");
  if (objectness < kPoorBelow) return CropCategory::Poor;
  if (objectness > kPreciseAbove) return CropCategory::Precise;
  return CropCategory::Coarse;
}

ObjectnessReport strategy_report(std::span<const CropSet> crop_sets, const std::map<ImageId, InstanceMask>& masks) {
  ObjectnessReport report;
  for (const CropSet& set : crop_sets) {
    if (set.boxes.empty()) continue;
    const auto it = masks.find(set.image_id);
    if (it == masks.end())
      throw std::invalid_argument("strategy_report: no mask for image " + std::to_string(set.image_id));
    const MaskIntegral integral = build_mask_integral(it->second);
    for (const ScoredBox& box : set.boxes) {
      const double o = crop_objectness(box, integral);
      report.crops.push_back({set.image_id, set.strategy.kind, box, o, categorize(o)});
    }
  }
  if (report.crops.empty()) throw std::invalid_argument("strategy_report: no crops to evaluate");

  double sum = 0.0;
  std::array<std::size_t, 3> counts{};
  for (const CropRecord& c : report.crops) {
    sum += c.objectness;
    ++counts[static_cast<int>(c.category)];
  }
  const double n = static_cast<double>(report.crops.size());
  report.mean = std::clamp(sum / n, 0.0, 1.0);
  for (int k = 0; k < 3; ++k) report.fractions[k] = counts[k] / n;
  return report;
}

}  // namespace coarsecrop
