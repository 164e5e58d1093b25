#include "coarsecrop/strategies.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>
#include <string>

#include "coarsecrop/rng.hpp"

namespace coarsecrop {
namespace {

constexpr std::array<std::pair<StrategyKind, std::string_view>, 6> kNames{{
    {StrategyKind::Image, "image"},
    {StrategyKind::Grid, "grid"},
    {StrategyKind::GT, "gt"},
    {StrategyKind::GTpad, "gtpad"},
    {StrategyKind::Poor, "poor"},
    {StrategyKind::Our, "our"},
}};

CropSet make_set(StrategyKind kind) {
  CropSet set;
  set.strategy.kind = kind;
  return set;
}

}  // namespace

std::string_view to_string(StrategyKind kind) {
  for (const auto& [k, name] : kNames)
    if (k == kind) return name;
  return "unknown";
}

std::optional<StrategyKind> parse_strategy_kind(std::string_view name) {
  for (const auto& [k, n] : kNames)
    if (n == name) return k;
  return std::nullopt;
}

void StrategySpec::validate() const {
  if (!(pad_ratio >= 0.0)) throw std::invalid_argument("pad_ratio must be >= 0");
  if (!(poor_lo >= 0.0 && poor_lo < poor_hi && poor_hi <= 1.0))
    throw std::invalid_argument("Poor-Crop band must satisfy 0 <= lo < hi <= 1");
  if (poor_count < 1) throw std::invalid_argument("Poor-Crop count must be >= 1");
  anchors.validate();
}

CropSet image_crop(int height, int width) {
  if (height < 1 || width < 1) throw std::invalid_argument("image_crop: empty image");
  CropSet set = make_set(StrategyKind::Image);
  set.boxes.push_back({0.0, 0.0, static_cast<double>(width), static_cast<double>(height), 0.0});
  return set;
}

CropSet grid_crop(int height, int width) {
  if (height < 2 || width < 6)
    throw std::invalid_argument("grid_crop: image " + std::to_string(width) + "x" + std::to_string(height) +
                                " is below the 6x2 minimum");
  CropSet set = make_set(StrategyKind::Grid);
  const int top = height / 2;
  auto split_row = [&](int y1, int y2, int cells) {
    const int cell = width / cells;
    for (int c = 0; c < cells; ++c) {
      const int x1 = c * cell;
      const int x2 = c + 1 == cells ? width : x1 + cell;
      set.boxes.push_back({double(x1), double(y1), double(x2), double(y2), 0.0});
    }
  };
  split_row(0, top, 3);
  split_row(top, height, 2);
  return set;
}

CropSet gt_crop(std::span<const ScoredBox> annotations) {
  CropSet set = make_set(StrategyKind::GT);
  set.boxes.assign(annotations.begin(), annotations.end());
  if (set.boxes.empty()) set.warnings.emplace_back("no annotations");
  return set;
}

CropSet gtpad_crop(std::span<const ScoredBox> annotations, double pad_ratio, int height, int width) {
  if (!(pad_ratio >= 0.0)) throw std::invalid_argument("gtpad_crop: pad_ratio must be >= 0");
  CropSet set = make_set(StrategyKind::GTpad);
  set.strategy.pad_ratio = pad_ratio;
  for (const ScoredBox& b : annotations) {
    const double dx = pad_ratio * b.width();
    const double dy = pad_ratio * b.height();
    set.boxes.push_back({std::max(0.0, b.x1 - dx), std::max(0.0, b.y1 - dy), std::min<double>(width, b.x2 + dx),
                         std::min<double>(height, b.y2 + dy), b.score});
  }
  if (set.boxes.empty()) set.warnings.emplace_back("no annotations");
  return set;
}

CropSet poor_crop(const InstanceMask& mask, double lo, double hi, int count, std::uint64_t seed) {
  if (!(lo >= 0.0 && lo < hi && hi <= 1.0)) throw std::invalid_argument("poor_crop: band must satisfy 0 <= lo < hi <= 1");
  if (mask.height() < 1 || mask.width() < 1) throw std::invalid_argument("poor_crop: empty mask");
  CropSet set = make_set(StrategyKind::Poor);
  set.strategy.poor_lo = lo;
  set.strategy.poor_hi = hi;
  set.strategy.poor_count = count;
  set.strategy.seed = seed;

  const MaskIntegral integral = build_mask_integral(mask);
  const int W = mask.width();
  const int H = mask.height();
  const int max_side = std::min(W, H);
  const int min_side = std::min(kPoorMinSide, max_side);
  Rng rng(seed);
  int draws = 0;
  while (static_cast<int>(set.boxes.size()) < count && draws < kPoorDrawBudget) {
    ++draws;
    const int w = static_cast<int>(rng.uniform_int(min_side, max_side));
    const int h = static_cast<int>(rng.uniform_int(min_side, max_side));
    const int x = static_cast<int>(rng.uniform_int(0, W - w));
    const int y = static_cast<int>(rng.uniform_int(0, H - h));
    const ScoredBox box{double(x), double(y), double(x + w), double(y + h), 0.0};
    const double o = crop_objectness(box, integral);
    if (o >= lo && o <= hi) set.boxes.push_back(box);
  }
  if (static_cast<int>(set.boxes.size()) < count)
    set.warnings.push_back("poor-crop draw budget exhausted: " + std::to_string(set.boxes.size()) + " of " +
                           std::to_string(count) + " boxes found in " + std::to_string(draws) + " draws");
  return set;
}

CropSet our_crop(const ScoreMap& score_map, const AnchorConfig& cfg) {
  CropSet set = make_set(StrategyKind::Our);
  set.strategy.anchors = cfg;
  set.boxes = select_crops(score_map, cfg);
  return set;
}

}  // namespace coarsecrop
