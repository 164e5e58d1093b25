#pragma once

#include <span>

#include "coarsecrop/crop_set.hpp"
#include "coarsecrop/objectness.hpp"

namespace coarsecrop {

/// Whole image as the only crop.
CropSet image_crop(int height, int width);

/// Two rows: the top floor(H/2) rows split into 3 cells, the rest into 2.
/// Integer remainders go to the last cell of each row / the bottom row.
/// Requires height >= 2 and width >= 6.
CropSet grid_crop(int height, int width);

/// Ground-truth boxes, verbatim and in order.
CropSet gt_crop(std::span<const ScoredBox> annotations);

/// Ground-truth boxes grown by pad_ratio * side on each side, clipped.
CropSet gtpad_crop(std::span<const ScoredBox> annotations, double pad_ratio, int height, int width);

inline constexpr int kPoorDrawBudget = 10000;
inline constexpr int kPoorMinSide = 32;

/// Rejection-sample random boxes until `count` of them have mask objectness
/// inside [lo, hi] or the draw budget runs out (partial set + warning).
CropSet poor_crop(const InstanceMask& mask, double lo, double hi, int count, std::uint64_t seed);

/// Anchor pipeline over the score map.
CropSet our_crop(const ScoreMap& score_map, const AnchorConfig& cfg);

}  // namespace coarsecrop
