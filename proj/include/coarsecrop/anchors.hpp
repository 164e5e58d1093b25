#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "coarsecrop/tensor.hpp"

namespace coarsecrop {

/// Axis-aligned box in pixel space, [x1, x2) x [y1, y2), with an objectness
/// score in [0, 1]. Coordinates stay real-valued until they are rounded for
/// pixel access.
struct ScoredBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;
  double score = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }

  bool operator==(const ScoredBox&) const = default;
};

/// Round each coordinate half away from zero.
PixelRect round_box(const ScoredBox& box);

/// True if 0 <= x1 < x2 <= width, 0 <= y1 < y2 <= height and score in [0, 1].
bool is_valid_box(const ScoredBox& box, int width, int height);

double iou(const ScoredBox& a, const ScoredBox& b);

/// Strict total order used to rank candidates: score desc, area desc, then
/// x1, y1, x2, y2 ascending.
bool ranks_before(const ScoredBox& a, const ScoredBox& b);

struct AnchorConfig {
  std::vector<double> sizes{32.0, 64.0, 128.0, 256.0};
  std::vector<double> ratios{0.5, 1.0, 2.0};  // height / width
  int stride = 32;
  double nms_iou = 0.5;
  int top_n = 5;
  /// Clipped anchors thinner than this (either side) are discarded.
  double min_side = 8.0;

  /// Throws std::invalid_argument on empty/non-positive sizes or ratios,
  /// stride < 1, nms_iou outside (0, 1] or top_n < 1.
  void validate() const;
  bool operator==(const AnchorConfig&) const = default;
};

struct AnchorSet {
  std::vector<ScoredBox> boxes;   // clipped and filtered, score 0
  std::size_t pre_clip_count = 0; // |sizes| * |ratios| * h * w
};

/// Dense anchor lattice over a height x width image. Each feature cell
/// (i, j) contributes one anchor per (size, ratio), centered at
/// ((j + 0.5) * stride, (i + 0.5) * stride), width size / sqrt(ratio),
/// height size * sqrt(ratio). Anchors are clipped to the image and dropped
/// if a clipped side is below cfg.min_side.
AnchorSet generate_anchors(int height, int width, const AnchorConfig& cfg);

/// Mean score-map value inside each box (coordinates rounded to pixels).
/// Throws std::invalid_argument for boxes that are empty after rounding or
/// outside the table.
std::vector<ScoredBox> score_anchors(std::span<const ScoredBox> boxes, const SummedAreaTable& sat);

/// Greedy non-maximum suppression. Output is ordered by ranks_before and
/// keeps no pair with IoU above the threshold.
std::vector<ScoredBox> nms(std::span<const ScoredBox> boxes, double iou_threshold);

/// generate -> score -> nms -> first top_n.
std::vector<ScoredBox> select_crops(const ScoreMap& score_map, const AnchorConfig& cfg);

}  // namespace coarsecrop
