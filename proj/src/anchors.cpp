#include "coarsecrop/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace coarsecrop {
namespace {

// Keeps at most `limit` boxes from an already ranked list.
std::vector<ScoredBox> suppress(std::span<const ScoredBox> ranked, double iou_threshold, std::size_t limit) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(ranked.size());
  std::vector<unsigned char> suppressed(ranked.size(), 0);
  std::vector<ScoredBox> kept;
  for (std::ptrdiff_t i = 0; i < n && kept.size() < limit; ++i) {
    if (suppressed[i]) continue;
    const ScoredBox head = ranked[i];
    kept.push_back(head);
#pragma omp parallel for schedule(static) if (n - i > 2048)
    for (std::ptrdiff_t j = i + 1; j < n; ++j) {
      if (!suppressed[j] && iou(head, ranked[j]) > iou_threshold) suppressed[j] = 1;
    }
  }
  return kept;
}

void check_box_in_table(const PixelRect& r, const SummedAreaTable& sat) {
  if (r.x1 < 0 || r.y1 < 0 || r.x2 > sat.width() || r.y2 > sat.height())
    throw std::invalid_argument("score_anchors: box outside the score map");
  if (r.x2 <= r.x1 || r.y2 <= r.y1) throw std::invalid_argument("score_anchors: box has zero area after rounding");
}

}  // namespace

PixelRect round_box(const ScoredBox& b) {
  return {static_cast<int>(std::round(b.x1)), static_cast<int>(std::round(b.y1)), static_cast<int>(std::round(b.x2)),
          static_cast<int>(std::round(b.y2))};
}

bool is_valid_box(const ScoredBox& b, int width, int height) {
  return b.x1 >= 0.0 && b.x1 < b.x2 && b.x2 <= width && b.y1 >= 0.0 && b.y1 < b.y2 && b.y2 <= height &&
         b.score >= 0.0 && b.score <= 1.0;
}

double iou(const ScoredBox& a, const ScoredBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

bool ranks_before(const ScoredBox& a, const ScoredBox& b) {
  if (a.score != b.score) return a.score > b.score;
  const double aa = a.area();
  const double ba = b.area();
  if (aa != ba) return aa > ba;
  if (a.x1 != b.x1) return a.x1 < b.x1;
  if (a.y1 != b.y1) return a.y1 < b.y1;
  if (a.x2 != b.x2) return a.x2 < b.x2;
  return a.y2 < b.y2;
}

void AnchorConfig::validate() const {
  if (sizes.empty() || ratios.empty()) throw std::invalid_argument("AnchorConfig: sizes and ratios must be non-empty");
  for (double s : sizes)
    if (!(s > 0.0)) throw std::invalid_argument("AnchorConfig: sizes must be positive");
  for (double r : ratios)
    if (!(r > 0.0)) throw std::invalid_argument("AnchorConfig: ratios must be positive");
  if (stride < 1) throw std::invalid_argument("AnchorConfig: stride must be >= 1");
  if (!(nms_iou > 0.0 && nms_iou <= 1.0)) throw std::invalid_argument("AnchorConfig: nms_iou must be in (0, 1]");
  if (top_n < 1) throw std::invalid_argument("AnchorConfig: top_n must be >= 1");
  if (min_side < 0.0) throw std::invalid_argument("AnchorConfig: min_side must be >= 0");
}

AnchorSet generate_anchors(int height, int width, const AnchorConfig& cfg) {
  cfg.validate();
  if (height < cfg.stride || width < cfg.stride)
    throw std::invalid_argument("generate_anchors: image " + std::to_string(width) + "x" + std::to_string(height) +
                                " is smaller than the stride " + std::to_string(cfg.stride));
  const int h = height / cfg.stride;
  const int w = width / cfg.stride;

  struct Shape {
    double half_w, half_h;
  };
  std::vector<Shape> shapes;
  for (double s : cfg.sizes)
    for (double r : cfg.ratios) {
      const double root = std::sqrt(r);
      shapes.push_back({s / root / 2.0, s * root / 2.0});
    }

  AnchorSet set;
  set.pre_clip_count = shapes.size() * static_cast<std::size_t>(h) * w;
  set.boxes.reserve(set.pre_clip_count);
  for (int i = 0; i < h; ++i) {
    const double cy = (i + 0.5) * cfg.stride;
    for (int j = 0; j < w; ++j) {
      const double cx = (j + 0.5) * cfg.stride;
      for (const Shape& s : shapes) {
        ScoredBox b{std::max(0.0, cx - s.half_w), std::max(0.0, cy - s.half_h),
                    std::min<double>(width, cx + s.half_w), std::min<double>(height, cy + s.half_h), 0.0};
        if (b.width() < cfg.min_side || b.height() < cfg.min_side) continue;
        set.boxes.push_back(b);
      }
    }
  }
  return set;
}

std::vector<ScoredBox> score_anchors(std::span<const ScoredBox> boxes, const SummedAreaTable& sat) {
  std::vector<PixelRect> rects(boxes.size());
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    rects[k] = round_box(boxes[k]);
    check_box_in_table(rects[k], sat);
  }
  std::vector<ScoredBox> out(boxes.begin(), boxes.end());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const double mean = sat.rect_sum(rects[k]) / static_cast<double>(rects[k].area());
    out[k].score = std::clamp(mean, 0.0, 1.0);
  }
  return out;
}

std::vector<ScoredBox> nms(std::span<const ScoredBox> boxes, double iou_threshold) {
  std::vector<ScoredBox> ranked(boxes.begin(), boxes.end());
  std::stable_sort(ranked.begin(), ranked.end(), ranks_before);
  return suppress(ranked, iou_threshold, ranked.size());
}

std::vector<ScoredBox> select_crops(const ScoreMap& score_map, const AnchorConfig& cfg) {
  const AnchorSet anchors = generate_anchors(score_map.height(), score_map.width(), cfg);
  std::vector<ScoredBox> scored = score_anchors(anchors.boxes, build_sat(score_map));
  std::stable_sort(scored.begin(), scored.end(), ranks_before);
  return suppress(scored, cfg.nms_iou, static_cast<std::size_t>(cfg.top_n));
}

}  // namespace coarsecrop
