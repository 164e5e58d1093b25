#include "coarsecrop/serial.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace coarsecrop::serial {

RawScoreMap channel_sum(const FeatureMap& f) {
  RawScoreMap out(f.height(), f.width());
  for (int i = 0; i < f.height(); ++i)
    for (int j = 0; j < f.width(); ++j) {
      double acc = 0.0;
      for (int c = 0; c < f.channels(); ++c) acc += f.at(c, i, j);
      out(i, j) = static_cast<float>(acc);
    }
  return out;
}

RawScoreMap bilinear_resize(const RawScoreMap& src, int height, int width) {
  RawScoreMap out(height, width);
  const int h = src.height();
  const int w = src.width();
  for (int i = 0; i < height; ++i) {
    const double sy = std::clamp((i + 0.5) * h / height - 0.5, 0.0, double(h - 1));
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, h - 1);
    const double fy = sy - y0;
    for (int j = 0; j < width; ++j) {
      const double sx = std::clamp((j + 0.5) * w / width - 0.5, 0.0, double(w - 1));
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, w - 1);
      const double fx = sx - x0;
      const double upper = (1.0 - fx) * src(y0, x0) + fx * src(y0, x1);
      const double lower = (1.0 - fx) * src(y1, x0) + fx * src(y1, x1);
      out(i, j) = static_cast<float>((1.0 - fy) * upper + fy * lower);
    }
  }
  return out;
}

SummedAreaTable build_sat(const Plane<float>& values) {
  // Same summation order as the parallel kernel (row prefix, then column
  // prefix) so results agree bit for bit.
  Plane<double> t(values.height() + 1, values.width() + 1, 0.0);
  for (int i = 1; i <= values.height(); ++i) {
    double acc = 0.0;
    for (int j = 1; j <= values.width(); ++j) {
      acc += values(i - 1, j - 1);
      t(i, j) = acc;
    }
  }
  for (int i = 2; i <= values.height(); ++i)
    for (int j = 1; j <= values.width(); ++j) t(i, j) += t(i - 1, j);
  return SummedAreaTable(std::move(t));
}

std::vector<ScoredBox> score_anchors(std::span<const ScoredBox> boxes, const SummedAreaTable& sat) {
  std::vector<ScoredBox> out;
  out.reserve(boxes.size());
  for (const ScoredBox& b : boxes) {
    const PixelRect r = round_box(b);
    if (r.x1 < 0 || r.y1 < 0 || r.x2 > sat.width() || r.y2 > sat.height() || r.x2 <= r.x1 || r.y2 <= r.y1)
      throw std::invalid_argument("serial::score_anchors: invalid box");
    ScoredBox s = b;
    s.score = std::clamp(sat.rect_sum(r) / static_cast<double>(r.area()), 0.0, 1.0);
    out.push_back(s);
  }
  return out;
}

std::vector<ScoredBox> suppress_sorted(std::span<const ScoredBox> sorted, double iou_threshold) {
  std::vector<ScoredBox> kept;
  for (const ScoredBox& b : sorted) {
    const bool overlaps = std::any_of(kept.begin(), kept.end(), [&](const ScoredBox& k) { return iou(k, b) > iou_threshold; });
    if (!overlaps) kept.push_back(b);
  }
  return kept;
}

MaskIntegral build_mask_integral(const InstanceMask& mask) {
  Plane<std::int64_t> t(mask.height() + 1, mask.width() + 1, 0);
  for (int i = 1; i <= mask.height(); ++i)
    for (int j = 1; j <= mask.width(); ++j)
      t(i, j) = (mask(i - 1, j - 1) ? 1 : 0) + t(i - 1, j) + t(i, j - 1) - t(i - 1, j - 1);
  return MaskIntegral(std::move(t));
}

FeatureMap conv3x3_s2_relu(const FeatureMap& in, std::span<const float> weights, int out_channels) {
  const int cin = in.channels();
  FeatureMap out(out_channels, in.height() / 2, in.width() / 2);
  for (int o = 0; o < out_channels; ++o)
    for (int i = 0; i < out.height(); ++i)
      for (int j = 0; j < out.width(); ++j) {
        float acc = 0.0f;
        for (int c = 0; c < cin; ++c)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int iy = 2 * i - 1 + ky;
              const int ix = 2 * j - 1 + kx;
              if (iy < 0 || ix < 0 || iy >= in.height() || ix >= in.width()) continue;
              acc += weights[((static_cast<std::size_t>(o) * cin + c) * 3 + ky) * 3 + kx] * in.at(c, iy, ix);
            }
        out.at(o, i, j) = std::max(acc, 0.0f);
      }
  return out;
}

}  // namespace coarsecrop::serial
