#include "coarsecrop/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace coarsecrop {
namespace {

std::size_t feature_count(int channels, int height, int width) {
  if (channels < 1 || height < 1 || width < 1)
    throw std::invalid_argument("FeatureMap: dimensions must be >= 1, got " + std::to_string(channels) + "x" +
                                std::to_string(height) + "x" + std::to_string(width));
  return static_cast<std::size_t>(channels) * height * width;
}

// Source sample positions for one output axis under the half-pixel
// convention, clamped to [0, n - 1].
struct AxisTaps {
  std::vector<int> lo;
  std::vector<int> hi;
  std::vector<double> frac;
};

AxisTaps axis_taps(int src, int dst) {
  AxisTaps t;
  t.lo.resize(dst);
  t.hi.resize(dst);
  t.frac.resize(dst);
  for (int o = 0; o < dst; ++o) {
    double s = (o + 0.5) * src / dst - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    const int i0 = static_cast<int>(std::floor(s));
    t.lo[o] = i0;
    t.hi[o] = std::min(i0 + 1, src - 1);
    t.frac[o] = s - i0;
  }
  return t;
}

}  // namespace

FeatureMap::FeatureMap(int channels, int height, int width)
    : channels_(channels), height_(height), width_(width), values_(feature_count(channels, height, width), 0.0f) {}

FeatureMap::FeatureMap(int channels, int height, int width, std::vector<float> values)
    : channels_(channels), height_(height), width_(width), values_(std::move(values)) {
  if (values_.size() != feature_count(channels, height, width))
    throw std::invalid_argument("FeatureMap: value count does not match dimensions");
  check_finite();
}

void FeatureMap::check_finite() const {
  for (float v : values_)
    if (!std::isfinite(v)) throw std::invalid_argument("FeatureMap: non-finite value");
}

ScoreMap::ScoreMap(Plane<float> values) : values_(std::move(values)) {
  for (float v : values_.values())
    if (!(v >= 0.0f && v <= 1.0f)) throw std::invalid_argument("ScoreMap: value outside [0, 1]");
}

SummedAreaTable::SummedAreaTable(Plane<double> table) : table_(std::move(table)) {
  if (table_.height() < 1 || table_.width() < 1)
    throw std::invalid_argument("SummedAreaTable: table needs a border row and column");
}

RawScoreMap channel_sum(const FeatureMap& f) {
  const int h = f.height();
  const int w = f.width();
  const int d = f.channels();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const float* data = f.values().data();
  RawScoreMap out(h, w);
  float* dst = out.values().data();

  // Each pixel accumulates its channels in order, so the result does not
  // depend on the thread count.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(plane); ++p) {
    double acc = 0.0;
    for (int c = 0; c < d; ++c) acc += data[c * plane + p];
    dst[p] = static_cast<float>(acc);
  }
  return out;
}

RawScoreMap minmax_normalize(const RawScoreMap& raw) {
  RawScoreMap out(raw.height(), raw.width());
  if (raw.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(raw.values().begin(), raw.values().end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) return out;  // constant map: no contrast, all zeros
  const double range = hi - lo;
  auto src = raw.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>((src[i] - lo) / range);
  return out;
}

RawScoreMap bilinear_resize(const RawScoreMap& source, int height, int width) {
  if (source.empty()) throw std::invalid_argument("bilinear_resize: empty source");
  if (height < 1 || width < 1) throw std::invalid_argument("bilinear_resize: target must be at least 1x1");
  const AxisTaps rows = axis_taps(source.height(), height);
  const AxisTaps cols = axis_taps(source.width(), width);
  RawScoreMap out(height, width);

#pragma omp parallel for schedule(static)
  for (int i = 0; i < height; ++i) {
    const auto top = source.row(rows.lo[i]);
    const auto bottom = source.row(rows.hi[i]);
    const double fy = rows.frac[i];
    auto dst = out.row(i);
    for (int j = 0; j < width; ++j) {
      const double fx = cols.frac[j];
      const double upper = (1.0 - fx) * top[cols.lo[j]] + fx * top[cols.hi[j]];
      const double lower = (1.0 - fx) * bottom[cols.lo[j]] + fx * bottom[cols.hi[j]];
      dst[j] = static_cast<float>((1.0 - fy) * upper + fy * lower);
    }
  }
  return out;
}

RawScoreMap bilinear_upsample(const RawScoreMap& source, int height, int width) {
  if (height < source.height() || width < source.width())
    throw std::invalid_argument("bilinear_upsample: target " + std::to_string(height) + "x" + std::to_string(width) +
                                " is smaller than source " + std::to_string(source.height()) + "x" +
                                std::to_string(source.width()));
  return bilinear_resize(source, height, width);
}

ScoreMap make_score_map(const FeatureMap& features, int image_height, int image_width) {
  return ScoreMap(bilinear_upsample(minmax_normalize(channel_sum(features)), image_height, image_width));
}

SummedAreaTable build_sat(const Plane<float>& values) {
  const int h = values.height();
  const int w = values.width();
  Plane<double> table(h + 1, w + 1, 0.0);

  // Row prefix sums, then column prefix sums over blocks of columns.
#pragma omp parallel for schedule(static)
  for (int i = 0; i < h; ++i) {
    const auto src = values.row(i);
    auto dst = table.row(i + 1);
    double acc = 0.0;
    for (int j = 0; j < w; ++j) {
      acc += src[j];
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
  return SummedAreaTable(std::move(table));
}

}  // namespace coarsecrop
