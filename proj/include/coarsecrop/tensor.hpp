#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace coarsecrop {

/// Dense row-major 2-D array.
template <typename T>
class Plane {
 public:
  Plane() = default;
  Plane(int height, int width, T fill = T{})
      : height_(height), width_(width), values_(checked_size(height, width), fill) {}
  Plane(int height, int width, std::vector<T> values)
      : height_(height), width_(width), values_(std::move(values)) {
    if (values_.size() != checked_size(height, width))
      throw std::invalid_argument("Plane: value count does not match dimensions");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  T& operator()(int row, int col) { return values_[index(row, col)]; }
  const T& operator()(int row, int col) const { return values_[index(row, col)]; }

  std::span<T> row(int r) { return {values_.data() + index(r, 0), static_cast<std::size_t>(width_)}; }
  std::span<const T> row(int r) const {
    return {values_.data() + index(r, 0), static_cast<std::size_t>(width_)};
  }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  bool operator==(const Plane&) const = default;

 private:
  static std::size_t checked_size(int height, int width) {
    if (height < 0 || width < 0) throw std::invalid_argument("Plane: negative dimension");
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<T> values_;
};

/// d x h x w convolutional feature tensor, channel-major, single precision.
/// Values must be finite and every dimension at least 1.
class FeatureMap {
 public:
  FeatureMap(int channels, int height, int width);
  FeatureMap(int channels, int height, int width, std::vector<float> values);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }

  float& at(int c, int i, int j) { return values_[offset(c, i, j)]; }
  float at(int c, int i, int j) const { return values_[offset(c, i, j)]; }

  /// One channel as a contiguous h*w slice.
  std::span<const float> channel(int c) const {
    return {values_.data() + offset(c, 0, 0), static_cast<std::size_t>(height_) * width_};
  }
  std::span<float> channel(int c) {
    return {values_.data() + offset(c, 0, 0), static_cast<std::size_t>(height_) * width_};
  }

  std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }

  /// Throws std::invalid_argument if any value is NaN or infinite.
  void check_finite() const;

  bool operator==(const FeatureMap&) const = default;

 private:
  std::size_t offset(int c, int i, int j) const {
    return (static_cast<std::size_t>(c) * height_ + i) * width_ + j;
  }

  int channels_;
  int height_;
  int width_;
  std::vector<float> values_;
};

/// Un-normalized h x w objectness map (sum over feature channels).
using RawScoreMap = Plane<float>;

/// Image-resolution objectness map with every value in [0, 1].
class ScoreMap {
 public:
  /// Throws std::invalid_argument if a value falls outside [0, 1].
  explicit ScoreMap(Plane<float> values);

  int height() const { return values_.height(); }
  int width() const { return values_.width(); }
  float operator()(int row, int col) const { return values_(row, col); }
  const Plane<float>& plane() const { return values_; }

  bool operator==(const ScoreMap&) const = default;

 private:
  Plane<float> values_;
};

/// Integer pixel rectangle, half-open: [x1, x2) x [y1, y2).
struct PixelRect {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;

  long long area() const { return static_cast<long long>(x2 - x1) * (y2 - y1); }
  bool operator==(const PixelRect&) const = default;
};

/// Cumulative sums with a zero border: entry (i, j) holds the sum of all
/// source values with row < i and col < j. Storage is (H+1) x (W+1) doubles.
class SummedAreaTable {
 public:
  explicit SummedAreaTable(Plane<double> table);

  int height() const { return table_.height() - 1; }
  int width() const { return table_.width() - 1; }
  double at(int i, int j) const { return table_(i, j); }

  /// Sum over a rectangle that lies within [0, W] x [0, H].
  double rect_sum(const PixelRect& r) const {
    return table_(r.y2, r.x2) - table_(r.y1, r.x2) - table_(r.y2, r.x1) + table_(r.y1, r.x1);
  }

  const Plane<double>& table() const { return table_; }

 private:
  Plane<double> table_;
};

/// A(i,j) = sum over channels of f(c,i,j), accumulated in double.
RawScoreMap channel_sum(const FeatureMap& features);

/// (a - min) / (max - min); a constant map becomes all zeros.
RawScoreMap minmax_normalize(const RawScoreMap& raw);

/// Half-pixel-center bilinear resize to height x width with edge clamping.
/// Only upsampling is allowed: throws std::invalid_argument if the target is
/// smaller than the source along either axis.
RawScoreMap bilinear_upsample(const RawScoreMap& source, int height, int width);

/// Bilinear resize without the upsampling restriction (used for image
/// downscaling ahead of feature extraction).
RawScoreMap bilinear_resize(const RawScoreMap& source, int height, int width);

/// Sum over channels, normalize to [0, 1], upsample to the image size.
ScoreMap make_score_map(const FeatureMap& features, int image_height, int image_width);

SummedAreaTable build_sat(const Plane<float>& values);
inline SummedAreaTable build_sat(const ScoreMap& map) { return build_sat(map.plane()); }

}  // namespace coarsecrop
