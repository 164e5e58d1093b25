#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "coarsecrop/crop_set.hpp"
#include "coarsecrop/tensor.hpp"

namespace coarsecrop {

/// Class-agnostic object mask: 1 where any instance covers the pixel.
class InstanceMask {
 public:
  InstanceMask(int height, int width) : bits_(height, width, 0) {}
  explicit InstanceMask(Plane<unsigned char> bits) : bits_(std::move(bits)) {}

  int height() const { return bits_.height(); }
  int width() const { return bits_.width(); }
  bool operator()(int row, int col) const { return bits_(row, col) != 0; }
  void set(int row, int col, bool on = true) { bits_(row, col) = on ? 1 : 0; }

  /// Number of object pixels.
  long long count() const;

  const Plane<unsigned char>& bits() const { return bits_; }
  bool operator==(const InstanceMask&) const = default;

 private:
  Plane<unsigned char> bits_;
};

/// Integer summed-area table over a mask; rectangle counts are exact.
class MaskIntegral {
 public:
  explicit MaskIntegral(Plane<std::int64_t> table) : table_(std::move(table)) {}

  int height() const { return table_.height() - 1; }
  int width() const { return table_.width() - 1; }
  std::int64_t count(const PixelRect& r) const {
    return table_(r.y2, r.x2) - table_(r.y1, r.x2) - table_(r.y2, r.x1) + table_(r.y1, r.x1);
  }
  const Plane<std::int64_t>& table() const { return table_; }

 private:
  Plane<std::int64_t> table_;
};

MaskIntegral build_mask_integral(const InstanceMask& mask);

/// Fraction of object pixels inside the (rounded) box. Throws
/// std::invalid_argument for empty or out-of-bounds boxes.
double crop_objectness(const ScoredBox& box, const MaskIntegral& integral);
double crop_objectness(const ScoredBox& box, const InstanceMask& mask);

enum class CropCategory { Poor, Coarse, Precise };

inline constexpr double kPoorBelow = 0.20;
inline constexpr double kPreciseAbove = 0.80;

std::string_view to_string(CropCategory category);

/// < 0.20 Poor, > 0.80 Precise, otherwise Coarse (both boundaries Coarse).
/// Throws std::invalid_argument outside [0, 1].
CropCategory categorize(double objectness);

struct CropRecord {
  ImageId image_id = 0;
  StrategyKind strategy = StrategyKind::Image;
  ScoredBox box;
  double objectness = 0.0;
  CropCategory category = CropCategory::Poor;
};

struct ObjectnessReport {
  std::vector<CropRecord> crops;
  double mean = 0.0;
  /// Indexed by CropCategory.
  std::array<double, 3> fractions{};

  double fraction(CropCategory c) const { return fractions[static_cast<int>(c)]; }
};

/// Per-crop objectness over every crop of every set, pooled corpus-wide.
/// Sets are visited in the given order. Throws std::invalid_argument when
/// there are no crops at all or an image has no mask.
ObjectnessReport strategy_report(std::span<const CropSet> crop_sets,
                                 const std::map<ImageId, InstanceMask>& masks);

}  // namespace coarsecrop
