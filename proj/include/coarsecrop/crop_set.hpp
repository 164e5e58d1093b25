#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coarsecrop/anchors.hpp"

namespace coarsecrop {

using ImageId = std::int64_t;

enum class StrategyKind { Image, Grid, GT, GTpad, Poor, Our };

std::string_view to_string(StrategyKind kind);
/// Accepts the lowercase names used on the command line ("image", "gtpad", ...).
std::optional<StrategyKind> parse_strategy_kind(std::string_view name);

struct StrategySpec {
  StrategyKind kind = StrategyKind::Our;
  double pad_ratio = 0.3;
  double poor_lo = 0.15;
  double poor_hi = 0.25;
  /// Poor-Crop boxes requested per image.
  int poor_count = 5;
  AnchorConfig anchors;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const StrategySpec&) const = default;
};

struct CropSet {
  ImageId image_id = 0;
  StrategySpec strategy;
  std::vector<ScoredBox> boxes;
  std::vector<std::string> warnings;
};

}  // namespace coarsecrop
