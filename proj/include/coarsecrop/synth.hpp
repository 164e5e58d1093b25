#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "coarsecrop/anchors.hpp"
#include "coarsecrop/image.hpp"
#include "coarsecrop/objectness.hpp"
#include "coarsecrop/tensor.hpp"

namespace coarsecrop {

enum class ShapeKind { Rectangle, Ellipse };

/// An object in pixel units. For ellipses (cx, cy) is the center and (a, b)
/// the semi-axes; for rectangles (x, y) is the top-left corner and (w, h)
/// the size.
struct SceneObject {
  ShapeKind kind = ShapeKind::Rectangle;
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
  std::array<std::uint8_t, 3> color{200, 40, 40};
};

struct SceneSpec {
  int width = 320;
  int height = 240;
  int min_objects = 1;
  int max_objects = 3;
  int min_size = 32;
  int max_size = 120;
  bool rectangles = true;
  bool ellipses = true;
  bool textured_background = true;
  bool background_only = false;
  std::uint64_t seed = 0;
  /// Placed verbatim instead of sampling when non-empty.
  std::vector<SceneObject> objects;
  int placement_budget = 1000;

  void validate() const;
};

struct Scene {
  RgbImage image;
  InstanceMask mask{0, 0};
  std::vector<ScoredBox> boxes;  // tight box per instance
  std::vector<InstanceMask> instances;
};

/// Deterministic in the spec. Sampled objects do not overlap; throws
/// std::runtime_error if they cannot be placed within the budget.
Scene generate_scene(const SceneSpec& spec);

/// d = 1 map whose cell (i, j) is the object fraction of the
/// stride x stride block at (i * stride, j * stride).
FeatureMap oracle_features(const InstanceMask& mask, int stride);

}  // namespace coarsecrop
