#include "coarsecrop/synth.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "coarsecrop/rng.hpp"

namespace coarsecrop {
namespace {

InstanceMask rasterize(const SceneObject& o, int height, int width) {
  InstanceMask m(height, width);
  if (o.kind == ShapeKind::Rectangle) {
    // pixel centers in [x, x + w) x [y, y + h)
    const int x1 = std::max(0, static_cast<int>(std::ceil(o.x - 0.5)));
    const int x2 = std::min(width, static_cast<int>(std::ceil(o.x + o.w - 0.5)));
    const int y1 = std::max(0, static_cast<int>(std::ceil(o.y - 0.5)));
    const int y2 = std::min(height, static_cast<int>(std::ceil(o.y + o.h - 0.5)));
    for (int y = y1; y < y2; ++y)
      for (int x = x1; x < x2; ++x) m.set(y, x);
  } else {
    const int y1 = std::max(0, static_cast<int>(std::floor(o.y - o.h)));
    const int y2 = std::min(height, static_cast<int>(std::ceil(o.y + o.h)) + 1);
    const int x1 = std::max(0, static_cast<int>(std::floor(o.x - o.w)));
    const int x2 = std::min(width, static_cast<int>(std::ceil(o.x + o.w)) + 1);
    for (int y = y1; y < y2; ++y)
      for (int x = x1; x < x2; ++x) {
        const double dx = (x + 0.5 - o.x) / o.w;
        const double dy = (y + 0.5 - o.y) / o.h;
        if (dx * dx + dy * dy <= 1.0) m.set(y, x);
      }
  }
  return m;
}

std::optional<ScoredBox> tight_box(const InstanceMask& m) {
  int x1 = m.width(), y1 = m.height(), x2 = -1, y2 = -1;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m(y, x)) {
        x1 = std::min(x1, x);
        y1 = std::min(y1, y);
        x2 = std::max(x2, x);
        y2 = std::max(y2, y);
      }
  if (x2 < 0) return std::nullopt;
  return ScoredBox{double(x1), double(y1), double(x2 + 1), double(y2 + 1), 0.0};
}

bool overlaps(const InstanceMask& a, const InstanceMask& b) {
  const auto av = a.bits().values();
  const auto bv = b.bits().values();
  for (std::size_t i = 0; i < av.size(); ++i)
    if (av[i] && bv[i]) return true;
  return false;
}

std::array<std::uint8_t, 3> random_color(Rng& rng, int lo, int hi) {
  return {static_cast<std::uint8_t>(rng.uniform_int(lo, hi)), static_cast<std::uint8_t>(rng.uniform_int(lo, hi)),
          static_cast<std::uint8_t>(rng.uniform_int(lo, hi))};
}

SceneObject sample_object(const SceneSpec& spec, Rng& rng) {
  SceneObject o;
  const bool ellipse = spec.ellipses && (!spec.rectangles || rng.uniform01() < 0.5);
  const int max_w = std::min(spec.max_size, spec.width);
  const int max_h = std::min(spec.max_size, spec.height);
  const int min_w = std::min(spec.min_size, max_w);
  const int min_h = std::min(spec.min_size, max_h);
  const double w = static_cast<double>(rng.uniform_int(min_w, max_w));
  const double h = static_cast<double>(rng.uniform_int(min_h, max_h));
  const double x = static_cast<double>(rng.uniform_int(0, spec.width - static_cast<int>(w)));
  const double y = static_cast<double>(rng.uniform_int(0, spec.height - static_cast<int>(h)));
  if (ellipse) {
    o.kind = ShapeKind::Ellipse;
    o.w = w / 2.0;
    o.h = h / 2.0;
    o.x = x + o.w;
    o.y = y + o.h;
  } else {
    o.kind = ShapeKind::Rectangle;
    o.x = x;
    o.y = y;
    o.w = w;
    o.h = h;
  }
  o.color = random_color(rng, 120, 255);
  return o;
}

}  // namespace

void SceneSpec::validate() const {
  if (width < 1 || height < 1) throw std::invalid_argument("SceneSpec: image must be at least 1x1");
  if (!objects.empty()) return;
  if (background_only) return;
  if (min_objects < 1 || max_objects < min_objects)
    throw std::invalid_argument("SceneSpec: need 1 <= min_objects <= max_objects");
  if (min_size < 1 || max_size < min_size) throw std::invalid_argument("SceneSpec: need 1 <= min_size <= max_size");
  if (!rectangles && !ellipses) throw std::invalid_argument("SceneSpec: no shape kind enabled");
  if (placement_budget < 1) throw std::invalid_argument("SceneSpec: placement_budget must be >= 1");
}

Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Scene scene;
  scene.image = RgbImage(spec.width, spec.height);
  scene.mask = InstanceMask(spec.height, spec.width);

  const auto base = random_color(rng, 20, 100);
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      int shade = 0;
      if (spec.textured_background) shade = static_cast<int>(rng.uniform_int(-12, 12)) + ((x / 8 + y / 8) % 2) * 10;
      auto* p = scene.image.pixel(x, y);
      for (int c = 0; c < 3; ++c) p[c] = static_cast<std::uint8_t>(std::clamp(base[c] + shade, 0, 255));
    }

  auto place = [&](const SceneObject& o, const InstanceMask& inst, const ScoredBox& box) {
    for (int y = 0; y < spec.height; ++y)
      for (int x = 0; x < spec.width; ++x)
        if (inst(y, x)) {
          scene.mask.set(y, x);
          scene.image.set(x, y, o.color[0], o.color[1], o.color[2]);
        }
    scene.instances.push_back(inst);
    scene.boxes.push_back(box);
  };

  if (!spec.objects.empty()) {
    for (const SceneObject& o : spec.objects) {
      InstanceMask inst = rasterize(o, spec.height, spec.width);
      const auto box = tight_box(inst);
      if (!box) throw std::invalid_argument("generate_scene: object covers no pixel");
      place(o, inst, *box);
    }
    return scene;
  }
  if (spec.background_only) return scene;

  const int count = static_cast<int>(rng.uniform_int(spec.min_objects, spec.max_objects));
  for (int k = 0; k < count; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < spec.placement_budget && !placed; ++attempt) {
      const SceneObject o = sample_object(spec, rng);
      InstanceMask inst = rasterize(o, spec.height, spec.width);
      const auto box = tight_box(inst);
      if (!box || overlaps(inst, scene.mask)) continue;
      place(o, inst, *box);
      placed = true;
    }
    if (!placed)
      throw std::runtime_error("generate_scene: could not place object " + std::to_string(k + 1) + " of " +
                               std::to_string(count) + " within " + std::to_string(spec.placement_budget) +
                               " attempts (seed " + std::to_string(spec.seed) + ")");
  }
  return scene;
}

FeatureMap oracle_features(const InstanceMask& mask, int stride) {
  if (stride < 1) throw std::invalid_argument("oracle_features: stride must be >= 1");
  const int h = mask.height() / stride;
  const int w = mask.width() / stride;
  if (h < 1 || w < 1) throw std::invalid_argument("oracle_features: mask smaller than one stride cell");
  const MaskIntegral integral = build_mask_integral(mask);
  FeatureMap f(1, h, w);
  const double cell = static_cast<double>(stride) * stride;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const PixelRect r{j * stride, i * stride, (j + 1) * stride, (i + 1) * stride};
      f.at(0, i, j) = static_cast<float>(integral.count(r) / cell);
    }
  return f;
}

}  // namespace coarsecrop
