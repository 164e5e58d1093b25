#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "coarsecrop/crop_set.hpp"
#include "coarsecrop/image.hpp"
#include "coarsecrop/objectness.hpp"

namespace coarsecrop {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Annotations
//
// Accepted JSON subset:
//   {"images": [{"id", "file_name", "width", "height"}, ...],
//    "annotations": [{"id", "image_id", "bbox": [x, y, w, h],
//                     "segmentation": <polygons | RLE>}, ...]}
//
// segmentation is either a list of polygons ([[x0, y0, x1, y1, ...], ...]) or
// an RLE object {"size": [h, w], "counts": [...] | "<compressed>"} with
// column-major runs starting with background. Without segmentation the bbox
// is rasterized instead. Everything else is ignored.
// ---------------------------------------------------------------------------

using Polygon = std::vector<double>;  // x0, y0, x1, y1, ...

struct AnnotatedImage {
  ImageId id = 0;
  std::string file_name;
  int width = 0;
  int height = 0;
  std::vector<ScoredBox> boxes;  // annotation order
  InstanceMask mask{0, 0};  // segmentation union
};

/// Which pixels count as object pixels when measuring objectness.
/// Boxes: union of the (rounded) ground-truth boxes, so a GT crop always
/// scores 1. Segmentation: union of the polygon / RLE instance masks.
enum class MaskSource { Boxes, Segmentation };

struct Annotations {
  std::vector<AnnotatedImage> images;  // ascending id
  std::size_t instance_count = 0;

  const AnnotatedImage* find(ImageId id) const;
  std::map<ImageId, InstanceMask> masks(MaskSource source = MaskSource::Boxes) const;
};

/// Union of rounded boxes.
InstanceMask box_mask(int height, int width, std::span<const ScoredBox> boxes);

Annotations parse_annotations(const std::filesystem::path& path);
Annotations parse_annotations_text(const std::string& json_text);

/// Even-odd fill; a pixel is inside when its center is.
void rasterize_polygon(std::span<const double> xy, InstanceMask& mask);

/// Decode COCO's compressed RLE string into run lengths.
std::vector<std::uint32_t> decode_rle_string(const std::string& counts);
std::string encode_rle_string(std::span<const std::uint32_t> counts);
/// Column-major runs of a mask, starting with a (possibly empty) background run.
std::vector<std::uint32_t> mask_to_rle(const InstanceMask& mask);
/// OR the runs into the mask. Throws ParseError if runs exceed the mask.
void apply_rle(std::span<const std::uint32_t> counts, InstanceMask& mask);

// ---------------------------------------------------------------------------
// Crops and overlays
// ---------------------------------------------------------------------------

/// Pixel copy of the rounded box; nullopt if the rounded box is empty.
/// Throws std::invalid_argument if the box is outside the image.
std::optional<RgbImage> extract_crop(const RgbImage& image, const ScoredBox& box);

struct OverlayPaths {
  std::filesystem::path score;
  std::filesystem::path boxes;
};

/// Writes `<stem>_score.png` (blue-to-red score colormap blended 50/50 over
/// the image) and `<stem>_boxes.png` (3 px outlines colored by rank).
OverlayPaths emit_overlay(const RgbImage& image, const ScoreMap& score_map, std::span<const ScoredBox> boxes,
                          const std::filesystem::path& stem);

RgbImage render_score_overlay(const RgbImage& image, const ScoreMap& score_map);
RgbImage render_box_overlay(const RgbImage& image, std::span<const ScoredBox> boxes);

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

inline constexpr int kManifestVersion = 1;

class ManifestVersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ManifestCrop {
  int rank = 0;
  ScoredBox box;
  std::string path;  // relative to the manifest's directory; empty if not written

  bool operator==(const ManifestCrop&) const = default;
};

struct ManifestEntry {
  ImageId image_id = 0;
  std::string source;
  int width = 0;
  int height = 0;
  std::vector<ManifestCrop> crops;
  std::vector<std::string> warnings;

  bool operator==(const ManifestEntry&) const = default;
};

/// Canonical JSON text of a resolved run configuration (sorted keys).
using ConfigJson = std::string;

struct CropManifest {
  std::string toolkit_version;
  StrategySpec strategy;
  ConfigJson config = "{}";
  std::vector<ManifestEntry> images;  // ascending image id

  /// 16 hex digits, FNV-1a over the canonical strategy + config text.
  std::string config_hash() const;
  bool operator==(const CropManifest& other) const;
};

std::string manifest_to_json(const CropManifest& manifest);
CropManifest manifest_from_json(const std::string& text);
void write_manifest(const std::filesystem::path& path, const CropManifest& manifest);
CropManifest read_manifest(const std::filesystem::path& path);

std::string strategy_to_json(const StrategySpec& spec);

}  // namespace coarsecrop
