#include "coarsecrop/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace coarsecrop {

using nlohmann::json;

namespace {

std::string record_name(const char* kind, std::size_t index, const json& rec) {
  std::string s = std::string(kind) + "[" + std::to_string(index) + "]";
  if (rec.is_object() && rec.contains("id") && rec["id"].is_number_integer())
    s += " (id " + std::to_string(rec["id"].get<long long>()) + ")";
  return s;
}

template <typename T>
T required(const json& rec, const char* key, const std::string& where) {
  if (!rec.is_object() || !rec.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
  try {
    return rec.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(where + ": field '" + key + "' has the wrong type");
  }
}

void fill_rect(const PixelRect& r, InstanceMask& mask) {
  for (int y = std::max(0, r.y1); y < std::min(mask.height(), r.y2); ++y)
    for (int x = std::max(0, r.x1); x < std::min(mask.width(), r.x2); ++x) mask.set(y, x);
}

void apply_segmentation(const json& seg, const ScoredBox& bbox, InstanceMask& mask, const std::string& where) {
  if (seg.is_null() || (seg.is_array() && seg.empty())) {
    fill_rect(round_box(bbox), mask);
    return;
  }
  if (seg.is_array()) {
    for (const auto& poly : seg) {
      if (!poly.is_array() || poly.size() < 6 || poly.size() % 2 != 0)
        throw ParseError(where + ": polygon needs an even number (>= 6) of coordinates");
      std::vector<double> xy;
      try {
        xy = poly.get<std::vector<double>>();
      } catch (const json::exception&) {
        throw ParseError(where + ": polygon coordinates must be numbers");
      }
      rasterize_polygon(xy, mask);
    }
    return;
  }
  if (seg.is_object()) {
    const auto size = required<std::vector<int>>(seg, "size", where);
    if (size.size() != 2 || size[0] != mask.height() || size[1] != mask.width())
      throw ParseError(where + ": RLE size does not match the image");
    if (!seg.contains("counts")) throw ParseError(where + ": RLE missing 'counts'");
    std::vector<std::uint32_t> counts;
    try {
      counts = seg["counts"].is_string() ? decode_rle_string(seg["counts"].get<std::string>())
                                          : seg["counts"].get<std::vector<std::uint32_t>>();
    } catch (const json::exception&) {
      throw ParseError(where + ": RLE counts must be a string or a list of integers");
    }
    try {
      apply_rle(counts, mask);
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    }
    return;
  }
  throw ParseError(where + ": unsupported segmentation format");
}

std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

json anchors_to_json(const AnchorConfig& a) {
  return {{"sizes", a.sizes}, {"ratios", a.ratios}, {"stride", a.stride},
          {"nms_iou", a.nms_iou}, {"top_n", a.top_n}, {"min_side", a.min_side}};
}

json strategy_json(const StrategySpec& s) {
  return {{"kind", std::string(to_string(s.kind))},
          {"pad_ratio", s.pad_ratio},
          {"poor_band", {s.poor_lo, s.poor_hi}},
          {"poor_count", s.poor_count},
          {"anchors", anchors_to_json(s.anchors)},
          {"seed", s.seed}};
}

StrategySpec strategy_from(const json& j) {
  StrategySpec s;
  const auto kind = parse_strategy_kind(j.at("kind").get<std::string>());
  if (!kind) throw ParseError("manifest: unknown strategy '" + j.at("kind").get<std::string>() + "'");
  s.kind = *kind;
  s.pad_ratio = j.at("pad_ratio").get<double>();
  s.poor_lo = j.at("poor_band").at(0).get<double>();
  s.poor_hi = j.at("poor_band").at(1).get<double>();
  s.poor_count = j.at("poor_count").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  const json& a = j.at("anchors");
  s.anchors.sizes = a.at("sizes").get<std::vector<double>>();
  s.anchors.ratios = a.at("ratios").get<std::vector<double>>();
  s.anchors.stride = a.at("stride").get<int>();
  s.anchors.nms_iou = a.at("nms_iou").get<double>();
  s.anchors.top_n = a.at("top_n").get<int>();
  s.anchors.min_side = a.at("min_side").get<double>();
  return s;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// --- annotations ------------------------------------------------------------

const AnnotatedImage* Annotations::find(ImageId id) const {
  const auto it = std::lower_bound(images.begin(), images.end(), id,
                                   [](const AnnotatedImage& a, ImageId v) { return a.id < v; });
  return it != images.end() && it->id == id ? &*it : nullptr;
}

std::map<ImageId, InstanceMask> Annotations::masks(MaskSource source) const {
  std::map<ImageId, InstanceMask> out;
  for (const auto& img : images)
    out.emplace(img.id, source == MaskSource::Boxes ? box_mask(img.height, img.width, img.boxes) : img.mask);
  return out;
}

InstanceMask box_mask(int height, int width, std::span<const ScoredBox> boxes) {
  InstanceMask mask(height, width);
  for (const auto& b : boxes) fill_rect(round_box(b), mask);
  return mask;
}

Annotations parse_annotations_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed annotation JSON: ") + e.what());
  }
  if (!root.is_object() || !root.contains("images") || !root["images"].is_array())
    throw ParseError("annotation JSON: missing 'images' array");

  Annotations ann;
  std::map<ImageId, std::size_t> by_id;
  const auto& images = root["images"];
  for (std::size_t i = 0; i < images.size(); ++i) {
    const json& rec = images[i];
    const std::string where = record_name("images", i, rec);
    AnnotatedImage img;
    img.id = required<ImageId>(rec, "id", where);
    img.file_name = required<std::string>(rec, "file_name", where);
    img.width = required<int>(rec, "width", where);
    img.height = required<int>(rec, "height", where);
    if (img.width < 1 || img.height < 1) throw ParseError(where + ": width and height must be positive");
    if (!by_id.emplace(img.id, 0).second) throw ParseError(where + ": duplicate image id");
    img.mask = InstanceMask(img.height, img.width);
    ann.images.push_back(std::move(img));
  }
  std::sort(ann.images.begin(), ann.images.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < ann.images.size(); ++i) by_id[ann.images[i].id] = i;

  if (root.contains("annotations")) {
    const auto& anns = root["annotations"];
    if (!anns.is_array()) throw ParseError("annotation JSON: 'annotations' must be an array");
    for (std::size_t i = 0; i < anns.size(); ++i) {
      const json& rec = anns[i];
      const std::string where = record_name("annotations", i, rec);
      const ImageId image_id = required<ImageId>(rec, "image_id", where);
      const auto it = by_id.find(image_id);
      if (it == by_id.end()) throw ParseError(where + ": unknown image_id " + std::to_string(image_id));
      AnnotatedImage& img = ann.images[it->second];
      const auto bbox = required<std::vector<double>>(rec, "bbox", where);
      if (bbox.size() != 4) throw ParseError(where + ": bbox must have 4 numbers");
      constexpr double kSlack = 1e-6;
      const ScoredBox box{bbox[0], bbox[1], bbox[0] + bbox[2], bbox[1] + bbox[3], 0.0};
      if (!(bbox[2] > 0.0 && bbox[3] > 0.0) || box.x1 < -kSlack || box.y1 < -kSlack || box.x2 > img.width + kSlack ||
          box.y2 > img.height + kSlack)
        throw ParseError(where + ": bbox outside image " + std::to_string(img.id));
      const ScoredBox clamped{std::max(0.0, box.x1), std::max(0.0, box.y1), std::min<double>(img.width, box.x2),
                              std::min<double>(img.height, box.y2), 0.0};
      apply_segmentation(rec.contains("segmentation") ? rec["segmentation"] : json(), clamped, img.mask, where);
      img.boxes.push_back(clamped);
      ++ann.instance_count;
    }
  }
  return ann;
}

Annotations parse_annotations(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const std::runtime_error& e) {
    throw ParseError(e.what());
  }
  try {
    return parse_annotations_text(text);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void rasterize_polygon(std::span<const double> xy, InstanceMask& mask) {
  const std::size_t n = xy.size() / 2;
  if (n < 3) return;
  std::vector<double> crossings;
  for (int y = 0; y < mask.height(); ++y) {
    const double yc = y + 0.5;
    crossings.clear();
    for (std::size_t k = 0; k < n; ++k) {
      const double x0 = xy[2 * k], y0 = xy[2 * k + 1];
      const double x1 = xy[2 * ((k + 1) % n)], y1 = xy[2 * ((k + 1) % n) + 1];
      if ((y0 <= yc && yc < y1) || (y1 <= yc && yc < y0))
        crossings.push_back(x0 + (yc - y0) * (x1 - x0) / (y1 - y0));
    }
    std::sort(crossings.begin(), crossings.end());
    for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
      // centers x + 0.5 in [a, b)
      const int first = std::max(0, static_cast<int>(std::ceil(crossings[k] - 0.5)));
      const int last = std::min(mask.width(), static_cast<int>(std::ceil(crossings[k + 1] - 0.5)));
      for (int x = first; x < last; ++x) mask.set(y, x);
    }
  }
}

std::vector<std::uint32_t> decode_rle_string(const std::string& s) {
  std::vector<std::int64_t> counts;
  std::size_t p = 0;
  while (p < s.size()) {
    std::int64_t x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      if (p >= s.size()) throw ParseError("RLE string ends mid-value");
      const std::int64_t c = static_cast<std::int64_t>(s[p]) - 48;
      if (c < 0 || c > 63) throw ParseError("RLE string has an invalid character");
      x |= (c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++p;
      ++k;
      if (!more && (c & 0x10)) x |= static_cast<std::int64_t>(-1) * (std::int64_t{1} << (5 * k));
    }
    if (counts.size() > 2) x += counts[counts.size() - 2];
    if (x < 0 || x > UINT32_MAX) throw ParseError("RLE string decodes to an invalid run");
    counts.push_back(x);
  }
  return {counts.begin(), counts.end()};
}

std::string encode_rle_string(std::span<const std::uint32_t> counts) {
  std::string s;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    std::int64_t x = counts[i];
    if (i > 2) x -= counts[i - 2];
    bool more = true;
    while (more) {
      std::int64_t c = x & 0x1f;
      x >>= 5;
      more = (c & 0x10) ? x != -1 : x != 0;
      if (more) c |= 0x20;
      s.push_back(static_cast<char>(c + 48));
    }
  }
  return s;
}

std::vector<std::uint32_t> mask_to_rle(const InstanceMask& mask) {
  std::vector<std::uint32_t> counts;
  bool current = false;
  std::uint32_t run = 0;
  for (int x = 0; x < mask.width(); ++x)
    for (int y = 0; y < mask.height(); ++y) {
      if (mask(y, x) != current) {
        counts.push_back(run);
        run = 0;
        current = !current;
      }
      ++run;
    }
  counts.push_back(run);
  return counts;
}

void apply_rle(std::span<const std::uint32_t> counts, InstanceMask& mask) {
  const std::uint64_t total = static_cast<std::uint64_t>(mask.height()) * mask.width();
  std::uint64_t pos = 0;
  bool on = false;
  for (std::uint32_t run : counts) {
    if (pos + run > total) throw ParseError("RLE runs exceed the mask size");
    if (on)
      for (std::uint64_t p = pos; p < pos + run; ++p)
        mask.set(static_cast<int>(p % mask.height()), static_cast<int>(p / mask.height()));
    pos += run;
    on = !on;
  }
  if (pos != total) throw ParseError("RLE runs cover " + std::to_string(pos) + " of " + std::to_string(total) + " pixels");
}

// --- crops and overlays -----------------------------------------------------

std::optional<RgbImage> extract_crop(const RgbImage& image, const ScoredBox& box) {
  const PixelRect r = round_box(box);
  if (r.x1 < 0 || r.y1 < 0 || r.x2 > image.width() || r.y2 > image.height())
    throw std::invalid_argument("extract_crop: box outside the image");
  if (r.x2 <= r.x1 || r.y2 <= r.y1) return std::nullopt;
  RgbImage crop(r.x2 - r.x1, r.y2 - r.y1);
  const std::size_t row_bytes = static_cast<std::size_t>(crop.width()) * 3;
  for (int y = 0; y < crop.height(); ++y)
    std::copy_n(image.pixel(r.x1, r.y1 + y), row_bytes, crop.pixel(0, y));
  return crop;
}

RgbImage render_score_overlay(const RgbImage& image, const ScoreMap& score_map) {
  if (score_map.width() != image.width() || score_map.height() != image.height())
    throw std::invalid_argument("render_score_overlay: score map and image sizes differ");
  RgbImage out = image;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const double v = score_map(y, x);
      const std::array<double, 3> color{255.0 * v, 0.0, 255.0 * (1.0 - v)};
      std::uint8_t* p = out.pixel(x, y);
      for (int c = 0; c < 3; ++c) p[c] = static_cast<std::uint8_t>(std::lround(0.5 * p[c] + 0.5 * color[c]));
    }
  return out;
}

RgbImage render_box_overlay(const RgbImage& image, std::span<const ScoredBox> boxes) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 8> kPalette{{{255, 0, 0},
                                                                        {0, 200, 0},
                                                                        {0, 80, 255},
                                                                        {255, 220, 0},
                                                                        {255, 0, 255},
                                                                        {0, 230, 230},
                                                                        {255, 128, 0},
                                                                        {128, 0, 255}}};
  constexpr int kThickness = 3;
  RgbImage out = image;
  // Highest rank drawn last so it stays on top.
  for (std::size_t k = boxes.size(); k-- > 0;) {
    const PixelRect r = round_box(boxes[k]);
    const auto& color = kPalette[k % kPalette.size()];
    for (int y = std::max(0, r.y1); y < std::min(image.height(), r.y2); ++y)
      for (int x = std::max(0, r.x1); x < std::min(image.width(), r.x2); ++x) {
        const bool edge = x < r.x1 + kThickness || x >= r.x2 - kThickness || y < r.y1 + kThickness ||
                          y >= r.y2 - kThickness;
        if (edge) out.set(x, y, color[0], color[1], color[2]);
      }
  }
  return out;
}

OverlayPaths emit_overlay(const RgbImage& image, const ScoreMap& score_map, std::span<const ScoredBox> boxes,
                          const std::filesystem::path& stem) {
  OverlayPaths paths{stem.string() + "_score.png", stem.string() + "_boxes.png"};
  write_image(paths.score, render_score_overlay(image, score_map));
  write_image(paths.boxes, render_box_overlay(image, boxes));
  return paths;
}

// --- manifest ---------------------------------------------------------------

std::string strategy_to_json(const StrategySpec& spec) { return strategy_json(spec).dump(); }

std::string CropManifest::config_hash() const {
  const std::uint64_t h = fnv1a(config, fnv1a(strategy_to_json(strategy)));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool CropManifest::operator==(const CropManifest& o) const {
  return toolkit_version == o.toolkit_version && strategy == o.strategy && config == o.config && images == o.images;
}

std::string manifest_to_json(const CropManifest& m) {
  json j;
  j["format"] = "coarsecrop-manifest";
  j["version"] = kManifestVersion;
  j["toolkit_version"] = m.toolkit_version;
  j["strategy"] = strategy_json(m.strategy);
  j["config"] = json::parse(m.config);
  j["config_hash"] = m.config_hash();
  j["images"] = json::array();
  for (const auto& e : m.images) {
    json je{{"image_id", e.image_id}, {"source", e.source}, {"width", e.width}, {"height", e.height}};
    je["crops"] = json::array();
    for (const auto& c : e.crops)
      je["crops"].push_back({{"rank", c.rank},
                             {"box", {c.box.x1, c.box.y1, c.box.x2, c.box.y2}},
                             {"score", c.box.score},
                             {"path", c.path}});
    je["warnings"] = e.warnings;
    j["images"].push_back(std::move(je));
  }
  return j.dump(2) + "\n";
}

CropManifest manifest_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed manifest JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "coarsecrop-manifest")
    throw ParseError("not a coarsecrop manifest");
  const int version = j.value("version", -1);
  if (version != kManifestVersion)
    throw ManifestVersionError("incompatible manifest version " + std::to_string(version) + " (this build reads " +
                               std::to_string(kManifestVersion) + ")");
  try {
    CropManifest m;
    m.toolkit_version = j.at("toolkit_version").get<std::string>();
    m.strategy = strategy_from(j.at("strategy"));
    m.config = j.at("config").dump();
    for (const auto& je : j.at("images")) {
      ManifestEntry e;
      e.image_id = je.at("image_id").get<ImageId>();
      e.source = je.at("source").get<std::string>();
      e.width = je.at("width").get<int>();
      e.height = je.at("height").get<int>();
      for (const auto& jc : je.at("crops")) {
        ManifestCrop c;
        c.rank = jc.at("rank").get<int>();
        const auto& b = jc.at("box");
        c.box = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>(),
                 jc.at("score").get<double>()};
        c.path = jc.at("path").get<std::string>();
        e.crops.push_back(std::move(c));
      }
      e.warnings = je.at("warnings").get<std::vector<std::string>>();
      m.images.push_back(std::move(e));
    }
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
}

void write_manifest(const std::filesystem::path& path, const CropManifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << manifest_to_json(manifest);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

CropManifest read_manifest(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return manifest_from_json(text);
  } catch (const ManifestVersionError& e) {
    throw ManifestVersionError(path.string() + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace coarsecrop
