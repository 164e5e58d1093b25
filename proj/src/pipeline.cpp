#include "coarsecrop/pipeline.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include <json.hpp>

#include "coarsecrop/log.hpp"
#include "coarsecrop/rng.hpp"
#include "coarsecrop/strategies.hpp"

namespace coarsecrop {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(std::string_view text, std::string_view what) {
  T value{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw ConfigError("invalid " + std::string(what) + " '" + std::string(text) + "'");
  return value;
}

std::string feature_source_string(const FeatureSource& f) {
  switch (f.kind) {
    case FeatureSource::Kind::None:
      return "none";
    case FeatureSource::Kind::File:
      return "file:" + f.dir.string();
    case FeatureSource::Kind::Random:
      return "rand:" + std::to_string(f.seed);
    case FeatureSource::Kind::External:
      return "external";
  }
  return "none";
}

std::string_view mask_source_name(MaskSource m) { return m == MaskSource::Boxes ? "boxes" : "segmentation"; }

bool needs_annotations(StrategyKind k) {
  return k == StrategyKind::GT || k == StrategyKind::GTpad || k == StrategyKind::Poor;
}

std::string strategy_label(const StrategySpec& s) {
  std::string label(to_string(s.kind));
  if (s.kind == StrategyKind::GTpad) label += ":" + format_double(s.pad_ratio);
  if (s.kind == StrategyKind::Poor) label += ":" + format_double(s.poor_lo) + "," + format_double(s.poor_hi);
  return label;
}

// Resolves where features for each image come from.
class FeatureProvider {
 public:
  FeatureProvider(const FeatureSource& source, const fs::path& corpus, int anchor_stride) {
    switch (source.kind) {
      case FeatureSource::Kind::None:
        break;
      case FeatureSource::Kind::File:
      case FeatureSource::Kind::External: {
        const fs::path dir = source.kind == FeatureSource::Kind::File ? source.dir : corpus / "features";
        if (!fs::is_directory(dir)) throw ConfigError("feature directory " + dir.string() + " does not exist");
        dir_ = std::make_unique<FeatureDirectory>(dir);
        if (dir_->stride() && *dir_->stride() != anchor_stride)
          throw ConfigError("feature index stride " + std::to_string(*dir_->stride()) +
                            " does not match anchor stride " + std::to_string(anchor_stride));
        break;
      }
      case FeatureSource::Kind::Random: {
        RandomExtractorConfig cfg;
        cfg.seed = source.seed;
        if (cfg.total_stride() != anchor_stride)
          throw ConfigError("random extractor stride " + std::to_string(cfg.total_stride()) +
                            " does not match anchor stride " + std::to_string(anchor_stride));
        extractor_ = std::make_unique<RandomExtractor>(cfg);
        break;
      }
    }
  }

  bool available() const { return dir_ || extractor_; }

  /// Throws std::runtime_error when features for the image are missing.
  FeatureMap features(ImageId id, const RgbImage& image) const {
    if (extractor_) return extractor_->extract(image);
    if (!dir_) throw std::runtime_error("no feature source configured");
    const auto path = dir_->find(id);
    if (!path) throw std::runtime_error("missing features for image " + std::to_string(id));
    return load_feature_file(*path);
  }

 private:
  std::unique_ptr<FeatureDirectory> dir_;
  std::unique_ptr<RandomExtractor> extractor_;
};

ScoreMap score_map_for(const FeatureMap& f, const RgbImage& image) {
  if (f.height() > image.height() || f.width() > image.width())
    throw std::runtime_error("feature map " + std::to_string(f.height()) + "x" + std::to_string(f.width()) +
                             " is larger than the image");
  return make_score_map(f, image.height(), image.width());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

struct ImageOutcome {
  ManifestEntry entry;
  std::optional<std::string> failure;
};

ImageOutcome process_image(const CorpusImage& item, const GenerateConfig& cfg, const FeatureProvider& features,
                           const fs::path& crop_dir) {
  ImageOutcome outcome;
  ManifestEntry& entry = outcome.entry;
  entry.image_id = item.id;
  entry.source = item.source;
  try {
    const RgbImage image = read_image(item.path);
    entry.width = image.width();
    entry.height = image.height();
    const AnnotatedImage* ann = item.annotation;
    if (ann && (ann->width != image.width() || ann->height != image.height()))
      throw std::runtime_error("image is " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                               " but annotated as " + std::to_string(ann->width) + "x" + std::to_string(ann->height));

    const StrategySpec& s = cfg.strategy;
    CropSet set;
    switch (s.kind) {
      case StrategyKind::Image:
        set = image_crop(image.height(), image.width());
        break;
      case StrategyKind::Grid:
        set = grid_crop(image.height(), image.width());
        break;
      case StrategyKind::GT:
        set = gt_crop(ann->boxes);
        break;
      case StrategyKind::GTpad:
        set = gtpad_crop(ann->boxes, s.pad_ratio, image.height(), image.width());
        break;
      case StrategyKind::Poor: {
        const InstanceMask mask =
            cfg.mask_source == MaskSource::Boxes ? box_mask(ann->height, ann->width, ann->boxes) : ann->mask;
        set = poor_crop(mask, s.poor_lo, s.poor_hi, s.poor_count, mix_seed(s.seed, static_cast<std::uint64_t>(item.id)));
        break;
      }
      case StrategyKind::Our:
        set = our_crop(score_map_for(features.features(item.id, image), image), s.anchors);
        break;
    }
    entry.warnings = set.warnings;

    const std::string ext = cfg.lossy ? ".jpg" : ".png";
    for (std::size_t k = 0; k < set.boxes.size(); ++k) {
      ManifestCrop crop{static_cast<int>(k), set.boxes[k], ""};
      const auto pixels = extract_crop(image, set.boxes[k]);
      if (!pixels) {
        entry.warnings.push_back("crop " + std::to_string(k) + " is empty after rounding; skipped");
      } else {
        const std::string name = std::to_string(item.id) + "_" + std::to_string(k) + ext;
        write_image(crop_dir / name, *pixels, cfg.jpeg_quality);
        crop.path = "crops/" + name;
      }
      entry.crops.push_back(std::move(crop));
    }
  } catch (const std::exception& e) {
    outcome.failure = "image " + std::to_string(item.id) + " (" + item.source + "): " + e.what();
    entry.crops.clear();
    entry.warnings.push_back(std::string("skipped: ") + e.what());
  }
  return outcome;
}

}  // namespace

FeatureSource parse_feature_source(std::string_view text) {
  FeatureSource f;
  if (text.empty() || text == "none") return f;
  if (text == "external") {
    f.kind = FeatureSource::Kind::External;
    return f;
  }
  if (text.starts_with("file:")) {
    f.kind = FeatureSource::Kind::File;
    f.dir = std::string(text.substr(5));
    if (f.dir.empty()) throw ConfigError("--features file: needs a directory");
    return f;
  }
  if (text.starts_with("rand:")) {
    f.kind = FeatureSource::Kind::Random;
    f.seed = parse_number<std::uint64_t>(text.substr(5), "random feature seed");
    return f;
  }
  throw ConfigError("unknown feature source '" + std::string(text) + "' (expected file:<dir>, rand:<seed> or external)");
}

StrategySpec parse_strategy(std::string_view text, StrategySpec base) {
  const auto colon = text.find(':');
  const std::string_view name = text.substr(0, colon);
  const std::string_view args = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  const auto kind = parse_strategy_kind(name);
  if (!kind) throw ConfigError("unknown strategy '" + std::string(name) + "'");
  base.kind = *kind;
  if (!args.empty()) {
    if (*kind == StrategyKind::GTpad) {
      base.pad_ratio = parse_number<double>(args, "pad ratio");
    } else if (*kind == StrategyKind::Poor) {
      const auto comma = args.find(',');
      if (comma == std::string_view::npos) throw ConfigError("poor strategy expects poor:<lo>,<hi>");
      base.poor_lo = parse_number<double>(args.substr(0, comma), "poor band lower bound");
      base.poor_hi = parse_number<double>(args.substr(comma + 1), "poor band upper bound");
    } else {
      throw ConfigError("strategy '" + std::string(name) + "' takes no parameters");
    }
  }
  try {
    base.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return base;
}

std::vector<CorpusImage> list_corpus(const fs::path& corpus, const Annotations* annotations) {
  if (!fs::is_directory(corpus)) throw ConfigError("corpus directory " + corpus.string() + " does not exist");
  std::vector<CorpusImage> items;
  if (annotations) {
    for (const auto& img : annotations->images)
      items.push_back({img.id, corpus / img.file_name, img.file_name, &img});
    return items;
  }
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(corpus)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".ppm") names.push_back(e.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  for (std::size_t i = 0; i < names.size(); ++i)
    items.push_back({static_cast<ImageId>(i + 1), corpus / names[i], names[i], nullptr});
  return items;
}

std::string resolved_config_json(const GenerateConfig& cfg) {
  json j;
  j["corpus"] = cfg.corpus.string();
  j["annotations"] = cfg.annotations ? json(cfg.annotations->string()) : json();
  j["features"] = feature_source_string(cfg.features);
  j["strict"] = cfg.strict;
  j["lossy"] = cfg.lossy;
  j["jpeg_quality"] = cfg.jpeg_quality;
  j["mask_source"] = std::string(mask_source_name(cfg.mask_source));
  j["strategy"] = json::parse(strategy_to_json(cfg.strategy));
  return j.dump();
}

GenerateResult run_generate(const GenerateConfig& cfg) {
  try {
    cfg.strategy.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.workers < 1) throw ConfigError("--workers must be >= 1");
  if (needs_annotations(cfg.strategy.kind) && !cfg.annotations)
    throw ConfigError("strategy '" + std::string(to_string(cfg.strategy.kind)) + "' needs --annotations");
  if (cfg.strategy.kind == StrategyKind::Our && cfg.features.kind == FeatureSource::Kind::None)
    throw ConfigError("strategy 'our' needs --features");

  std::optional<Annotations> annotations;
  if (cfg.annotations) {
    if (!fs::exists(*cfg.annotations)) throw ConfigError("annotation file " + cfg.annotations->string() + " does not exist");
    try {
      annotations = parse_annotations(*cfg.annotations);
    } catch (const ParseError& e) {
      throw ConfigError(e.what());
    }
  }
  const auto items = list_corpus(cfg.corpus, annotations ? &*annotations : nullptr);
  if (items.empty()) throw ConfigError("no images found in " + cfg.corpus.string());
  const FeatureProvider features(cfg.strategy.kind == StrategyKind::Our ? cfg.features : FeatureSource{}, cfg.corpus,
                                 cfg.strategy.anchors.stride);

  const fs::path crop_dir = cfg.out / "crops";
  fs::create_directories(crop_dir);

  std::vector<ImageOutcome> outcomes(items.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(items.size());
#pragma omp parallel for num_threads(cfg.workers) schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) outcomes[i] = process_image(items[i], cfg, features, crop_dir);

  GenerateResult result;
  CropManifest& m = result.manifest;
  m.toolkit_version = COARSECROP_VERSION;
  m.strategy = cfg.strategy;
  m.config = resolved_config_json(cfg);
  for (auto& o : outcomes) {
    if (o.failure) {
      log::warn(*o.failure);
      result.failures.push_back(*o.failure);
    }
    m.images.push_back(std::move(o.entry));
  }
  std::sort(m.images.begin(), m.images.end(), [](const auto& a, const auto& b) { return a.image_id < b.image_id; });

  if (!result.failures.empty()) {
    result.exit_code = kExitPartialFailure;
    if (cfg.strict) {
      log::error("strict mode: aborting after " + std::to_string(result.failures.size()) + " failure(s)");
      return result;
    }
  }
  write_manifest(cfg.out / "manifest.json", m);
  log::info("wrote " + (cfg.out / "manifest.json").string());
  return result;
}

std::string report_csv(std::span<const StrategyReport> reports) {
  std::string out = "image_id,strategy,box,objectness,category\n";
  for (const auto& r : reports)
    for (const auto& c : r.report.crops) {
      out += std::to_string(c.image_id) + "," + r.label + ",\"" + format_double(c.box.x1) + " " +
             format_double(c.box.y1) + " " + format_double(c.box.x2) + " " + format_double(c.box.y2) + "\"," +
             format_double(c.objectness) + "," + std::string(to_string(c.category)) + "\n";
    }
  return out;
}

std::string report_json(std::span<const StrategyReport> reports) {
  json j;
  j["strategies"] = json::array();
  for (const auto& r : reports) {
    json crops = json::array();
    for (const auto& c : r.report.crops)
      crops.push_back({{"image_id", c.image_id},
                       {"box", {c.box.x1, c.box.y1, c.box.x2, c.box.y2}},
                       {"objectness", c.objectness},
                       {"category", std::string(to_string(c.category))}});
    j["strategies"].push_back({{"strategy", r.label},
                               {"crop_count", r.report.crops.size()},
                               {"mean_objectness", r.report.mean},
                               {"fractions",
                                {{"poor", r.report.fraction(CropCategory::Poor)},
                                 {"coarse", r.report.fraction(CropCategory::Coarse)},
                                 {"precise", r.report.fraction(CropCategory::Precise)}}},
                               {"crops", std::move(crops)}});
  }
  return j.dump(2) + "\n";
}

std::string report_table(std::span<const StrategyReport> reports) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %8s %11s %8s %8s %8s\n", "strategy", "crops", "objectness", "poor", "coarse",
                "precise");
  out += line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-20s %8zu %10.1f%% %7.1f%% %7.1f%% %7.1f%%\n", r.label.c_str(),
                  r.report.crops.size(), 100.0 * r.report.mean, 100.0 * r.report.fraction(CropCategory::Poor),
                  100.0 * r.report.fraction(CropCategory::Coarse), 100.0 * r.report.fraction(CropCategory::Precise));
    out += line;
  }
  return out;
}

EvaluateResult run_evaluate(const EvaluateConfig& cfg) {
  if (cfg.manifests.empty()) throw ConfigError("evaluate needs at least one --manifest");
  if (!fs::exists(cfg.annotations)) throw ConfigError("annotation file " + cfg.annotations.string() + " does not exist");
  Annotations annotations;
  try {
    annotations = parse_annotations(cfg.annotations);
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  const auto masks = annotations.masks(cfg.mask_source);

  EvaluateResult result;
  for (const auto& path : cfg.manifests) {
    if (!fs::exists(path)) throw ConfigError("manifest " + path.string() + " does not exist");
    CropManifest manifest;
    try {
      manifest = read_manifest(path);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    std::vector<ImageId> missing;
    std::vector<CropSet> sets;
    for (const auto& e : manifest.images) {
      if (!masks.contains(e.image_id)) {
        missing.push_back(e.image_id);
        continue;
      }
      CropSet set;
      set.image_id = e.image_id;
      set.strategy = manifest.strategy;
      for (const auto& c : e.crops) set.boxes.push_back(c.box);
      sets.push_back(std::move(set));
    }
    if (!missing.empty() || manifest.images.empty()) {
      std::string ids;
      for (std::size_t k = 0; k < missing.size(); ++k) ids += (k ? ", " : "") + std::to_string(missing[k]);
      throw ConfigError(path.string() + ": image ids not present in " + cfg.annotations.string() + ": " +
                        (ids.empty() ? "(manifest lists no images)" : ids));
    }
    try {
      result.reports.push_back({strategy_label(manifest.strategy), strategy_report(sets, masks)});
    } catch (const std::invalid_argument& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
  if (cfg.csv) write_text(*cfg.csv, report_csv(result.reports));
  if (cfg.json) write_text(*cfg.json, report_json(result.reports));
  result.summary = report_table(result.reports);
  return result;
}

int run_visualize(const VisualizeConfig& cfg) {
  if (cfg.workers < 1) throw ConfigError("--workers must be >= 1");
  std::optional<Annotations> annotations;
  if (cfg.annotations) {
    try {
      annotations = parse_annotations(*cfg.annotations);
    } catch (const ParseError& e) {
      throw ConfigError(e.what());
    }
  }
  if (cfg.features.kind == FeatureSource::Kind::None) throw ConfigError("visualize needs --features");
  try {
    cfg.anchors.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  std::optional<CropManifest> manifest;
  if (cfg.manifest) {
    try {
      manifest = read_manifest(*cfg.manifest);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  auto items = list_corpus(cfg.corpus, annotations ? &*annotations : nullptr);
  if (!cfg.image_ids.empty()) {
    const std::set<ImageId> wanted(cfg.image_ids.begin(), cfg.image_ids.end());
    std::erase_if(items, [&](const CorpusImage& c) { return !wanted.contains(c.id); });
  }
  const FeatureProvider features(cfg.features, cfg.corpus, cfg.anchors.stride);
  fs::create_directories(cfg.out);

  std::vector<std::optional<std::string>> failures(items.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(items.size());
#pragma omp parallel for num_threads(cfg.workers) schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const CorpusImage& item = items[i];
    try {
      const RgbImage image = read_image(item.path);
      const ScoreMap map = score_map_for(features.features(item.id, image), image);
      std::vector<ScoredBox> boxes;
      if (manifest) {
        const auto it = std::find_if(manifest->images.begin(), manifest->images.end(),
                                     [&](const ManifestEntry& e) { return e.image_id == item.id; });
        if (it != manifest->images.end())
          for (const auto& c : it->crops) boxes.push_back(c.box);
      } else {
        boxes = select_crops(map, cfg.anchors);
      }
      emit_overlay(image, map, boxes, cfg.out / std::to_string(item.id));
    } catch (const std::exception& e) {
      failures[i] = "image " + std::to_string(item.id) + ": " + e.what();
    }
  }
  int code = kExitOk;
  for (const auto& f : failures)
    if (f) {
      log::warn(*f);
      code = kExitPartialFailure;
    }
  return code;
}

void run_synth(const SynthConfig& cfg) {
  if (cfg.count < 1) throw ConfigError("--count must be >= 1");
  if (cfg.workers < 1) throw ConfigError("--workers must be >= 1");
  const fs::path image_dir = cfg.out / "images";
  const fs::path feature_dir = cfg.out / "features";
  fs::create_directories(image_dir);
  if (cfg.oracle_features) fs::create_directories(feature_dir);

  struct Item {
    std::string file_name;
    std::vector<ScoredBox> boxes;
    std::vector<std::string> rle;
    std::optional<std::string> error;
  };
  std::vector<Item> items(cfg.count);
#pragma omp parallel for num_threads(cfg.workers) schedule(dynamic)
  for (int k = 0; k < cfg.count; ++k) {
    const ImageId id = k + 1;
    Item& item = items[k];
    try {
      SceneSpec spec = cfg.scene;
      spec.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(id));
      const Scene scene = generate_scene(spec);
      char name[32];
      std::snprintf(name, sizeof name, "%06lld.png", static_cast<long long>(id));
      item.file_name = name;
      write_image(image_dir / name, scene.image);
      item.boxes = scene.boxes;
      for (const auto& inst : scene.instances) item.rle.push_back(encode_rle_string(mask_to_rle(inst)));
      if (cfg.oracle_features)
        write_feature_file(feature_dir / (std::to_string(id) + ".ccft"), oracle_features(scene.mask, cfg.stride));
    } catch (const std::exception& e) {
      item.error = e.what();
    }
  }

  json root;
  root["images"] = json::array();
  root["annotations"] = json::array();
  std::map<ImageId, std::string> feature_files;
  long long ann_id = 1;
  for (int k = 0; k < cfg.count; ++k) {
    const ImageId id = k + 1;
    const Item& item = items[k];
    if (item.error) throw std::runtime_error("synth: scene " + std::to_string(id) + ": " + *item.error);
    root["images"].push_back(
        {{"id", id}, {"file_name", "images/" + item.file_name}, {"width", cfg.scene.width}, {"height", cfg.scene.height}});
    for (std::size_t b = 0; b < item.boxes.size(); ++b) {
      const ScoredBox& box = item.boxes[b];
      root["annotations"].push_back(
          {{"id", ann_id++},
           {"image_id", id},
           {"bbox", {box.x1, box.y1, box.width(), box.height()}},
           {"segmentation", {{"size", {cfg.scene.height, cfg.scene.width}}, {"counts", item.rle[b]}}}});
    }
    feature_files[id] = std::to_string(id) + ".ccft";
  }
  write_text(cfg.out / "annotations.json", root.dump(1) + "\n");
  if (cfg.oracle_features) write_feature_index(feature_dir, feature_files, cfg.stride);
}

LossesCheckResult run_losses_check(const losses::GradientCheckConfig& cfg) {
  LossesCheckResult r;
  r.check = losses::check_gradients(cfg);
  constexpr double kTolerance = 1e-6;
  r.passed = r.check.infonce_max_rel_error < kTolerance && r.check.byol_max_rel_error < kTolerance;
  char line[200];
  std::snprintf(line, sizeof line, "instances: %d  seed: %llu  tau: %g  step: %g\n", r.check.instances,
                static_cast<unsigned long long>(cfg.seed), cfg.tau, cfg.step);
  r.text += line;
  std::snprintf(line, sizeof line, "infonce  max relative gradient error %.3e  %s\n", r.check.infonce_max_rel_error,
                r.check.infonce_max_rel_error < kTolerance ? "PASS" : "FAIL");
  r.text += line;
  std::snprintf(line, sizeof line, "byol     max relative gradient error %.3e  %s\n", r.check.byol_max_rel_error,
                r.check.byol_max_rel_error < kTolerance ? "PASS" : "FAIL");
  r.text += line;
  return r;
}

}  // namespace coarsecrop
