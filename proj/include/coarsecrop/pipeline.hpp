#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coarsecrop/crop_set.hpp"
#include "coarsecrop/dataset.hpp"
#include "coarsecrop/features.hpp"
#include "coarsecrop/losses.hpp"
#include "coarsecrop/objectness.hpp"
#include "coarsecrop/synth.hpp"

namespace coarsecrop {

enum ExitCode : int { kExitOk = 0, kExitConfigError = 1, kExitPartialFailure = 2 };

/// Invalid flags, missing inputs, inconsistent corpora. Maps to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FeatureSource {
  enum class Kind { None, File, Random, External };
  Kind kind = Kind::None;
  std::filesystem::path dir;
  std::uint64_t seed = 0;
};

/// "file:<dir>", "rand:<seed>" or "external" (CCFT files under
/// <corpus>/features, as written by the export script).
FeatureSource parse_feature_source(std::string_view text);

/// "image", "grid", "gt", "gtpad[:<ratio>]", "poor[:<lo>,<hi>]", "our".
StrategySpec parse_strategy(std::string_view text, StrategySpec base = {});

struct CorpusImage {
  ImageId id = 0;
  std::filesystem::path path;
  std::string source;  // as recorded in manifests: relative to the corpus
  const AnnotatedImage* annotation = nullptr;
};

/// Images listed in the annotations, or, without annotations, every
/// .png/.jpg/.jpeg/.ppm file in the corpus directory sorted by name and
/// numbered from 1.
std::vector<CorpusImage> list_corpus(const std::filesystem::path& corpus, const Annotations* annotations);

struct GenerateConfig {
  std::filesystem::path corpus;
  std::optional<std::filesystem::path> annotations;
  FeatureSource features;
  StrategySpec strategy;
  std::filesystem::path out;
  int workers = 1;
  bool strict = false;
  bool lossy = false;
  int jpeg_quality = 90;
  MaskSource mask_source = MaskSource::Boxes;  // for Poor-Crop sampling
};

struct GenerateResult {
  CropManifest manifest;
  std::vector<std::string> failures;
  int exit_code = kExitOk;
};

/// Per image: features -> score map -> strategy -> crop files; writes
/// <out>/manifest.json and <out>/crops/. Output bytes do not depend on the
/// worker count.
GenerateResult run_generate(const GenerateConfig& cfg);

/// Canonical JSON of every setting that affects generate's output.
std::string resolved_config_json(const GenerateConfig& cfg);

struct EvaluateConfig {
  std::vector<std::filesystem::path> manifests;
  std::filesystem::path annotations;
  std::optional<std::filesystem::path> csv;
  std::optional<std::filesystem::path> json;
  MaskSource mask_source = MaskSource::Boxes;
};

struct StrategyReport {
  std::string label;  // strategy name, with parameters where relevant
  ObjectnessReport report;
};

struct EvaluateResult {
  std::vector<StrategyReport> reports;
  std::string summary;  // one row per manifest
};

EvaluateResult run_evaluate(const EvaluateConfig& cfg);

std::string report_csv(std::span<const StrategyReport> reports);
std::string report_json(std::span<const StrategyReport> reports);
std::string report_table(std::span<const StrategyReport> reports);

struct VisualizeConfig {
  std::filesystem::path corpus;
  std::optional<std::filesystem::path> annotations;
  FeatureSource features;
  AnchorConfig anchors;
  std::optional<std::filesystem::path> manifest;  // draw its boxes instead of computing Our-Crop
  std::vector<ImageId> image_ids;                 // empty: all
  std::filesystem::path out;
  int workers = 1;
};

/// Writes <out>/<id>_score.png and <out>/<id>_boxes.png per image.
int run_visualize(const VisualizeConfig& cfg);

struct SynthConfig {
  std::filesystem::path out;
  int count = 100;
  std::uint64_t seed = 0;
  SceneSpec scene;
  bool oracle_features = false;
  int stride = 32;
  int workers = 1;
};

/// Writes <out>/images/<id>.png, <out>/annotations.json (RLE masks) and,
/// optionally, <out>/features/<id>.ccft with index.json.
void run_synth(const SynthConfig& cfg);

struct LossesCheckResult {
  losses::GradientCheck check;
  bool passed = false;
  std::string text;
};

LossesCheckResult run_losses_check(const losses::GradientCheckConfig& cfg);

}  // namespace coarsecrop
