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
#include "coarsecrop/tensor.hpp"

namespace coarsecrop {

// CCFT feature file layout, all integers little-endian:
//
//   offset  size  field
//   0       4     magic "CCFT"
//   4       2     version (u16, currently 1)
//   6       2     dtype (u16, 1 = float32 LE)
//   8       4     d (u32)
//   12      4     h (u32)
//   16      4     w (u32)
//   20      4*d*h*w  payload, channel-major
//
// Nothing may follow the payload.
inline constexpr char kCcftMagic[4] = {'C', 'C', 'F', 'T'};
inline constexpr std::uint16_t kCcftVersion = 1;
inline constexpr std::uint16_t kCcftFloat32 = 1;
inline constexpr std::size_t kCcftHeaderBytes = 20;

class TensorFileError : public std::runtime_error {
 public:
  enum class Kind { Io, BadMagic, BadVersion, BadDtype, BadDims, Truncated, TrailingBytes, NonFinite };

  TensorFileError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::vector<std::uint8_t> encode_feature_file(const FeatureMap& features);
FeatureMap decode_feature_file(std::span<const std::uint8_t> bytes);

void write_feature_file(const std::filesystem::path& path, const FeatureMap& features);
FeatureMap load_feature_file(const std::filesystem::path& path);

/// Lookup for a directory of CCFT files. If `<dir>/index.json` exists it maps
/// image ids to paths relative to the directory:
///
///   {"version": 1, "stride": 32, "files": {"42": "000042.ccft", ...}}
///
/// Otherwise files are expected at `<dir>/<image_id>.ccft`.
class FeatureDirectory {
 public:
  explicit FeatureDirectory(std::filesystem::path dir);

  /// Path for an image, or nullopt if the file is not present.
  std::optional<std::filesystem::path> find(ImageId id) const;
  std::optional<int> stride() const { return stride_; }

 private:
  std::filesystem::path dir_;
  std::map<ImageId, std::filesystem::path> index_;
  bool indexed_ = false;
  std::optional<int> stride_;
};

void write_feature_index(const std::filesystem::path& dir,
                         const std::map<ImageId, std::string>& files, int stride);

struct ConvStage {
  int out_channels;
  int stride;  // only 2 is supported
};

struct RandomExtractorConfig {
  std::uint64_t seed = 0;
  /// Stem followed by four stages, each 3x3 stride 2: total stride 32.
  std::vector<ConvStage> stages{{16, 2}, {32, 2}, {64, 2}, {128, 2}, {512, 2}};
  /// Longest image side fed to the network; larger images are downscaled.
  int max_side = 1024;

  int total_stride() const;
  void validate() const;
};

/// Randomly initialized conv stack (He-scaled Gaussian weights, no bias,
/// ReLU after every stage). Weights are fixed at construction; extract()
/// is const and safe to call from several threads.
class RandomExtractor {
 public:
  explicit RandomExtractor(RandomExtractorConfig cfg);

  const RandomExtractorConfig& config() const { return cfg_; }

  /// Output dims are floor(H/stride) x floor(W/stride) of the image after
  /// the max_side downscale. Throws std::invalid_argument if the image is
  /// smaller than the total stride.
  FeatureMap extract(const RgbImage& image) const;

  std::span<const float> weights(std::size_t stage) const { return weights_[stage]; }

 private:
  RandomExtractorConfig cfg_;
  std::vector<std::vector<float>> weights_;  // [out][in][3][3] per stage
};

/// Image as a 3-channel feature map scaled to [0, 1].
FeatureMap image_to_tensor(const RgbImage& image);

/// Single stride-2 3x3 convolution + ReLU; output dims are floor(h/2) x floor(w/2).
FeatureMap conv3x3_s2_relu(const FeatureMap& input, std::span<const float> weights, int out_channels);

}  // namespace coarsecrop
