#include "coarsecrop/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include <json.hpp>

#include "coarsecrop/rng.hpp"

namespace coarsecrop {
namespace {

using Kind = TensorFileError::Kind;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>((v >> s) & 0xff));
}

std::uint16_t get_u16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_feature_file(const FeatureMap& f) {
  std::vector<std::uint8_t> out;
  out.reserve(kCcftHeaderBytes + f.values().size() * 4);
  out.insert(out.end(), std::begin(kCcftMagic), std::end(kCcftMagic));
  put_u16(out, kCcftVersion);
  put_u16(out, kCcftFloat32);
  put_u32(out, static_cast<std::uint32_t>(f.channels()));
  put_u32(out, static_cast<std::uint32_t>(f.height()));
  put_u32(out, static_cast<std::uint32_t>(f.width()));
  for (float v : f.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

FeatureMap decode_feature_file(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kCcftHeaderBytes)
    throw TensorFileError(Kind::Truncated, "CCFT: truncated header: expected " + std::to_string(kCcftHeaderBytes) +
                                               " bytes, got " + std::to_string(bytes.size()));
  if (std::memcmp(bytes.data(), kCcftMagic, 4) != 0) throw TensorFileError(Kind::BadMagic, "CCFT: bad magic");
  const std::uint16_t version = get_u16(bytes.data() + 4);
  if (version != kCcftVersion)
    throw TensorFileError(Kind::BadVersion, "CCFT: unsupported version " + std::to_string(version));
  const std::uint16_t dtype = get_u16(bytes.data() + 6);
  if (dtype != kCcftFloat32) throw TensorFileError(Kind::BadDtype, "CCFT: unsupported dtype " + std::to_string(dtype));

  const std::uint64_t d = get_u32(bytes.data() + 8);
  const std::uint64_t h = get_u32(bytes.data() + 12);
  const std::uint64_t w = get_u32(bytes.data() + 16);
  constexpr std::uint64_t kMaxDim = std::numeric_limits<int>::max();
  constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;
  if (d == 0 || h == 0 || w == 0 || d > kMaxDim || h > kMaxDim || w > kMaxDim || d * h > kMaxElements ||
      d * h * w > kMaxElements)
    throw TensorFileError(Kind::BadDims, "CCFT: invalid dims " + std::to_string(d) + "x" + std::to_string(h) + "x" +
                                             std::to_string(w));
  const std::uint64_t count = d * h * w;
  const std::uint64_t expected = kCcftHeaderBytes + 4 * count;
  if (bytes.size() < expected)
    throw TensorFileError(Kind::Truncated, "CCFT: truncated payload: expected " + std::to_string(expected) +
                                               " bytes, got " + std::to_string(bytes.size()));
  if (bytes.size() > expected)
    throw TensorFileError(Kind::TrailingBytes, "CCFT: " + std::to_string(bytes.size() - expected) +
                                                   " trailing bytes after payload");

  std::vector<float> values(count);
  const std::uint8_t* p = bytes.data() + kCcftHeaderBytes;
  for (std::uint64_t i = 0; i < count; ++i, p += 4) {
    values[i] = std::bit_cast<float>(get_u32(p));
    if (!std::isfinite(values[i])) throw TensorFileError(Kind::NonFinite, "CCFT: non-finite value at index " + std::to_string(i));
  }
  return FeatureMap(static_cast<int>(d), static_cast<int>(h), static_cast<int>(w), std::move(values));
}

void write_feature_file(const std::filesystem::path& path, const FeatureMap& features) {
  const auto bytes = encode_feature_file(features);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TensorFileError(Kind::Io, "CCFT: cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw TensorFileError(Kind::Io, "CCFT: write failed for " + path.string());
}

FeatureMap load_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TensorFileError(Kind::Io, "CCFT: cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_feature_file(bytes);
  } catch (const TensorFileError& e) {
    throw TensorFileError(e.kind(), path.string() + ": " + e.what());
  }
}

FeatureDirectory::FeatureDirectory(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!std::filesystem::is_directory(dir_))
    throw std::invalid_argument("feature directory " + dir_.string() + " does not exist");
  const auto index_path = dir_ / "index.json";
  if (!std::filesystem::exists(index_path)) return;
  std::ifstream in(index_path);
  nlohmann::json j;
  try {
    in >> j;
    if (j.at("version").get<int>() != 1) throw std::invalid_argument("unsupported feature index version");
    if (j.contains("stride")) stride_ = j.at("stride").get<int>();
    for (const auto& [key, value] : j.at("files").items())
      index_.emplace(std::stoll(key), dir_ / value.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(index_path.string() + ": " + e.what());
  }
  indexed_ = true;
}

std::optional<std::filesystem::path> FeatureDirectory::find(ImageId id) const {
  std::filesystem::path p;
  if (indexed_) {
    const auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    p = it->second;
  } else {
    p = dir_ / (std::to_string(id) + ".ccft");
  }
  if (!std::filesystem::exists(p)) return std::nullopt;
  return p;
}

void write_feature_index(const std::filesystem::path& dir, const std::map<ImageId, std::string>& files, int stride) {
  nlohmann::json j;
  j["version"] = 1;
  j["stride"] = stride;
  j["files"] = nlohmann::json::object();
  for (const auto& [id, name] : files) j["files"][std::to_string(id)] = name;
  std::ofstream out(dir / "index.json");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + (dir / "index.json").string());
}

int RandomExtractorConfig::total_stride() const {
  int s = 1;
  for (const auto& st : stages) s *= st.stride;
  return s;
}

void RandomExtractorConfig::validate() const {
  if (stages.empty()) throw std::invalid_argument("RandomExtractorConfig: no stages");
  for (const auto& st : stages) {
    if (st.stride != 2) throw std::invalid_argument("RandomExtractorConfig: only stride-2 stages are supported");
    if (st.out_channels < 1) throw std::invalid_argument("RandomExtractorConfig: out_channels must be >= 1");
  }
  if (max_side < total_stride()) throw std::invalid_argument("RandomExtractorConfig: max_side below total stride");
}

RandomExtractor::RandomExtractor(RandomExtractorConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  int in_channels = 3;
  for (const auto& st : cfg_.stages) {
    const std::size_t n = static_cast<std::size_t>(st.out_channels) * in_channels * 9;
    const double scale = std::sqrt(2.0 / (9.0 * in_channels));
    std::vector<float> w(n);
    for (auto& v : w) v = static_cast<float>(rng.normal() * scale);
    weights_.push_back(std::move(w));
    in_channels = st.out_channels;
  }
}

FeatureMap image_to_tensor(const RgbImage& image) {
  FeatureMap t(3, image.height(), image.width());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const auto* p = image.pixel(x, y);
      for (int c = 0; c < 3; ++c) t.at(c, y, x) = p[c] / 255.0f;
    }
  return t;
}

FeatureMap conv3x3_s2_relu(const FeatureMap& input, std::span<const float> weights, int out_channels) {
  const int cin = input.channels();
  const int ih = input.height();
  const int iw = input.width();
  const int oh = ih / 2;
  const int ow = iw / 2;
  if (oh < 1 || ow < 1) throw std::invalid_argument("conv3x3_s2_relu: input too small");
  if (weights.size() != static_cast<std::size_t>(out_channels) * cin * 9)
    throw std::invalid_argument("conv3x3_s2_relu: weight count mismatch");
  FeatureMap out(out_channels, oh, ow);

  // Per output element the taps are accumulated in (channel, ky, kx) order,
  // the same order as the serial reference.
#pragma omp parallel for schedule(dynamic)
  for (int o = 0; o < out_channels; ++o) {
    std::span<float> acc = out.channel(o);
    for (int c = 0; c < cin; ++c) {
      const std::span<const float> src = input.channel(c);
      const float* k = weights.data() + (static_cast<std::size_t>(o) * cin + c) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const float wv = k[ky * 3 + kx];
          const int j_lo = kx == 0 ? 1 : 0;  // skip ix = -1
          const int j_hi = std::min(ow, (iw - kx) / 2 + 1);
          for (int i = 0; i < oh; ++i) {
            const int iy = 2 * i - 1 + ky;
            if (iy < 0 || iy >= ih) continue;
            const float* srow = src.data() + static_cast<std::size_t>(iy) * iw;
            float* arow = acc.data() + static_cast<std::size_t>(i) * ow;
            for (int j = j_lo; j < j_hi; ++j) arow[j] += wv * srow[2 * j - 1 + kx];
          }
        }
      }
    }
    for (float& v : acc) v = std::max(v, 0.0f);
  }
  return out;
}

FeatureMap RandomExtractor::extract(const RgbImage& image) const {
  const int stride = cfg_.total_stride();
  if (image.width() < stride || image.height() < stride)
    throw std::invalid_argument("random_extract: image " + std::to_string(image.width()) + "x" +
                                std::to_string(image.height()) + " is smaller than the stride " +
                                std::to_string(stride));
  FeatureMap x = image_to_tensor(image);
  const int longest = std::max(image.width(), image.height());
  if (longest > cfg_.max_side) {
    const double scale = static_cast<double>(cfg_.max_side) / longest;
    const int nh = std::max(stride, static_cast<int>(std::lround(image.height() * scale)));
    const int nw = std::max(stride, static_cast<int>(std::lround(image.width() * scale)));
    FeatureMap small(3, nh, nw);
    for (int c = 0; c < 3; ++c) {
      const RawScoreMap plane(x.height(), x.width(), std::vector<float>(x.channel(c).begin(), x.channel(c).end()));
      const RawScoreMap resized = bilinear_resize(plane, nh, nw);
      std::copy(resized.values().begin(), resized.values().end(), small.channel(c).begin());
    }
    x = std::move(small);
  }
  for (std::size_t s = 0; s < cfg_.stages.size(); ++s) x = conv3x3_s2_relu(x, weights_[s], cfg_.stages[s].out_channels);
  return x;
}

}  // namespace coarsecrop
