#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace coarsecrop {

/// 8-bit interleaved RGB bitmap.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int width, int height);
  RgbImage(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }

  std::uint8_t* pixel(int x, int y) { return pixels_.data() + offset(x, y); }
  const std::uint8_t* pixel(int x, int y) const { return pixels_.data() + offset(x, y); }
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    auto* p = pixel(x, y);
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }

  const std::vector<std::uint8_t>& bytes() const { return pixels_; }
  std::vector<std::uint8_t>& bytes() { return pixels_; }

  bool operator==(const RgbImage&) const = default;

 private:
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Reads PNG, JPEG or binary PPM, picked by file signature. Grayscale and
/// alpha channels are converted to RGB. Throws std::runtime_error naming the
/// path on failure.
RgbImage read_image(const std::filesystem::path& path);

/// Writes by extension: .png (lossless), .ppm, .jpg/.jpeg (lossy, quality
/// 0-100).
void write_image(const std::filesystem::path& path, const RgbImage& image, int jpeg_quality = 95);

}  // namespace coarsecrop
