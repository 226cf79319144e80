#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace epxhop {

inline constexpr int kImageSize = 32;
inline constexpr int kCifarClasses = 10;

// Interleaved H x W x C image with intensities in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w, int c, float fill = 0.0f)
      : height(h), width(w), channels(c),
        pixels(static_cast<std::size_t>(h) * w * c, fill) {}

  float& at(int r, int col, int ch) {
    return pixels[(static_cast<std::size_t>(r) * width + col) * channels + ch];
  }
  float at(int r, int col, int ch) const {
    return pixels[(static_cast<std::size_t>(r) * width + col) * channels + ch];
  }

  bool operator==(const Image&) const = default;
};

struct LabeledImage {
  Image image;
  std::optional<int> label;
  std::uint32_t id = 0;

  bool operator==(const LabeledImage&) const = default;
};

}  // namespace epxhop
