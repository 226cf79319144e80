#include "epxhop/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include <png.h>

#include "epxhop/error.hpp"

namespace epxhop {

std::vector<std::uint8_t> heatmap_pixels(const FeatureMap& map, int channel) {
  if (channel < 0 || channel >= map.channels) throw Error(Errc::invalid_argument, "heatmap channel out of range");
  std::vector<std::uint8_t> px(map.nodes());
  for (std::size_t n = 0; n < px.size(); ++n) {
    const double v = std::clamp(static_cast<double>(map.node(n)[channel]), 0.0, 1.0);
    px[n] = static_cast<std::uint8_t>(std::lround(255.0 * v));
  }
  return px;
}

void write_heatmap_png(const std::filesystem::path& path, const FeatureMap& map, int channel, int scale) {
  if (scale < 1) throw Error(Errc::invalid_argument, "heatmap scale must be positive");
  const auto px = heatmap_pixels(map, channel);
  const int side = map.size * scale;

  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!file) throw Error(Errc::io, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(Errc::internal, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(Errc::io, "PNG encoding failed for " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(side), static_cast<png_uint_32>(side), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(side));
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      row[static_cast<std::size_t>(x)] = px[static_cast<std::size_t>(y / scale) * map.size + x / scale];
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace epxhop
