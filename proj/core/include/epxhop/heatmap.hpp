#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "epxhop/feature_map.hpp"

namespace epxhop {

// round(255 * v) per node of one channel, row-major.
std::vector<std::uint8_t> heatmap_pixels(const FeatureMap& map, int channel);

// 8-bit grayscale PNG of one channel, each node drawn as a scale x scale block.
void write_heatmap_png(const std::filesystem::path& path, const FeatureMap& map, int channel, int scale = 1);

}  // namespace epxhop
