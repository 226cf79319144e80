#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace epxhop {

// Square S x S x K spatial grid of spectral coefficients, channel-interleaved.
struct FeatureMap {
  int size = 0;
  int channels = 0;
  std::vector<float> data;

  FeatureMap() = default;
  FeatureMap(int s, int k, float fill = 0.0f)
      : size(s), channels(k), data(static_cast<std::size_t>(s) * s * k, fill) {}

  std::size_t nodes() const noexcept { return static_cast<std::size_t>(size) * size; }

  float& at(int r, int c, int k) {
    return data[(static_cast<std::size_t>(r) * size + c) * channels + k];
  }
  float at(int r, int c, int k) const {
    return data[(static_cast<std::size_t>(r) * size + c) * channels + k];
  }
  const float* node(std::size_t index) const { return data.data() + index * channels; }

  bool operator==(const FeatureMap&) const = default;
};

using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace epxhop
