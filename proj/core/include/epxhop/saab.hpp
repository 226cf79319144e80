#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "epxhop/feature_map.hpp"

namespace epxhop {

// Spatial window applied to one channel of a feature map.
struct Window {
  int height = 3;
  int width = 3;
  int stride_h = 1;
  int stride_w = 1;
  int padding = 0;  // zero padding on every side

  int area() const noexcept { return height * width; }
  int output_size(int input) const noexcept {
    return (input + 2 * padding - height) / stride_h + 1;
  }
};

// One row per output location (row-major), one column per window element
// (row-major within the window), read from the zero-padded map.
Eigen::MatrixXd extract_neighborhoods(const FeatureMap& map, int channel, const Window& window);

inline Eigen::MatrixXd extract_neighborhoods(const FeatureMap& map, const Window& window) {
  return extract_neighborhoods(map, 0, window);
}

enum class ChannelRole : std::uint8_t { intermediate = 0, leaf = 1, discarded = 2 };

// One channel-wise Saab transform: a constant DC kernel plus PCA kernels of
// the patch-mean-removed residuals.
struct SaabNode {
  Eigen::VectorXd dc_kernel;    // N entries of 1/sqrt(N)
  Eigen::MatrixXd ac_kernels;   // k x N, orthonormal rows, each orthogonal to dc_kernel
  Eigen::VectorXd eigenvalues;  // k, descending
  // Shares of the total patch variance: DC share first, then one per AC
  // kernel. Child energy = parent_energy * share.
  std::vector<double> energy_shares;
  double parent_energy = 1.0;
  std::vector<double> child_energies;  // k + 1, DC first
  std::vector<ChannelRole> child_roles;
  std::uint32_t input_channel = 0;  // channel index in the input map
  double bias = 0.0;  // added to AC responses; zero unless the bias knob is on

  int patch_size() const noexcept { return static_cast<int>(dc_kernel.size()); }
  int kernel_count() const noexcept { return static_cast<int>(ac_kernels.rows()) + 1; }
};

// First and second moments of a patch population.
struct PatchMoments {
  std::size_t count = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // centred, divided by count
  double max_norm = 0.0;       // largest patch L2 norm, for the optional bias
};

PatchMoments patch_moments(const Eigen::MatrixXd& patches);

// Fits from precomputed moments. max_kernels is clamped to N - 1.
SaabNode fit_saab(const PatchMoments& moments, int max_kernels);

// Throws Errc::insufficient_samples when patches has fewer rows than columns.
SaabNode fit_saab(const Eigen::MatrixXd& patches, int max_kernels);

// Projection onto [dc; ac_kernels]: M x (1 + k). Throws on width mismatch.
Eigen::MatrixXd apply_saab(const Eigen::MatrixXd& patches, const SaabNode& node);

// Per-channel window maximum; S' = floor((S - window) / stride) + 1.
FeatureMap max_pool(const FeatureMap& map, int window = 3, int stride = 2);

inline int pooled_size(int input, int window = 3, int stride = 2) {
  return (input - window) / stride + 1;
}

// Orthonormal basis (N x (N-1)) of the complement of the constant vector.
Eigen::MatrixXd helmert_basis(int n);

}  // namespace epxhop
